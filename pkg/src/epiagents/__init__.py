"""Epidemics on graphs driven by an external infecting agent.

Exact SIS/SIR simulation with pluggable external-infection policies,
birth-death chain bounds on extinction times, graph metrics that set
the thresholds, and a sweep harness that fits growth laws.
"""

__version__ = "0.1.0"

from .graphs import Graph, GraphMetrics, build_graph, compute_metrics, spectral_radius, isoperimetric_constant
from .strategies import StrategySpec
from .epidemics import RunOutcome, InitialRule, simulate, simulate_batch, coupled_sis_sir
from .chains import (
    BirthDeathChain,
    expected_absorption_from_1,
    expected_absorption_from_L,
    regime_classify,
    sis_lower_chain,
    sis_upper_chain,
    stationary_reflected,
    subcritical_series_bound,
)
from .stats import bootstrap_ci, fit_scaling
from .experiment import ExperimentConfig, SweepReport, run_experiment

__all__ = [
    "Graph", "GraphMetrics", "build_graph", "compute_metrics", "spectral_radius", "isoperimetric_constant",
    "StrategySpec", "RunOutcome", "InitialRule", "simulate", "simulate_batch", "coupled_sis_sir",
    "BirthDeathChain", "expected_absorption_from_1", "expected_absorption_from_L", "regime_classify",
    "sis_lower_chain", "sis_upper_chain", "stationary_reflected", "subcritical_series_bound",
    "bootstrap_ci", "fit_scaling", "ExperimentConfig", "SweepReport", "run_experiment",
]
