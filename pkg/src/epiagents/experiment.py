"""Experiment configs, n-sweeps and their reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .epidemics import CSV_HEADER, MODELS, InitialRule, derive_seed, simulate_batch
from .graphs import SIZE_PARAMETER, Graph, graph_from_spec
from .stats import fit_scaling, summarize_point
from .strategies import StrategySpec

__all__ = ["ExperimentConfig", "SweepReport", "ExperimentIOError", "run_experiment", "load_config",
           "RAW_HEADER"]

RAW_HEADER = ("n",) + CSV_HEADER
CENSORED_LIMIT = 0.1
FIT_TARGETS = ("extinction_time", "eventual_infected")
VERDICTS = {"constant": "subcritical", "log": "critical", "power": "critical",
            "stretched_exponential": "supercritical"}
_POINT_STREAM = 2


class ExperimentIOError(OSError):
    """Writing results failed; ``report`` holds the points finished so far."""

    def __init__(self, message: str, report: "SweepReport"):
        super().__init__(message)
        self.report = report


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a sweep.

    ``beta`` is a number or a mapping from ``n`` to a number; with
    ``beta_exponent`` the rate at size ``n`` becomes
    ``beta * n**beta_exponent``. ``sweep`` lists the values of the
    family's size parameter; an empty sweep runs the graph exactly as
    given in ``graph_params``.
    """

    graph_family: str
    model: str = "SIS"
    beta: float | dict = 0.1
    beta_exponent: float = 0.0
    graph_params: dict = field(default_factory=dict)
    strategy: dict = field(default_factory=lambda: {"kind": "null"})
    initial: dict = field(default_factory=lambda: {"kind": "uniform_random", "k": 1})
    replications: int = 1000
    horizon: float = math.inf
    max_events: int | None = 10**6
    sweep: list = field(default_factory=list)
    base_seed: int = 0
    workers: int = 1
    fit_target: str = "extinction_time"
    raw_csv: str | None = None
    summary_json: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.graph_family != "file" and self.graph_family not in SIZE_PARAMETER:
            raise ValueError(f"unknown graph family {self.graph_family!r}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if isinstance(self.beta, dict):
            self.beta = {int(k): float(v) for k, v in self.beta.items()}
            missing = [n for n in self.sweep if int(n) not in self.beta]
            if missing:
                raise ValueError(f"beta mapping lacks sweep values {missing}")
            if any(v <= 0 for v in self.beta.values()):
                raise ValueError("beta must be positive")
        elif not self.beta > 0:
            raise ValueError("beta must be positive")
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ValueError(f"replications must be a positive integer, got {self.replications!r}")
        self.horizon = float(self.horizon)
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.max_events is not None and self.max_events < 1:
            raise ValueError("max_events must be positive")
        if math.isinf(self.horizon) and self.max_events is None:
            raise ValueError("need a finite horizon or an event cap")
        if self.sweep and self.graph_family == "file":
            raise ValueError("file graphs cannot be swept")
        if len(set(self.sweep)) != len(self.sweep):
            raise ValueError("sweep values must be distinct")
        if self.fit_target not in FIT_TARGETS:
            raise ValueError(f"fit_target must be one of {FIT_TARGETS}")
        if self.fit_target == "eventual_infected" and self.model != "SIR":
            raise ValueError("eventual_infected is only defined for SIR")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        self.strategy_spec()
        self.initial_rule()

    def strategy_spec(self) -> StrategySpec:
        return StrategySpec.from_dict(self.strategy)

    def initial_rule(self) -> InitialRule:
        return InitialRule(**self.initial)

    def beta_at(self, n: int | None) -> float:
        base = self.beta[int(n)] if isinstance(self.beta, dict) else self.beta
        if n is None or self.beta_exponent == 0:
            return float(base)
        return float(base) * n ** self.beta_exponent

    def graph_at(self, n: int | None) -> Graph:
        params = dict(self.graph_params)
        if n is not None:
            params[SIZE_PARAMETER[self.graph_family]] = int(n)
        return graph_from_spec(self.graph_family, **params)

    def points(self) -> list:
        return list(self.sweep) if self.sweep else [None]

    def to_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(self.horizon):
            out["horizon"] = "inf"
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        graph = data.pop("graph", None)
        if graph is not None:
            graph = dict(graph)
            data["graph_family"] = graph.pop("family")
            data.setdefault("graph_params", graph.pop("params", graph))
        output = data.pop("output", None)
        if output:
            data.setdefault("raw_csv", output.get("raw_csv"))
            data.setdefault("summary_json", output.get("summary_json"))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if isinstance(data.get("horizon"), str):
            data["horizon"] = float(data["horizon"])
        return cls(**data)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a YAML experiment config."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return ExperimentConfig.from_dict(data)


@dataclass
class SweepReport:
    config: dict
    points: list = field(default_factory=list)
    regression: dict | None = None
    verdict: str = "pending"
    version: str = __version__

    def to_dict(self) -> dict:
        return {"version": self.version, "config": self.config, "points": self.points,
                "regression": self.regression, "verdict": self.verdict}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)


def _json_default(obj):
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _fit_block(report: SweepReport, target: str) -> None:
    pts = report.points
    if any(p["censored_fraction"] >= CENSORED_LIMIT for p in pts):
        report.verdict = "exceeds horizon"
        return
    key, se_key = (("mean", "stderr") if target == "extinction_time"
                   else ("mean_eventual_infected", "eventual_infected_stderr"))
    usable = [(p["n"], p[key], p[se_key]) for p in pts
              if p["n"] is not None and p[key] is not None and p[key] > 0]
    if len(usable) < 3 or len({u[0] for u in usable}) < 2:
        report.verdict = "insufficient points"
        return
    fit = fit_scaling(usable)
    report.regression = {"target": target, **fit.to_dict()}
    report.verdict = VERDICTS[fit.family]


def run_experiment(config: ExperimentConfig) -> SweepReport:
    """Run every sweep point, then summarize and fit.

    Raw rows go to ``config.raw_csv`` point by point, so an I/O failure
    leaves every finished point on disk and in the report carried by
    :class:`ExperimentIOError`.
    """
    config.validate()
    strategy = config.strategy_spec()
    rule = config.initial_rule()
    report = SweepReport(config=config.to_dict())
    raw = None
    try:
        if config.raw_csv:
            Path(config.raw_csv).parent.mkdir(parents=True, exist_ok=True)
            raw = open(config.raw_csv, "w", newline="")
            writer = csv.writer(raw, lineterminator="\n")
            writer.writerow(RAW_HEADER)
        for idx, n in enumerate(config.points()):
            graph = config.graph_at(n)
            beta = config.beta_at(n)
            outcomes = simulate_batch(graph, config.model, beta, strategy, rule, config.replications,
                                      base_seed=derive_seed(config.base_seed, idx, _POINT_STREAM),
                                      horizon=config.horizon, max_events=config.max_events,
                                      workers=config.workers)
            summary = summarize_point(outcomes, seed=idx)
            report.points.append({"n": n, "node_count": graph.node_count, "beta": beta, **summary})
            if raw is not None:
                for o in outcomes:
                    writer.writerow(("" if n is None else n,) + o.csv_row())
                raw.flush()
    except OSError as exc:
        raise ExperimentIOError(f"writing results failed after {len(report.points)} point(s): {exc}",
                                report) from exc
    finally:
        if raw is not None:
            raw.close()
    _fit_block(report, config.fit_target)
    if config.summary_json:
        try:
            Path(config.summary_json).parent.mkdir(parents=True, exist_ok=True)
            Path(config.summary_json).write_text(report.to_json() + "\n")
        except OSError as exc:
            raise ExperimentIOError(f"writing summary failed: {exc}", report) from exc
    return report
