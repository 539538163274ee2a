"""External-infection policies.

A policy maps the current epidemic state to a vector of extra per-node
infection rates ``L`` whose total never exceeds the virulence budget
``mu(state)``. The public ``rates_*`` functions return dense numpy
vectors. The simulation engine calls :meth:`StrategySpec.sparse_rates`
instead, which yields only the nonzero ``(node, rate)`` entries.

Policies only read ``state.compartments`` (0 = susceptible,
1 = infected, 2 = resistant), ``state.infected_count`` and
``state.event_count``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "KINDS",
    "StrategySpec",
    "rates_null",
    "rates_targeted_max_degree",
    "rates_degree_threshold",
    "rates_uniform",
    "rates_linear_scaling",
    "rates_static_long_range",
    "linear_scaling_budget",
]

KINDS = (
    "null",
    "targeted_max_degree",
    "degree_threshold",
    "uniform",
    "linear_scaling",
    "static_long_range",
)

_S, _I = 0, 1


def linear_scaling_budget(infected: int, gamma: float, alpha: float, n: int) -> float:
    """``gamma * |I|`` below ``n**alpha``, frozen at ``gamma * floor(n**alpha)`` above."""
    if infected <= 0:
        return 0.0
    cap = n ** alpha
    if infected < cap:
        return gamma * infected
    return gamma * math.floor(cap)


def _pick_seed(seed: int, draw_index: int) -> random.Random:
    return random.Random(f"{seed}:{draw_index}")


@dataclass(frozen=True)
class StrategySpec:
    """An external-infection policy and its parameters.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS`.
    mu : float
        Constant budget (targeted, degree-threshold and uniform policies).
    gamma, alpha : float
        Slope and cap exponent of the linear-scaling budget.
    degree_threshold : int, optional
        Minimum degree of a preferred target for ``degree_threshold``.
    long_range_edges : tuple of (int, int)
        Fixed extra links for ``static_long_range``.
    beta_ext : float, optional
        Per-link rate for ``static_long_range``; defaults to the
        intrinsic ``beta`` of the run.
    seed : int
        Seed for the random fallback pick of ``degree_threshold``.
    """

    kind: str = "null"
    mu: float = 0.0
    gamma: float = 0.0
    alpha: float = 1.0
    degree_threshold: int | None = None
    long_range_edges: tuple[tuple[int, int], ...] = field(default=())
    beta_ext: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}; expected one of {KINDS}")
        if self.mu < 0 or self.gamma < 0:
            raise ValueError("mu and gamma must be nonnegative")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.kind == "degree_threshold" and (self.degree_threshold is None or self.degree_threshold < 1):
            raise ValueError("degree_threshold policy needs degree_threshold >= 1")
        if self.beta_ext is not None and self.beta_ext < 0:
            raise ValueError("beta_ext must be nonnegative")
        object.__setattr__(self, "long_range_edges",
                           tuple((int(u), int(v)) for u, v in self.long_range_edges))

    @classmethod
    def from_dict(cls, data: dict) -> "StrategySpec":
        data = dict(data)
        if "long_range_edges" in data:
            data["long_range_edges"] = tuple(tuple(e) for e in data["long_range_edges"])
        return cls(**data)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("targeted_max_degree", "degree_threshold", "uniform"):
            out["mu"] = self.mu
        if self.kind == "degree_threshold":
            out["degree_threshold"] = self.degree_threshold
            out["seed"] = self.seed
        if self.kind == "linear_scaling":
            out.update(gamma=self.gamma, alpha=self.alpha)
        if self.kind == "static_long_range":
            out["long_range_edges"] = [list(e) for e in self.long_range_edges]
            if self.beta_ext is not None:
                out["beta_ext"] = self.beta_ext
        return out

    @property
    def constant_budget(self) -> bool:
        return self.kind != "linear_scaling"

    @cached_property
    def _long_neighbours(self) -> dict[int, list[int]]:
        nb: dict[int, list[int]] = {}
        for u, v in self.long_range_edges:
            nb.setdefault(u, []).append(v)
            nb.setdefault(v, []).append(u)
        return nb

    def budget(self, state, n: int, beta: float | None = None) -> float:
        """Virulence bound ``mu(state)``; zero when nothing is infected."""
        if state.infected_count == 0 or self.kind == "null":
            return 0.0
        if self.kind == "linear_scaling":
            return linear_scaling_budget(state.infected_count, self.gamma, self.alpha, n)
        if self.kind == "static_long_range":
            return len(self.long_range_edges) * self._beta_ext(beta)
        return self.mu

    def max_budget(self, n: int, beta: float | None = None) -> float:
        """Largest budget over all states."""
        if self.kind == "null":
            return 0.0
        if self.kind == "linear_scaling":
            return linear_scaling_budget(n, self.gamma, self.alpha, n)
        if self.kind == "static_long_range":
            return len(self.long_range_edges) * self._beta_ext(beta)
        return self.mu

    def _beta_ext(self, beta):
        if self.beta_ext is not None:
            return self.beta_ext
        if beta is None:
            raise ValueError("static_long_range needs beta_ext or the run's beta")
        return beta

    def sparse_rates(self, state, graph, beta: float | None = None) -> list[tuple[int, float]]:
        """Nonzero entries of ``L`` as ``(node, rate)`` pairs."""
        if state.infected_count == 0:
            return []
        comp = state.compartments
        kind = self.kind
        if kind == "null" or (self.mu == 0 and kind in ("targeted_max_degree", "degree_threshold", "uniform")):
            return []
        if kind == "targeted_max_degree":
            for v in graph.degree_order:
                if comp[v] == _S:
                    return [(v, self.mu)]
            return []
        if kind == "degree_threshold":
            thr = self.degree_threshold
            deg = graph.degree
            susceptible = [v for v in range(graph.node_count) if comp[v] == _S]
            if not susceptible:
                return []
            for v in susceptible:
                if deg[v] >= thr:
                    return [(v, self.mu)]
            rng = _pick_seed(self.seed, state.event_count)
            return [(susceptible[rng.randrange(len(susceptible))], self.mu)]
        if kind == "uniform":
            share = self.mu / graph.node_count
            return [(v, share) for v in range(graph.node_count)]
        if kind == "linear_scaling":
            total = linear_scaling_budget(state.infected_count, self.gamma, self.alpha, graph.node_count)
            if total == 0:
                return []
            share = total / graph.node_count
            return [(v, share) for v in range(graph.node_count)]
        # static_long_range: only susceptible endpoints can be infected, so
        # rates on infected or resistant nodes are left at zero.
        b = self._beta_ext(beta)
        out = []
        for v, peers in self._long_neighbours.items():
            if comp[v] != _S:
                continue
            k = sum(1 for w in peers if comp[w] == _I)
            if k:
                out.append((v, b * k))
        return out

    def rates(self, state, graph, beta: float | None = None) -> np.ndarray:
        """Dense rate vector ``L`` of length ``graph.node_count``."""
        vec = np.zeros(graph.node_count)
        for v, r in self.sparse_rates(state, graph, beta):
            vec[v] += r
        return vec


def rates_null(state, graph) -> np.ndarray:
    return StrategySpec("null").rates(state, graph)


def rates_targeted_max_degree(state, graph, mu: float) -> np.ndarray:
    """Whole budget on the highest-degree susceptible node (lowest index on ties)."""
    return StrategySpec("targeted_max_degree", mu=mu).rates(state, graph)


def rates_degree_threshold(state, graph, mu: float, degree_threshold: int, seed: int = 0) -> np.ndarray:
    """Whole budget on the lowest-index susceptible node of degree >= threshold.

    Without such a node the target is a uniformly random susceptible
    node, drawn from ``(seed, state.event_count)`` so replays are exact.
    """
    spec = StrategySpec("degree_threshold", mu=mu, degree_threshold=degree_threshold, seed=seed)
    return spec.rates(state, graph)


def rates_uniform(state, graph, mu: float) -> np.ndarray:
    """``mu / n`` on every node, infected or not."""
    return StrategySpec("uniform", mu=mu).rates(state, graph)


def rates_linear_scaling(state, graph, gamma: float, alpha: float) -> np.ndarray:
    return StrategySpec("linear_scaling", gamma=gamma, alpha=alpha).rates(state, graph)


def rates_static_long_range(state, graph, long_range_edges, beta_ext: float) -> np.ndarray:
    """``beta_ext`` times the number of infected long-range peers, per susceptible node."""
    spec = StrategySpec("static_long_range", long_range_edges=tuple(long_range_edges), beta_ext=beta_ext)
    return spec.rates(state, graph)
