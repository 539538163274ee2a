"""Exact event-driven SIS/SIR simulation with external infection.

Each step draws an exponential waiting time at the total rate

    beta * (#susceptible-infected edges) + #infected + sum of L over susceptible nodes

and then picks the event category and node in proportion to its rate.
Infection along edges is sampled by drawing a uniformly random
susceptible-infected edge, which picks a susceptible node with
probability proportional to its count of infected neighbours.

The cure rate is normalized to 1.
"""

from __future__ import annotations

import csv
import io
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence, TextIO

import numpy as np

from .graphs import Graph
from .strategies import StrategySpec

__all__ = [
    "Compartment",
    "EpidemicState",
    "RunOutcome",
    "InitialRule",
    "derive_seed",
    "simulate",
    "simulate_batch",
    "coupled_sis_sir",
    "audit_state",
    "outcomes_to_csv",
    "CSV_HEADER",
]

CSV_HEADER = ("seed", "model", "extinction_time", "censored", "eventual_infected", "event_count")
MODELS = ("SIS", "SIR")


class Compartment(IntEnum):
    SUSCEPTIBLE = 0
    INFECTED = 1
    RESISTANT = 2


_S, _I, _R = 0, 1, 2


class _IndexedSet:
    """Set of ints with O(1) add, remove and indexing (for uniform picks)."""

    __slots__ = ("items", "pos")

    def __init__(self):
        self.items: list[int] = []
        self.pos: dict[int, int] = {}

    def __len__(self):
        return len(self.items)

    def __contains__(self, x):
        return x in self.pos

    def __iter__(self):
        return iter(self.items)

    def add(self, x):
        if x not in self.pos:
            self.pos[x] = len(self.items)
            self.items.append(x)

    def remove(self, x):
        i = self.pos.pop(x)
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i


class EpidemicState:
    """Compartments plus the incremental bookkeeping the engine needs.

    ``edge_pressure[i]`` is the number of infected neighbours of ``i``
    and ``si_edges`` holds every (infected, susceptible) edge, encoded as
    ``u * n + v``.
    """

    def __init__(self, graph: Graph, model: str = "SIS"):
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {model!r}")
        n = graph.node_count
        self.graph = graph
        self.model = model
        self.compartments: list[int] = [_S] * n
        self.infected = _IndexedSet()
        self.edge_pressure: list[int] = [0] * n
        self.si_edges = _IndexedSet()
        self.time = 0.0
        self.event_count = 0
        self.external_rates: dict[int, float] = {}
        self.resistant_count = 0
        self.peak_infected = 0

    @classmethod
    def from_compartments(cls, graph: Graph, compartments: Sequence[int], model: str = "SIS"):
        """Build a state from explicit labels (useful for fixtures)."""
        state = cls(graph, model)
        for v, c in enumerate(compartments):
            if c == _R:
                if model != "SIR":
                    raise ValueError("resistant nodes only exist under SIR")
                state.compartments[v] = _R
                state.resistant_count += 1
        for v, c in enumerate(compartments):
            if c == _I:
                state.infect(v)
        state.peak_infected = state.infected_count
        return state

    @property
    def infected_count(self) -> int:
        return len(self.infected)

    @property
    def infected_set(self) -> frozenset[int]:
        return frozenset(self.infected.items)

    def infect(self, v: int) -> None:
        comp, pressure = self.compartments, self.edge_pressure
        items, pos = self.si_edges.items, self.si_edges.pos
        n = self.graph.node_count
        comp[v] = _I
        self.infected.add(v)
        base = v * n
        for w in self.graph.adjacency[v]:
            pressure[w] += 1
            c = comp[w]
            if c == _I:
                # drop edge (w, v) from the pool by swapping in the last entry
                i = pos.pop(w * n + v)
                last = items.pop()
                if i < len(items):
                    items[i] = last
                    pos[last] = i
            elif c == _S:
                pos[base + w] = len(items)
                items.append(base + w)
        if len(self.infected) > self.peak_infected:
            self.peak_infected = len(self.infected)

    def recover(self, v: int) -> None:
        comp, pressure = self.compartments, self.edge_pressure
        items, pos = self.si_edges.items, self.si_edges.pos
        n = self.graph.node_count
        self.infected.remove(v)
        sis = self.model == "SIS"
        if sis:
            comp[v] = _S
        else:
            comp[v] = _R
            self.resistant_count += 1
        base = v * n
        for w in self.graph.adjacency[v]:
            pressure[w] -= 1
            c = comp[w]
            if c == _S:
                i = pos.pop(base + w)
                last = items.pop()
                if i < len(items):
                    items[i] = last
                    pos[last] = i
            elif sis and c == _I:
                pos[w * n + v] = len(items)
                items.append(w * n + v)

    def external_vector(self) -> np.ndarray:
        vec = np.zeros(self.graph.node_count)
        for v, r in self.external_rates.items():
            vec[v] = r
        return vec


def audit_state(state: EpidemicState, graph: Graph | None = None) -> bool:
    """Recount everything from the compartments; True iff the bookkeeping matches."""
    g = graph or state.graph
    comp = state.compartments
    infected = [v for v in range(g.node_count) if comp[v] == _I]
    if len(infected) != state.infected_count or set(infected) != set(state.infected.items):
        return False
    n = g.node_count
    expected_pool = set()
    for v in range(n):
        k = sum(1 for w in g.adjacency[v] if comp[w] == _I)
        if k != state.edge_pressure[v]:
            return False
        if comp[v] == _S:
            expected_pool.update(w * n + v for w in g.adjacency[v] if comp[w] == _I)
    if expected_pool != set(state.si_edges.items):
        return False
    if state.model == "SIS" and _R in comp:
        return False
    return state.resistant_count == sum(1 for c in comp if c == _R)


@dataclass(frozen=True)
class RunOutcome:
    """Result of one trajectory.

    ``eventual_infected`` is the resistant count at absorption for SIR
    and the peak infected count for SIS. When ``censored`` is true,
    ``extinction_time`` is only a lower bound (the horizon, or the time
    at which the event cap was hit).
    """

    extinction_time: float
    eventual_infected: int
    event_count: int
    censored: bool
    seed: int
    model: str = "SIS"
    peak_infected: int = 0

    def csv_row(self) -> tuple:
        return (self.seed, self.model, repr(float(self.extinction_time)), int(self.censored),
                self.eventual_infected, self.event_count)


def derive_seed(base_seed: int, replication: int, stream: int = 0) -> int:
    """Independent 128-bit seed for ``(base_seed, replication, stream)``."""
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(replication), int(stream)))
    a, b = ss.generate_state(2, dtype=np.uint64)
    return (int(a) << 64) | int(b)


@dataclass(frozen=True)
class InitialRule:
    """How a replication chooses its initially infected nodes.

    ``kind`` is ``"fixed"`` (use ``nodes``), ``"uniform_random"``
    (``k`` distinct nodes uniformly at random) or ``"max_degree"``
    (the ``k`` highest-degree nodes, lowest index first on ties).
    """

    kind: str = "uniform_random"
    k: int = 1
    nodes: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform_random", "max_degree"):
            raise ValueError(f"unknown initial-set rule {self.kind!r}")
        if self.kind != "fixed" and self.k < 1:
            raise ValueError("k must be at least 1")
        object.__setattr__(self, "nodes", tuple(int(v) for v in self.nodes))

    def draw(self, graph: Graph, rng: random.Random) -> list[int]:
        if self.kind == "fixed":
            return list(self.nodes)
        if self.k > graph.node_count:
            raise ValueError(f"cannot pick {self.k} nodes from {graph.node_count}")
        if self.kind == "max_degree":
            return list(graph.degree_order[: self.k])
        return sorted(rng.sample(range(graph.node_count), self.k))


def _check_inputs(graph, model, beta, initial, horizon, max_events):
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if max_events is not None and max_events <= 0:
        raise ValueError(f"max_events must be positive, got {max_events}")
    if math.isinf(horizon) and max_events is None:
        raise ValueError("need a finite time horizon or an event cap")
    nodes = sorted(set(int(v) for v in initial))
    for v in nodes:
        if not 0 <= v < graph.node_count:
            raise ValueError(f"initial node {v} not in graph")
    return nodes


def _refresh_external(state, graph, strategy, beta):
    """Effective external rates on susceptible nodes; returns (pairs, total)."""
    comp = state.compartments
    pairs = []
    total = 0.0
    for v, r in strategy.sparse_rates(state, graph, beta):
        if r > 0 and comp[v] == _S:
            pairs.append((v, r))
            total += r
    state.external_rates = dict(pairs)
    return pairs, total


def _advance(state: EpidemicState, strategy: StrategySpec, beta: float, rng: random.Random,
             horizon: float, max_events: int | None, log: TextIO | None) -> bool:
    """Run ``state`` until absorption or the horizon; returns True if censored."""
    graph = state.graph
    cap = max_events if max_events is not None else math.inf
    expovariate, uniform = rng.expovariate, rng.random
    infected, pool = state.infected, state.si_edges
    n = graph.node_count
    while infected.items:
        if state.event_count >= cap:
            return True
        ext, ext_total = _refresh_external(state, graph, strategy, beta)
        rec_total = len(infected.items)
        inf_total = beta * len(pool.items)
        total = rec_total + inf_total + ext_total
        t = state.time + expovariate(total)
        if t > horizon:
            state.time = horizon
            return True
        state.time = t
        u = uniform() * total
        if u < rec_total:
            v = infected.items[min(int(u), rec_total - 1)]
            state.recover(v)
            kind = "RECOVER"
        elif u < rec_total + inf_total:
            i = min(int((u - rec_total) / beta), len(pool.items) - 1)
            v = pool.items[i] % n
            state.infect(v)
            kind = "INTRINSIC"
        else:
            u -= rec_total + inf_total
            v = ext[-1][0]
            for node, r in ext:
                if u < r:
                    v = node
                    break
                u -= r
            state.infect(v)
            kind = "EXTERNAL"
        state.event_count += 1
        if log is not None:
            log.write(f"{state.time!r} {kind} {v}\n")
    state.external_rates = {}
    return False


def _outcome(state: EpidemicState, censored: bool, seed: int) -> RunOutcome:
    if state.model == "SIR":
        eventual = state.resistant_count + state.infected_count
    else:
        eventual = state.peak_infected
    return RunOutcome(state.time, eventual, state.event_count, censored, seed, state.model,
                      state.peak_infected)


def simulate(graph: Graph, model: str, beta: float, strategy: StrategySpec | None,
             initial_infected: Iterable[int], horizon: float = math.inf,
             max_events: int | None = 10**6, seed: int = 0,
             log: TextIO | None = None, audit_every: int = 0) -> RunOutcome:
    """Simulate one trajectory of the SIS or SIR process.

    Parameters
    ----------
    graph : Graph
    model : {"SIS", "SIR"}
    beta : float
        Per-edge infection rate (cure rate is 1).
    strategy : StrategySpec or None
        External infection policy; ``None`` means no external agent.
    initial_infected : iterable of int
    horizon : float
        Time horizon; a run still alive at ``horizon`` is censored.
    max_events : int or None
        Event cap; a run still alive after this many events is censored.
    seed : int
        Seed for the run's random stream. Equal inputs give equal runs.
    log : text stream, optional
        Receives ``"<time> <kind> <node>"`` lines.
    audit_every : int
        If positive, verify the bookkeeping every that many events and
        raise ``AssertionError`` on a mismatch.
    """
    nodes = _check_inputs(graph, model, beta, initial_infected, horizon, max_events)
    strategy = strategy or StrategySpec("null")
    state = EpidemicState(graph, model)
    for v in nodes:
        state.infect(v)
    rng = random.Random(seed)
    if not audit_every:
        censored = _advance(state, strategy, beta, rng, horizon, max_events, log)
    else:
        # run in slices so the audit sees intermediate states
        target = max_events if max_events is not None else math.inf
        while True:
            stop = min(state.event_count + audit_every, target)
            censored = _advance(state, strategy, beta, rng, horizon, stop, log)
            assert audit_state(state), f"bookkeeping drift after {state.event_count} events"
            if not censored or state.event_count >= target or state.time >= horizon:
                break
    return _outcome(state, censored, seed)


def _batch_chunk(args):
    graph, model, beta, strategy, initial, base_seed, reps, horizon, max_events = args
    out = []
    for k in reps:
        try:
            if isinstance(initial, InitialRule):
                nodes = initial.draw(graph, random.Random(derive_seed(base_seed, k, 1)))
            else:
                nodes = initial
            out.append(simulate(graph, model, beta, strategy, nodes, horizon, max_events,
                                derive_seed(base_seed, k, 0)))
        except Exception as exc:
            raise RuntimeError(f"replication {k} failed: {exc}") from exc
    return out


def simulate_batch(graph: Graph, model: str, beta: float, strategy: StrategySpec | None,
                   initial_infected: Iterable[int] | InitialRule, replications: int,
                   base_seed: int = 0, horizon: float = math.inf,
                   max_events: int | None = 10**6, workers: int = 1) -> list[RunOutcome]:
    """Independent replications, ordered by replication index.

    Replication ``k`` runs with seed ``derive_seed(base_seed, k)``; an
    :class:`InitialRule` draws its nodes from stream 1 of the same key.
    Results do not depend on ``workers``.
    """
    if replications < 1:
        raise ValueError("replications must be at least 1")
    if not isinstance(initial_infected, InitialRule):
        initial_infected = tuple(initial_infected)
    common = (graph, model, beta, strategy, initial_infected, base_seed)
    if workers <= 1 or replications < 2 * workers:
        return _batch_chunk(common + (range(replications), horizon, max_events))
    bounds = np.linspace(0, replications, workers * 4 + 1).astype(int)
    chunks = [common + (range(a, b), horizon, max_events) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [o for part in pool.map(_batch_chunk, chunks) for o in part]


def outcomes_to_csv(outcomes: Iterable[RunOutcome], stream: TextIO | None = None) -> str:
    """Write outcomes as CSV; returns the text when no stream is given."""
    buf = stream if stream is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for o in outcomes:
        writer.writerow(o.csv_row())
    return "" if stream is not None else buf.getvalue()


# ---------------------------------------------------------------------------
# SIS/SIR coupling


def coupled_sis_sir(graph: Graph, beta: float, strategy: StrategySpec | None,
                    initial_infected: Iterable[int], horizon: float = math.inf,
                    max_events: int | None = 10**6, seed: int = 0,
                    check_every: int = 0) -> tuple[RunOutcome, RunOutcome]:
    """Run SIS and SIR on one shared set of clocks.

    Every node has one recovery clock and every (infected, susceptible)
    edge one infection clock, read by both processes. While the SIR
    process is alive its external rate vector is computed from the SIR
    state and applied unchanged to the SIS process as well. A node that
    becomes resistant in SIR is simply susceptible again in SIS. This
    keeps the SIR infected set inside the SIS infected set, so SIS can
    only die out after SIR. Once SIR is absorbed the SIS process carries
    on alone with the policy evaluated on its own state.

    Returns
    -------
    (sis, sir) : tuple of RunOutcome
    """
    nodes = _check_inputs(graph, "SIS", beta, initial_infected, horizon, max_events)
    strategy = strategy or StrategySpec("null")
    sis, sir = EpidemicState(graph, "SIS"), EpidemicState(graph, "SIR")
    for v in nodes:
        sis.infect(v)
        sir.infect(v)
    rng = random.Random(seed)
    cap = max_events if max_events is not None else math.inf
    n = graph.node_count
    t = 0.0
    censored = False
    steps = 0
    while sir.infected.items:
        if max(sis.event_count, sir.event_count) >= cap:
            censored = True
            break
        # external vector from the SIR state, seen by both processes
        ext = [(v, r) for v, r in strategy.sparse_rates(sir, graph, beta)
               if r > 0 and (sir.compartments[v] == _S or sis.compartments[v] == _S)]
        ext_total = sum(r for _, r in ext)
        rec_total = len(sis.infected.items)
        pool_s, pool_r = sis.si_edges.items, sir.si_edges.items
        inf_s = beta * len(pool_s)
        inf_r = beta * len(pool_r)
        total = rec_total + inf_s + inf_r + ext_total
        t += rng.expovariate(total)
        if t > horizon:
            t = horizon
            censored = True
            break
        u = rng.random() * total
        if u < rec_total:
            v = sis.infected.items[min(int(u), rec_total - 1)]
            sis.recover(v)
            sis.event_count += 1
            if sir.compartments[v] == _I:
                sir.recover(v)
                sir.event_count += 1
        elif u < rec_total + inf_s:
            key = pool_s[min(int((u - rec_total) / beta), len(pool_s) - 1)]
            v = key % n
            in_r = key in sir.si_edges
            sis.infect(v)
            sis.event_count += 1
            if in_r:
                sir.infect(v)
                sir.event_count += 1
        elif u < rec_total + inf_s + inf_r:
            key = pool_r[min(int((u - rec_total - inf_s) / beta), len(pool_r) - 1)]
            # clocks shared with the SIS pool already ring in the branch above
            if key not in sis.si_edges:
                sir.infect(key % n)
                sir.event_count += 1
        else:
            u -= rec_total + inf_s + inf_r
            v = ext[-1][0]
            for node, r in ext:
                if u < r:
                    v = node
                    break
                u -= r
            if sir.compartments[v] == _S:
                sir.infect(v)
                sir.event_count += 1
            if sis.compartments[v] == _S:
                sis.infect(v)
                sis.event_count += 1
        steps += 1
        if check_every and steps % check_every == 0:
            assert sir.infected_set <= sis.infected_set
    sis.time = sir.time = t
    sir_out = _outcome(sir, censored, seed)
    if censored:
        return _outcome(sis, True, seed), sir_out
    sis_censored = _advance(sis, strategy, beta, rng, horizon, max_events, None)
    return _outcome(sis, sis_censored, seed), sir_out
