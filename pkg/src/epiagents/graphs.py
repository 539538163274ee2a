"""Graph substrate, generators and threshold metrics.

Nodes are the integers ``0 .. n-1``. A :class:`Graph` is immutable once
built, so it can be shared freely between simulation workers.

The three quantities that govern the epidemic regimes are exposed here:
the maximum degree, the spectral radius of the adjacency matrix
(:func:`spectral_radius`) and the generalized isoperimetric constant
(:func:`isoperimetric_constant`).
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sps

__all__ = [
    "Graph",
    "GraphMetrics",
    "NotConvergedError",
    "EXHAUSTIVE_CAP",
    "build_graph",
    "generate_star",
    "generate_complete",
    "generate_cycle",
    "generate_gnp",
    "generate_grid_torus",
    "kleinberg_long_links",
    "generate_small_world",
    "generate_power_law",
    "spectral_radius",
    "isoperimetric_constant",
    "compute_metrics",
    "read_edge_list",
    "write_edge_list",
    "graph_from_spec",
]

# Largest graph for which exact isoperimetric enumeration is allowed.
EXHAUSTIVE_CAP = 20


class NotConvergedError(RuntimeError):
    """Power iteration ran out of iterations.

    The last estimate is kept on the exception as ``estimate``.
    """

    def __init__(self, estimate: float, iterations: int, change: float):
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(last estimate {estimate!r}, last change {change:.3e})"
        )
        self.estimate = estimate
        self.iterations = iterations
        self.change = change


class Graph:
    """Undirected simple graph with sorted adjacency lists.

    Use :func:`build_graph` (or one of the generators) rather than the
    constructor; the constructor trusts its input.
    """

    __slots__ = ("node_count", "adjacency", "degree", "__dict__")

    def __init__(self, node_count: int, adjacency: Sequence[Sequence[int]]):
        self.node_count = node_count
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(tuple(a) for a in adjacency)
        self.degree: tuple[int, ...] = tuple(len(a) for a in self.adjacency)

    def __repr__(self):
        return f"Graph(n={self.node_count}, edges={self.edge_count})"

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.node_count == other.node_count and self.adjacency == other.adjacency

    def __hash__(self):
        return hash((self.node_count, self.adjacency))

    def __getstate__(self):
        return (self.node_count, self.adjacency)

    def __setstate__(self, state):
        node_count, adjacency = state
        Graph.__init__(self, node_count, adjacency)

    @property
    def n(self) -> int:
        return self.node_count

    @cached_property
    def edge_count(self) -> int:
        return sum(self.degree) // 2

    @cached_property
    def d_max(self) -> int:
        return max(self.degree, default=0)

    @cached_property
    def d_avg(self) -> Fraction:
        return Fraction(sum(self.degree), self.node_count)

    @cached_property
    def degree_order(self) -> tuple[int, ...]:
        """Nodes by decreasing degree, ties broken by lowest index."""
        return tuple(sorted(range(self.node_count), key=lambda i: (-self.degree[i], i)))

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs if u < v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._neighbor_sets[u]

    @cached_property
    def _neighbor_sets(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(a) for a in self.adjacency)

    def adjacency_matrix(self) -> sps.csr_matrix:
        n = self.node_count
        indptr = np.zeros(n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(self.degree)
        indices = np.fromiter(
            itertools.chain.from_iterable(self.adjacency), dtype=np.int64, count=int(indptr[-1])
        )
        data = np.ones(len(indices))
        return sps.csr_matrix((data, indices, indptr), shape=(n, n))


@dataclass(frozen=True)
class GraphMetrics:
    """Threshold-governing quantities of one graph.

    ``eta`` only holds the set sizes that were asked for; ``eta_exact``
    says whether each entry came from exhaustive enumeration or is a
    sampled upper bound.
    """

    d_max: int
    d_avg: Fraction
    lambda1: float
    lambda1_tolerance: float
    eta: dict[int, float] = field(default_factory=dict)
    eta_exact: dict[int, bool] = field(default_factory=dict)
    node_count: int | None = None

    def check(self) -> None:
        """Raise ``AssertionError`` if the spectral sandwich is violated."""
        tol = self.lambda1_tolerance
        assert float(self.d_avg) <= self.lambda1 + tol, (self.d_avg, self.lambda1)
        assert self.lambda1 <= self.d_max + tol, (self.lambda1, self.d_max)
        assert max(float(self.d_avg), math.sqrt(self.d_max)) <= self.lambda1 + tol

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "d_max": self.d_max,
            "d_avg": float(self.d_avg),
            "lambda1": self.lambda1,
            "lambda1_tolerance": self.lambda1_tolerance,
            "eta": {str(m): v for m, v in sorted(self.eta.items())},
            "eta_exact": {str(m): v for m, v in sorted(self.eta_exact.items())},
        }


# ---------------------------------------------------------------------------
# construction


def build_graph(edges: Iterable[tuple[int, int]], node_count: int) -> Graph:
    """Build a simple undirected graph, collapsing duplicate edges.

    Raises
    ------
    ValueError
        On a node index outside ``[0, node_count)`` or a self-loop.
    """
    if node_count < 1:
        raise ValueError(f"node_count must be positive, got {node_count}")
    nbrs: list[set[int]] = [set() for _ in range(node_count)]
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise ValueError(f"edge ({u}, {v}) has an endpoint outside [0, {node_count})")
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        nbrs[u].add(v)
        nbrs[v].add(u)
    return Graph(node_count, [sorted(s) for s in nbrs])


def generate_star(leaves: int) -> Graph:
    """Star with hub 0 and leaves ``1..leaves``."""
    if leaves < 1:
        raise ValueError("a star needs at least one leaf")
    return build_graph(((0, i) for i in range(1, leaves + 1)), leaves + 1)


def generate_complete(n: int) -> Graph:
    return build_graph(itertools.combinations(range(n), 2), n)


def generate_cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 nodes")
    return build_graph(((i, (i + 1) % n) for i in range(n)), n)


def generate_gnp(n: int, p: float, seed: int | None = None) -> Graph:
    """Erdos-Renyi G(n, p): every pair is an edge independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return build_graph(zip(iu[keep].tolist(), ju[keep].tolist()), n)


def _torus_edges(side: int):
    for r in range(side):
        for c in range(side):
            u = r * side + c
            yield u, r * side + (c + 1) % side
            yield u, ((r + 1) % side) * side + c


def generate_grid_torus(side: int) -> Graph:
    """``side x side`` grid with wrap-around; node ``(r, c)`` is ``r*side + c``.

    For ``side = 2`` the two wrap directions coincide and collapse, so
    every node has degree 2.
    """
    if side < 2:
        raise ValueError("torus side must be at least 2")
    return build_graph(_torus_edges(side), side * side)


def _torus_distance(side: int) -> np.ndarray:
    """Lattice (wrap-around Manhattan) distance between all node pairs."""
    coords = np.arange(side)
    d1 = np.abs(coords[:, None] - coords[None, :])
    d1 = np.minimum(d1, side - d1)
    # node u = r*side + c
    r = np.repeat(coords, side)
    c = np.tile(coords, side)
    return d1[r[:, None], r[None, :]] + d1[c[:, None], c[None, :]]


def kleinberg_long_links(side: int, link_exponent: float, seed: int | None = None) -> list[tuple[int, int]]:
    """One long-range link per torus node, Kleinberg style.

    Node ``u`` links to ``v`` with probability proportional to
    ``dist(u, v) ** -link_exponent``. Draws landing on ``u`` itself or
    on a current neighbour (torus or earlier long link) are redrawn.
    """
    if side < 2:
        raise ValueError("torus side must be at least 2")
    n = side * side
    base = generate_grid_torus(side)
    dist = _torus_distance(side).astype(float)
    rng = np.random.default_rng(seed)
    nbrs = [set(a) for a in base.adjacency]
    links = []
    for u in range(n):
        weights = np.zeros(n)
        mask = dist[u] > 0
        weights[mask] = dist[u][mask] ** (-float(link_exponent))
        if len(nbrs[u]) >= n - 1:
            continue
        total = weights.sum()
        while True:
            v = int(rng.choice(n, p=weights / total))
            if v != u and v not in nbrs[u]:
                break
        nbrs[u].add(v)
        nbrs[v].add(u)
        links.append((u, v))
    return links


def generate_small_world(side: int, link_exponent: float, seed: int | None = None) -> Graph:
    """Torus plus one long-range link per node (see :func:`kleinberg_long_links`)."""
    links = kleinberg_long_links(side, link_exponent, seed)
    return build_graph(itertools.chain(_torus_edges(side), links), side * side)


def generate_power_law(n: int, attachment_edges: int, seed: int | None = None) -> Graph:
    """Linear preferential attachment.

    Starts from a clique on ``attachment_edges + 1`` nodes; each new node
    draws ``attachment_edges`` targets proportionally to degree (with
    replacement, duplicates collapsed).
    """
    m = attachment_edges
    if m < 1:
        raise ValueError("attachment_edges must be at least 1")
    if n <= m:
        raise ValueError("need n > attachment_edges")
    rng = random.Random(seed)
    edges = list(itertools.combinations(range(m + 1), 2))
    # each node appears once per incident edge
    pool = [x for e in edges for x in e]
    for new in range(m + 1, n):
        targets = {pool[rng.randrange(len(pool))] for _ in range(m)}
        for t in sorted(targets):
            edges.append((new, t))
            pool.extend((new, t))
    return build_graph(edges, n)


# ---------------------------------------------------------------------------
# metrics


def spectral_radius(g: Graph, tolerance: float = 1e-12, max_iterations: int = 100_000,
                    seed: int = 0) -> float:
    """Largest adjacency eigenvalue by power iteration.

    Iterates on ``A + I`` so that bipartite graphs (where ``-lambda1`` is
    also an eigenvalue) still converge, starting from the all-ones
    vector. If half the iteration budget passes without convergence the
    iteration restarts once from a random vector.

    Raises
    ------
    NotConvergedError
        If the Rayleigh quotient still moves by more than ``tolerance``
        after ``max_iterations``; the exception carries the estimate.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if g.edge_count == 0:
        return 0.0
    a = g.adjacency_matrix()
    starts = [np.ones(g.node_count)]
    budget = max(max_iterations // 2, 1)
    estimate, change, used = math.nan, math.inf, 0
    for attempt in range(2):
        x = starts[0] if attempt == 0 else np.random.default_rng(seed).random(g.node_count) + 0.5
        x = x / np.linalg.norm(x)
        estimate = float(x @ (a @ x))
        for _ in range(budget):
            y = a @ x + x
            norm = np.linalg.norm(y)
            x = y / norm
            new = float(x @ (a @ x))
            change = abs(new - estimate)
            estimate = new
            used += 1
            if change < tolerance:
                return estimate
    raise NotConvergedError(estimate, used, change)


def _subset_tables(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Size and boundary-edge count of every node subset, indexed by bitmask."""
    n = g.node_count
    size = np.zeros(1 << n, dtype=np.int8)
    internal = np.zeros(1 << n, dtype=np.int32)
    degsum = np.zeros(1 << n, dtype=np.int32)
    adjmask = [sum(1 << v for v in nbrs) for nbrs in g.adjacency]
    for b in range(n):
        lo, hi = 0, 1 << b
        rest = np.arange(lo, hi, dtype=np.int64)
        # edges from b into the lower-bit part of the mask
        into = np.bitwise_count(rest & adjmask[b]).astype(np.int32)
        size[hi:2 * hi] = size[:hi] + 1
        internal[hi:2 * hi] = internal[:hi] + into
        degsum[hi:2 * hi] = degsum[:hi] + g.degree[b]
    return size, degsum - 2 * internal


def _eta_sampled(g: Graph, m: int, trials: int, seed: int | None) -> float:
    """Upper bound on eta(m) from randomly grown connected sets."""
    rng = random.Random(seed)
    n = g.node_count
    best = math.inf
    for t in range(trials):
        start = rng.randrange(n)
        inside = {start}
        boundary = g.degree[start]
        best = min(best, boundary / 1)
        frontier = set(g.adjacency[start])
        greedy = t % 2 == 1
        while len(inside) < m:
            if frontier:
                if greedy:
                    # add the frontier node that closes the most boundary
                    v = min(sorted(frontier), key=lambda w: g.degree[w] - 2 * sum(
                        1 for x in g.adjacency[w] if x in inside))
                else:
                    v = rng.choice(sorted(frontier))
            else:
                outside = [w for w in range(n) if w not in inside]
                v = rng.choice(outside)
            k = sum(1 for x in g.adjacency[v] if x in inside)
            boundary += g.degree[v] - 2 * k
            inside.add(v)
            frontier.discard(v)
            frontier.update(x for x in g.adjacency[v] if x not in inside)
            best = min(best, boundary / len(inside))
    return best


def isoperimetric_constant(g: Graph, m: int, mode: str = "exact", trials: int = 200,
                           seed: int | None = 0) -> tuple[float, bool]:
    """Generalized isoperimetric constant.

    ``eta(m) = min |E(S, S^c)| / |S|`` over nonempty node sets with
    ``|S| <= m``.

    ``mode="exact"`` enumerates every subset (only up to
    :data:`EXHAUSTIVE_CAP` nodes). ``mode="sampled"`` grows random
    connected sets and returns the best ratio seen, which is an upper
    bound on the true minimum.

    Returns
    -------
    (value, exact) : tuple
    """
    n = g.node_count
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    if mode == "exact":
        if n > EXHAUSTIVE_CAP:
            raise ValueError(
                f"exact enumeration is capped at {EXHAUSTIVE_CAP} nodes (graph has {n}); "
                "use mode='sampled' for an upper bound"
            )
        size, boundary = _subset_tables(g)
        ok = (size >= 1) & (size <= m)
        ratios = boundary[ok] / size[ok]
        return float(ratios.min()), True
    if mode == "sampled":
        return _eta_sampled(g, m, trials, seed), False
    raise ValueError(f"unknown mode {mode!r}")


def compute_metrics(g: Graph, eta_sizes: Iterable[int] = (), tolerance: float = 1e-10,
                    eta_mode: str = "auto") -> GraphMetrics:
    """Collect d_max, d_avg, lambda1 and the requested eta(m) values."""
    lam = spectral_radius(g, tolerance=tolerance)
    eta, exact = {}, {}
    for m in eta_sizes:
        mode = eta_mode
        if mode == "auto":
            mode = "exact" if g.node_count <= EXHAUSTIVE_CAP else "sampled"
        eta[m], exact[m] = isoperimetric_constant(g, m, mode=mode)
    # Rayleigh-quotient change below tol leaves an error of a few tol
    return GraphMetrics(g.d_max, g.d_avg, lam, max(1e-8, 100 * tolerance), eta, exact, g.node_count)


# ---------------------------------------------------------------------------
# exchange format


def write_edge_list(g: Graph, path: str | Path) -> None:
    lines = [f"n {g.node_count}"] + [f"{u} {v}" for u, v in g.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path: str | Path) -> Graph:
    """Read the ``n <count>`` / ``<u> <v>`` edge-list format."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path}: empty graph file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n":
        raise ValueError(f"{path}: first line must be 'n <node_count>'")
    n = int(head[1])
    edges = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected '<u> <v>', got {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return build_graph(edges, n)


_GENERATORS = {
    "star": (generate_star, ("leaves",)),
    "complete": (generate_complete, ("n",)),
    "cycle": (generate_cycle, ("n",)),
    "gnp": (generate_gnp, ("n", "p", "seed")),
    "torus": (generate_grid_torus, ("side",)),
    "small_world": (generate_small_world, ("side", "link_exponent", "seed")),
    "power_law": (generate_power_law, ("n", "attachment_edges", "seed")),
}

# parameter that an n-sweep substitutes, per family
SIZE_PARAMETER = {
    "star": "leaves", "complete": "n", "cycle": "n", "gnp": "n",
    "torus": "side", "small_world": "side", "power_law": "n",
}


def graph_from_spec(family: str, **params) -> Graph:
    """Instantiate a named generator, e.g. ``graph_from_spec("gnp", n=50, p=0.1, seed=3)``."""
    if family == "file":
        return read_edge_list(params["path"])
    try:
        fn, names = _GENERATORS[family]
    except KeyError:
        raise ValueError(f"unknown graph family {family!r}; known: {sorted(_GENERATORS)}") from None
    unknown = set(params) - set(names)
    if unknown:
        raise ValueError(f"{family}: unexpected parameters {sorted(unknown)}")
    return fn(**params)


def parse_generator_spec(text: str) -> Graph:
    """Parse ``family:key=value,...`` (or a path to an edge-list file)."""
    if ":" not in text:
        return read_edge_list(text)
    family, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, value = item.partition("=")
        value = value.strip()
        try:
            params[key.strip()] = int(value)
        except ValueError:
            params[key.strip()] = float(value)
    return graph_from_spec(family.strip(), **params)
