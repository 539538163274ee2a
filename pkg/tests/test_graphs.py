import itertools
import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epiagents.graphs import (
    EXHAUSTIVE_CAP,
    NotConvergedError,
    build_graph,
    compute_metrics,
    generate_complete,
    generate_cycle,
    generate_gnp,
    generate_grid_torus,
    generate_power_law,
    generate_small_world,
    generate_star,
    isoperimetric_constant,
    kleinberg_long_links,
    parse_generator_spec,
    read_edge_list,
    spectral_radius,
    write_edge_list,
)

from oracles import brute_eta, dense_lambda1


# --- construction -----------------------------------------------------------

def test_build_path():
    g = build_graph([(0, 1), (1, 2)], 3)
    assert g.degree == (1, 2, 1)
    assert g.adjacency == ((1,), (0, 2), (1,))


def test_build_edgeless():
    g = build_graph([], 4)
    assert g.d_max == 0 and g.edge_count == 0


def test_duplicate_edges_collapse():
    g = build_graph([(0, 1), (0, 1), (1, 0)], 2)
    assert g.degree == (1, 1)


@pytest.mark.parametrize("edges", [[(0, 3)], [(-1, 0)], [(1, 1)]])
def test_build_rejects(edges):
    with pytest.raises(ValueError):
        build_graph(edges, 3)


def test_star_basics():
    g = generate_star(3)
    assert g.d_max == 3 and g.edge_count == 3
    assert g.adjacency[0] == (1, 2, 3)
    assert all(g.adjacency[i] == (0,) for i in range(1, 4))
    with pytest.raises(ValueError):
        generate_star(0)


def test_gnp_extremes():
    assert generate_gnp(10, 0.0, seed=1).edge_count == 0
    g = generate_gnp(10, 1.0, seed=1)
    assert g.d_max == 9 and g.edge_count == 45


def test_gnp_mean_degree():
    means = [float(generate_gnp(1000, 0.01, seed=s).d_avg) for s in range(20)]
    se = statistics.stdev(means) / math.sqrt(len(means))
    assert abs(statistics.fmean(means) - 999 * 0.01) < 3 * se + 1e-9


def test_torus():
    g = generate_grid_torus(3)
    assert g.n == 9 and set(g.degree) == {4}
    g2 = generate_grid_torus(2)
    assert set(g2.degree) == {2}
    with pytest.raises(ValueError):
        generate_grid_torus(1)


def test_small_world():
    g = generate_small_world(10, 0.0, seed=3)
    assert min(g.degree) >= 5
    assert generate_small_world(10, 2.0, seed=7) == generate_small_world(10, 2.0, seed=7)
    g20 = generate_small_world(20, 2.0, seed=1)
    assert 5 <= float(g20.d_avg) <= 6


def test_long_links_avoid_existing_neighbours():
    side = 6
    torus = generate_grid_torus(side)
    links = kleinberg_long_links(side, 2.0, seed=11)
    assert len(links) == side * side
    seen = set()
    for u, v in links:
        assert u != v and not torus.has_edge(u, v)
        key = frozenset((u, v))
        assert key not in seen
        seen.add(key)


def test_power_law():
    g = generate_power_law(10, 1, seed=0)
    assert g.edge_count == 9
    assert _connected(g)
    a = generate_power_law(1000, 2, seed=5)
    b = generate_power_law(1000, 2, seed=5)
    assert a == b and a.d_max == b.d_max
    assert _connected(a)
    with pytest.raises(ValueError):
        generate_power_law(2, 2)


def test_power_law_dmax_grows():
    small = statistics.median(generate_power_law(500, 2, seed=s).d_max for s in range(10))
    large = statistics.median(generate_power_law(5000, 2, seed=s).d_max for s in range(10))
    assert large > small


def _connected(g):
    seen, stack = {0}, [0]
    while stack:
        for v in g.adjacency[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == g.n


def test_generators_deterministic():
    assert generate_gnp(50, 0.1, seed=4) == generate_gnp(50, 0.1, seed=4)
    assert generate_gnp(50, 0.1, seed=4) != generate_gnp(50, 0.1, seed=5)
    assert generate_power_law(200, 3, seed=2) == generate_power_law(200, 3, seed=2)


# --- spectral radius --------------------------------------------------------

def test_lambda1_known_values():
    assert spectral_radius(generate_complete(5)) == pytest.approx(4, abs=1e-9)
    assert spectral_radius(generate_cycle(8)) == pytest.approx(2, abs=1e-9)
    assert spectral_radius(generate_star(9)) == pytest.approx(3, abs=1e-9)
    assert spectral_radius(generate_star(1)) == pytest.approx(1, abs=1e-9)
    assert spectral_radius(generate_grid_torus(10)) == pytest.approx(4, abs=1e-9)
    assert spectral_radius(build_graph([], 3)) == 0.0


@pytest.mark.parametrize("leaves", [2, 5, 9, 30, 100])
def test_star_lambda1_matches_dense(leaves):
    g = generate_star(leaves)
    assert dense_lambda1(g) == pytest.approx(math.sqrt(leaves), abs=1e-10)
    assert spectral_radius(g) == pytest.approx(math.sqrt(leaves), abs=1e-8)


def test_lambda1_disconnected():
    # K4 plus a disjoint edge
    edges = list(itertools.combinations(range(4), 2)) + [(4, 5)]
    assert spectral_radius(build_graph(edges, 6)) == pytest.approx(3, abs=1e-9)


def test_not_converged_carries_estimate():
    with pytest.raises(NotConvergedError) as info:
        spectral_radius(generate_gnp(60, 0.1, seed=2), tolerance=1e-15, max_iterations=4)
    assert info.value.estimate > 0


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 40), p=st.floats(0.05, 0.9), seed=st.integers(0, 10**6))
def test_sandwich_and_dense_agreement(n, p, seed):
    g = generate_gnp(n, p, seed=seed)
    m = compute_metrics(g)
    m.check()
    assert m.lambda1 == pytest.approx(dense_lambda1(g), abs=1e-6)


# --- isoperimetric constant ---------------------------------------------------

def test_eta_known_values():
    assert isoperimetric_constant(generate_complete(6), 3) == (3.0, True)
    assert isoperimetric_constant(generate_cycle(10), 4)[0] == pytest.approx(0.5)
    assert isoperimetric_constant(generate_star(5), 3)[0] == pytest.approx(1.0)


def test_eta_oracle_agrees_on_known_families():
    for n in range(3, 10):
        for m in range(1, n):
            assert brute_eta(generate_complete(n), m) == n - m
            assert brute_eta(generate_cycle(n), m) == pytest.approx(2 / m)


def test_eta_exact_cap():
    with pytest.raises(ValueError, match="sampled"):
        isoperimetric_constant(generate_cycle(EXHAUSTIVE_CAP + 1), 3)
    with pytest.raises(ValueError):
        isoperimetric_constant(generate_cycle(5), 5)


def test_eta_disconnected_is_zero():
    g = build_graph([(0, 1), (2, 3)], 4)
    assert isoperimetric_constant(g, 2)[0] == 0.0


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 12), p=st.floats(0.1, 1.0), seed=st.integers(0, 10**6), data=st.data())
def test_eta_exact_matches_enumeration_and_bounds_sampled(n, p, seed, data):
    g = generate_gnp(n, p, seed=seed)
    m = data.draw(st.integers(1, n - 1))
    exact, flag = isoperimetric_constant(g, m)
    assert flag
    assert exact == pytest.approx(brute_eta(g, m))
    sampled, flag = isoperimetric_constant(g, m, mode="sampled", trials=20, seed=seed)
    assert not flag
    assert sampled >= exact - 1e-12


def test_eta_at_cap_runs():
    value, exact = isoperimetric_constant(generate_complete(EXHAUSTIVE_CAP), 10)
    assert exact and value == EXHAUSTIVE_CAP - 10


# --- exchange format ----------------------------------------------------------

def test_edge_list_round_trip(tmp_path):
    g = generate_gnp(30, 0.2, seed=9)
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    assert path.read_text().splitlines()[0] == "n 30"
    assert read_edge_list(path) == g


def test_edge_list_tolerates_duplicates(tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("n 3\n0 1\n1 0\n1 2\n")
    assert read_edge_list(path).edge_count == 2


def test_generator_spec():
    assert parse_generator_spec("star:leaves=4") == generate_star(4)
    assert parse_generator_spec("gnp:n=20,p=0.2,seed=3") == generate_gnp(20, 0.2, seed=3)
    with pytest.raises(ValueError):
        parse_generator_spec("nonsense:n=3")
