from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concurv import ConcurvError
from concurv.geodesics import (
    enumerate_geodesics,
    exact_midpoint_law,
    mc_teleport_walk,
    path_weight,
    power_law_graph,
    walk_stationary,
)
from concurv.metric import complete, cycle, graph_space, hypercube, path, petersen


def nx_law(space, variant, c=Fraction(1)):
    """Midpoint law from networkx geodesic enumeration with weights written out directly."""
    G = nx.Graph(list(space.graph.edges))
    G.add_nodes_from(range(space.n))
    deg = dict(G.degree())
    mass = [Fraction(0)] * space.n
    for x in G:
        for y in G:
            if x == y:
                continue
            for p in nx.all_shortest_paths(G, x, y):
                L = len(p) - 1
                if L % 2:
                    continue
                if variant == 1:
                    w = Fraction(1)
                    for u in p[1:-1]:
                        w /= deg[u]
                else:
                    w = Fraction(deg[x] + deg[y])
                    for u in p:
                        w /= deg[u] + 1
                mass[p[L // 2]] += w * c**L
    tot = sum(mass)
    return [m / tot for m in mass]


@st.composite
def small_connected(draw, max_n=7):
    n = draw(st.integers(3, max_n))
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return graph_space(sorted(edges), n)


@settings(max_examples=30, deadline=None)
@given(small_connected(), st.sampled_from([1, 2]), st.sampled_from([Fraction(1), Fraction(1, 2)]))
def test_exact_law_matches_path_enumeration(space, variant, c):
    rep = exact_midpoint_law(space, variant, c)
    want_nonzero = any(int(d) % 2 == 0 and d > 0 for d in space.dist.ravel())
    if not want_nonzero:
        assert rep["law"] is None
        return
    assert rep["law"] == nx_law(space, variant, c)
    assert sum(rep["law"]) == 1


def test_path_weights():
    sp = path(4)
    assert path_weight(sp, (0, 1, 2, 3), 1) == Fraction(1, 4)
    assert path_weight(sp, (0, 1, 2, 3), 2) == Fraction(2, 2 * 3 * 3 * 2)
    with pytest.raises(ConcurvError):
        path_weight(sp, (0, 1), 3)


def test_enumerate_geodesics_count():
    geos = enumerate_geodesics(hypercube(3), 0, 7)
    assert len(geos) == 6
    assert all(g.weight == Fraction(1, 9) for g in geos)


@pytest.mark.parametrize("space", [cycle(6), petersen(), hypercube(3)])
@pytest.mark.parametrize("variant", [1, 2])
def test_vertex_transitive_law_is_uniform(space, variant):
    rep = exact_midpoint_law(space, variant)
    assert rep["proportional"]
    assert all(x == Fraction(1, space.n) for x in rep["law"])


def test_complete_graph_has_no_even_geodesics():
    rep = exact_midpoint_law(complete(4))
    assert rep["law"] is None and rep["excluded_mass"] == 1


def test_exact_law_cap():
    with pytest.raises(ConcurvError):
        exact_midpoint_law(path(10), cap=5)


def test_stationary_is_degree_proportional_for_variant1():
    sp = graph_space([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 4)
    pi = walk_stationary(sp, 1, 0.7)
    deg = np.array([sp.graph.degree(u) for u in range(4)], dtype=float)
    assert np.allclose(pi, deg / deg.sum())


def test_mc_walk_agrees_with_exact_law():
    rep = mc_teleport_walk(cycle(6), c=0.9, steps=200_000, seed=11)
    assert rep["accepted"] > 0
    assert rep["within_3sigma"]
    assert rep["occupancy_degree_proportional"]
    again = mc_teleport_walk(cycle(6), c=0.9, steps=200_000, seed=11)
    assert again["tally"] == rep["tally"]


def test_mc_walk_parameter_errors():
    with pytest.raises(ConcurvError):
        mc_teleport_walk(cycle(6), steps=10)
    with pytest.raises(ConcurvError):
        mc_teleport_walk(cycle(6), c=1.0, steps=200_000)


def test_power_law_graph_is_connected_and_seeded():
    a = power_law_graph(60, 2.5, seed=3)
    b = power_law_graph(60, 2.5, seed=3)
    assert a.n >= 30
    assert np.array_equal(a.dist, b.dist)
    assert nx.is_connected(nx.Graph(list(a.graph.edges)))
    with pytest.raises(ConcurvError):
        power_law_graph(60, 1.0)
