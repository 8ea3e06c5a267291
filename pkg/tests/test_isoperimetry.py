import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from concurv import ConcurvError
from concurv.isoperimetry import (
    VertexSet,
    ball,
    caterpillar_counterexample,
    caterpillar_levels,
    caterpillar_psi,
    iso_function,
    level_set,
    tripod_examples,
    tripod_star_psi,
)
from concurv.lipschitz import ScalarField, enumerate_extremal_fields, max_variance, variance
from concurv.metric import caterpillar, cycle, graph_space, path, product, tripod

from oracles import bfs_matrix


@st.composite
def graph_and_set(draw, max_n=8):
    n = draw(st.integers(2, max_n))
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    S = draw(st.sets(st.integers(0, n - 1), min_size=1))
    d = draw(st.integers(0, 3))
    return n, sorted(edges), S, d


@settings(max_examples=60, deadline=None)
@given(graph_and_set())
def test_ball_matches_bfs(data):
    n, edges, S, d = data
    sp = graph_space(edges, n)
    D = bfs_matrix(n, edges)
    want = {u for u in range(n) if min(D[s][u] for s in S) <= d}
    assert set(ball(VertexSet.from_indices(sp, S), d).indices()) == want


@settings(max_examples=30, deadline=None)
@given(graph_and_set())
def test_ball_composition_and_monotonicity(data):
    n, edges, S, d = data
    sp = graph_space(edges, n)
    A = VertexSet.from_indices(sp, S)
    assert A <= ball(A, d)
    assert ball(ball(A, 1), d) == ball(A, d + 1)


@settings(max_examples=30, deadline=None)
@given(graph_and_set(max_n=7))
def test_iso_function_matches_exhaustive_subsets(data):
    n, edges, _, d = data
    sp = graph_space(edges, n)
    D = bfs_matrix(n, edges)
    best = n
    for size in range(math.ceil(n / 2), n + 1):
        for S in itertools.combinations(range(n), size):
            best = min(best, sum(1 for u in range(n) if min(D[s][u] for s in S) <= d))
    got, witness = iso_function(sp, d)
    assert got == best
    assert len(witness) >= n / 2
    assert len(ball(witness, d)) == got


def test_iso_function_small_cases():
    assert iso_function(path(4), 1)[0] == 3
    assert iso_function(cycle(4), 1)[0] == 4


def test_ball_errors():
    sp = path(3)
    with pytest.raises(ConcurvError):
        ball(VertexSet.from_indices(sp, []), 1)
    with pytest.raises(ConcurvError):
        ball(VertexSet.from_indices(sp, [0]), -1)


def test_level_set_on_power():
    f = ScalarField(path(2), (0, 1))
    S = level_set(f, 1, n=2)
    assert len(S) == 3
    assert S.space.n == 4


def test_level_set_power_matches_direct_sums():
    f = ScalarField(path(3), (0, 1, 2))
    power = product([path(3)] * 3, "l1")
    S = level_set(f, 3, n=3, power=power)
    want = {i for i, p in enumerate(power.points) if sum(p) <= 3}
    assert set(S.indices()) == want


def test_caterpillar_levelling():
    X, Y = caterpillar_levels(2)
    sp = caterpillar(2)
    fx = ScalarField.from_mapping(sp, X)
    assert variance(fx) == max_variance(sp)[0]
    psi = caterpillar_psi(2)
    assert sorted(psi) == sorted(psi.values())  # bijection
    # Y is X transported along psi
    assert all(Y[psi[v]] == X[v] for v in X)


def test_caterpillar_counterexample_report():
    rep = caterpillar_counterexample(2, 1)
    assert rep["X_lipschitz"] and rep["X_variance_optimal"]
    assert not rep["Y_lipschitz"]
    assert rep["containment_above_median"]
    # containment below the median fails; recorded honestly
    assert not rep["containment_all"]
    assert rep["c2"] == Fraction(11, 4)


def test_tree_variance_two_routes():
    # tree dynamic program versus generic extremal enumeration
    sp = tripod(2)
    best = max(variance(f) for f in enumerate_extremal_fields(sp))
    assert max_variance(sp)[0] == best


@pytest.mark.parametrize("k", [2, 3])
def test_tripod_plain(k):
    rep = tripod_examples(k)
    assert rep["median_zero_mean_positive"]
    assert rep["psi_maps_level_set"]
    assert rep["containment"]
    assert rep["X_variance_optimal"]


def test_tripod_star():
    rep = tripod_examples(5, "star")
    assert rep["sizes_equal"] and rep["psi_maps_level_set"] and rep["containment"]
    assert rep["X_lipschitz"] and rep["X_variance_optimal"]
    psi = tripod_star_psi(5)
    assert sorted(psi) == sorted(psi.values())


def test_tripod_star_needs_odd_k():
    with pytest.raises(ConcurvError):
        tripod_examples(4, "star")
