import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concurv import ConcurvError
from concurv.lipschitz import (
    ScalarField,
    enumerate_extremal_fields,
    geometric_grid,
    is_distance_function,
    is_lipschitz,
    log_moment,
    log_moment_envelope,
    max_variance,
    odd_cycle_optimality,
    root_search,
    six_vertex_example,
    structure_checks,
    subgaussian_constant,
    tree_conjecture_search,
    variance,
)
from concurv.metric import complete, cycle, graph_space, hypercube, path

from oracles import brute_max_variance


@st.composite
def small_graphs(draw, max_n=5):
    n = draw(st.integers(2, max_n))
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return n, sorted(edges)


def direct_log_moment(values, t):
    m = sum(values) / len(values)
    return math.log(sum(math.exp(t * (v - m)) for v in values) / len(values))


def test_is_lipschitz_reports_violating_pair():
    sp = path(3)
    ok, pair = is_lipschitz(ScalarField(sp, (0, 2, 2)))
    assert not ok and set(pair) == {0, 1}
    assert is_lipschitz(ScalarField(sp, (0, 1, 0)))[0]
    assert is_lipschitz(ScalarField(sp, (0, 2, 4)), L=2)[0]


def test_field_length_is_checked():
    with pytest.raises(ConcurvError):
        ScalarField(path(3), (0, 1))


def test_exact_variance():
    assert variance(ScalarField(path(3), (0, 1, 2))) == Fraction(2, 3)
    assert variance(ScalarField(complete(2), (0, 1))) == Fraction(1, 4)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=2, max_size=8), st.floats(0.01, 10))
def test_log_moment_matches_direct_sum(vals, t):
    sp = path(len(vals))
    got = log_moment(ScalarField(sp, tuple(vals)), t)
    assert got == pytest.approx(direct_log_moment(vals, t), rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-5, 5), min_size=2, max_size=8), st.floats(0.01, 5))
def test_log_moment_nonnegative(vals, t):
    # Jensen: E exp(t(f - Ef)) >= 1
    assert log_moment(ScalarField(path(len(vals)), tuple(vals)), t) >= -1e-12


def test_p3_extremal_fields():
    got = sorted(f.values for f in enumerate_extremal_fields(path(3)))
    assert got == [(0, -1, -2), (0, -1, 0), (0, 1, 0), (0, 1, 2)]


def test_c5_extremal_count_and_max_variance():
    assert len(enumerate_extremal_fields(cycle(5))) == 30
    c2, wit = max_variance(cycle(5))
    assert c2 == Fraction(14, 25)
    assert len(wit) == 10


@settings(max_examples=25, deadline=None)
@given(small_graphs())
def test_max_variance_matches_brute_force(data):
    n, edges = data
    sp = graph_space(edges, n)
    c2, witnesses = max_variance(sp)
    assert c2 == brute_max_variance(sp.dist.astype(int).tolist())
    for w in witnesses:
        assert is_lipschitz(w)[0]
        assert variance(w) == c2


@settings(max_examples=25, deadline=None)
@given(small_graphs())
def test_extremal_fields_are_lipschitz_and_anchored(data):
    n, edges = data
    sp = graph_space(edges, n)
    for f in enumerate_extremal_fields(sp):
        assert f.values[0] == 0
        assert is_lipschitz(f)[0]


def test_hypercube_max_variance():
    # coordinate sums: variance d/4
    assert max_variance(hypercube(3))[0] == Fraction(3, 4)


def test_envelope_dominates_each_field():
    sp = cycle(5)
    grid = geometric_grid(0.1, 5, 20)
    curve = log_moment_envelope(sp, grid)
    for f in enumerate_extremal_fields(sp):
        for t, L in zip(grid, curve.values):
            assert log_moment(f, float(t)) <= L + 1e-12


def test_envelope_rejects_nonpositive_grid():
    with pytest.raises(ConcurvError):
        log_moment_envelope(path(3), np.array([0.0, 1.0]))


def test_subgaussian_constant_of_edge():
    # two-point space: L(t) = ln cosh(t/2), sup of 2L/t^2 is the t -> 0 limit 1/4
    est = subgaussian_constant(complete(2))
    assert est.sigma2_grid_sup == pytest.approx(0.25)
    assert est.sigma2_lower <= est.sigma2_grid_sup
    assert est.exhaustive


def test_subgaussian_constant_path3():
    est = subgaussian_constant(path(3))
    assert est.limit_variance == Fraction(2, 3)
    assert est.sigma2 == pytest.approx(2 / 3)


def test_structure_of_optimal_path_field():
    f = max_variance(path(4))[1][0]
    rep = structure_checks(f)
    assert rep.unimodal_hairs and rep.origin_structure and rep.origin_below_mean and rep.descent


def test_is_distance_function():
    sp = cycle(5)
    assert is_distance_function(ScalarField(sp, tuple(int(x) for x in sp.dist[2])))
    assert not is_distance_function(ScalarField(sp, (0, 1, 0, 1, 0)))


@pytest.mark.parametrize("n", [3, 5, 7])
def test_odd_cycle_witnesses_are_distance_functions(n):
    assert odd_cycle_optimality(n, geometric_grid(0.01, 20, 60))["holds"]


def test_odd_cycle_range():
    with pytest.raises(ConcurvError):
        odd_cycle_optimality(13)


def test_tree_search_and_roots():
    rep = tree_conjecture_search(20, 7, seed=3)
    assert rep["holds"] and rep["trials"] == 20
    res = root_search(path(4))
    assert res["c2"] == Fraction(5, 4) and res["holds"]


def test_six_vertex_example():
    rep = six_vertex_example()
    assert rep["variance_X1"] == Fraction(19, 12)
    assert rep["variance_X2"] == Fraction(41, 36)
    assert rep["x1_variance_optimal"]
    x1 = [1, 2, 3, 4, 1, 4]
    x2 = [1, 2, 3, 4, 1, 2]
    for row in rep["rows"]:
        assert row["L_X1"] == pytest.approx(direct_log_moment(x1, row["t"]), rel=1e-12)
        assert row["L_X2"] == pytest.approx(direct_log_moment(x2, row["t"]), rel=1e-12)
        assert row["margin"] > 0
    assert rep["holds"]
