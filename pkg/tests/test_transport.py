import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concurv import ConcurvError
from concurv.hypercube import C_R_size
from concurv.metric import complete, cycle, graph_space, hypercube, path, petersen
from concurv.transport import (
    Distribution,
    acyclic_optimal_transport,
    basic_optimal_plans,
    convexity_check,
    diagonal_plan,
    entropy,
    everybody_is_large_check,
    forest_bound_holds,
    interpolate,
    is_cyclically_monotone,
    is_forest,
    ln_CR_linear_bound,
    max_entropy_optimal_plan,
    optimal_plan,
    partition,
    plan_from_matrix,
    plan_marginal,
    product_structure_check,
    recombine,
    strong_convexity_characterization,
    wasserstein,
    weak_curvature_bounds,
)

from oracles import entropy as oracle_entropy, lp_w2

SPACES = [hypercube(3), cycle(7), path(6), petersen()]


@st.composite
def measure_pairs(draw):
    sp = draw(st.sampled_from(SPACES))
    def measure():
        supp = sorted(draw(st.sets(st.integers(0, sp.n - 1), min_size=1, max_size=5)))
        w = [draw(st.integers(1, 5)) for _ in supp]
        tot = sum(w)
        return Distribution(sp, {x: Fraction(m, tot) for x, m in zip(supp, w)})
    return sp, measure(), measure()


@settings(max_examples=50, deadline=None)
@given(measure_pairs())
def test_w2_matches_linear_program(data):
    sp, a, b = data
    w2, plan = wasserstein(a, b)
    assert isinstance(w2, Fraction)
    want = lp_w2(sp.dist.astype(int), list(a.mass), list(a.mass.values()), list(b.mass), list(b.mass.values()))
    assert float(w2) == pytest.approx(want, abs=1e-9)
    assert plan.marginals_exact()


@settings(max_examples=30, deadline=None)
@given(measure_pairs())
def test_w1_matches_linear_program(data):
    sp, a, b = data
    D1 = np.sqrt(sp.dist.astype(float))  # squared inside the oracle gives d
    w1, _ = wasserstein(a, b, order=1)
    want = lp_w2(D1, list(a.mass), list(a.mass.values()), list(b.mass), list(b.mass.values()))
    assert float(w1) == pytest.approx(want, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(measure_pairs())
def test_optimal_plan_is_cyclically_monotone(data):
    _, a, b = data
    ok, cycle_found = is_cyclically_monotone(optimal_plan(a, b), cap=4)
    assert ok and cycle_found is None


@settings(max_examples=30, deadline=None)
@given(measure_pairs())
def test_acyclic_plan_is_forest_with_same_cost(data):
    _, a, b = data
    plan = acyclic_optimal_transport(a, b)
    assert is_forest(plan) and forest_bound_holds(plan)
    assert plan.marginals_exact()
    assert plan.cost(2) == wasserstein(a, b)[0]


@settings(max_examples=25, deadline=None)
@given(measure_pairs())
def test_max_entropy_plan(data):
    _, a, b = data
    me = max_entropy_optimal_plan(a, b)
    w2 = wasserstein(a, b)[0]
    # IPF stops at marginal residual 1e-10; cost error scales with the duals
    assert me.marginal_residual() < 1e-9
    assert float(me.cost(2)) == pytest.approx(float(w2), abs=1e-7)
    plans, _ = basic_optimal_plans(a, b, cap=6)
    for p in plans:
        assert p.cost(2) == w2
        assert me.entropy() >= p.entropy() - 1e-9
    assert product_structure_check(me, tol=1e-6)["holds"]


@settings(max_examples=30, deadline=None)
@given(measure_pairs(), st.sampled_from([Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(1)]))
def test_interpolation_endpoints_and_mass(data, t):
    _, a, b = data
    plan = optimal_plan(a, b)
    mu = interpolate(plan, t)
    assert mu.total() == 1
    if t == 0:
        assert mu.mass == a.mass
    if t == 1:
        assert mu.mass == b.mass


@settings(max_examples=30, deadline=None)
@given(measure_pairs())
def test_partition_recombines(data):
    _, a, b = data
    plan = optimal_plan(a, b)
    parts = partition(plan)
    assert sum(parts.eta) == 1
    assert np.array_equal(recombine(plan, parts), plan.tau)


def test_entropy_matches_oracle_and_point_mass():
    sp = cycle(5)
    d = Distribution(sp, {0: Fraction(1, 2), 1: Fraction(1, 3), 2: Fraction(1, 6)})
    assert entropy(d) == pytest.approx(oracle_entropy([1 / 2, 1 / 3, 1 / 6]))
    pt = entropy(Distribution.point(sp, 0))
    assert pt == 0.0 and math.copysign(1, pt) == 1


def test_distribution_validation():
    sp = cycle(5)
    with pytest.raises(ConcurvError):
        Distribution(sp, {0: Fraction(1, 2)})
    with pytest.raises(ConcurvError):
        Distribution(sp, {0: Fraction(3, 2), 1: Fraction(-1, 2)})


def test_plan_from_matrix_validates_marginals():
    sp = path(3)
    a = Distribution.uniform(sp, [0, 1])
    b = Distribution.uniform(sp, [1, 2])
    tau = np.array([[Fraction(1, 2), Fraction(0)], [Fraction(0), Fraction(1, 2)]], dtype=object)
    p = plan_from_matrix(a, b, tau)
    assert p.cost(2) == 1
    bad = np.array([[Fraction(1, 2), Fraction(1, 2)], [Fraction(0), Fraction(0)]], dtype=object)
    with pytest.raises(ConcurvError):
        plan_from_matrix(a, b, bad)


def test_two_point_shift_on_path():
    sp = path(4)
    a = Distribution.uniform(sp, [0, 1])
    b = Distribution.uniform(sp, [2, 3])
    w2, plan = wasserstein(a, b)
    assert w2 == 4
    # the two pairs have disjoint midpoints, so the plan splits
    assert partition(plan).eta == [Fraction(1, 2), Fraction(1, 2)]
    with pytest.raises(ConcurvError):
        everybody_is_large_check(plan)
    mid = interpolate(plan, Fraction(1, 2))
    assert mid.mass == {1: Fraction(1, 2), 2: Fraction(1, 2)}


def test_everybody_is_large_on_connected_plan():
    sp = hypercube(3)
    a = Distribution.point(sp, 0)
    b = Distribution.uniform(sp, [3, 5, 6])
    plan = optimal_plan(a, b)
    rep = everybody_is_large_check(plan)
    assert rep["holds"] and rep["D"] == 2 and rep["W2"] == 4


def test_large_instance_uses_lp_route():
    sp = hypercube(7)
    rng = np.random.default_rng(0)
    A = rng.choice(sp.n, 70, replace=False).tolist()
    B = rng.choice(sp.n, 70, replace=False).tolist()
    a = Distribution.uniform(sp, A)
    b = Distribution.uniform(sp, B)
    w2, plan = wasserstein(a, b)
    want = lp_w2(sp.dist.astype(int), A, [1 / 70] * 70, B, [1 / 70] * 70)
    assert float(w2) == pytest.approx(want, abs=1e-7)


def test_negative_curvature_instance_violates_strong_flavor():
    from concurv.acceptance import negative_curvature_instance

    a, b, _ = negative_curvature_instance()
    rep = convexity_check(a, b, flavor="sos")
    assert not rep["holds"] and rep["min_slack"] < 0


def test_weak_flavor_on_hypercube():
    sp = hypercube(4)
    a = Distribution.uniform(sp, [0, 1, 2])
    b = Distribution.uniform(sp, [15, 14])
    assert convexity_check(a, b, flavor="weak")["plans_examined"] == 1
    with pytest.raises(ConcurvError):
        convexity_check(a, b, flavor="nope")


def test_weak_curvature_bounds_on_hypercube():
    sp = hypercube(4)
    a = Distribution.uniform(sp, [0, 1])
    b = Distribution.uniform(sp, [0b1110, 0b1111])
    rep = weak_curvature_bounds(a, b)
    assert rep["weak_holds"]
    for comp in rep["components"]:
        assert comp["C_R"] == C_R_size(comp["R"])
    with pytest.raises(ConcurvError):
        weak_curvature_bounds(Distribution.point(cycle(5), 0), Distribution.point(cycle(5), 2))


def test_ln_CR_bound():
    assert ln_CR_linear_bound(60)["holds"]


@pytest.mark.parametrize(
    "space,family",
    [(cycle(6), "cycle"), (path(5), "path"), (complete(4), "complete"), (graph_space([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 4), "complete-minus-edge")],
)
def test_strong_families_have_no_obstruction(space, family):
    rep = strong_convexity_characterization(space)
    assert rep["family"] == family and rep["agree"] and rep["obstruction_free"]


def test_obstruction_witness_on_star():
    star = graph_space([(0, 1), (0, 2), (0, 3)], 4)
    rep = strong_convexity_characterization(star)
    assert rep["agree"] and not rep["obstruction_free"]
    w = rep["witness"]
    assert w["found"] and w["slack"] < 0


def test_diagonal_plan_and_marginal():
    sp = cycle(6)
    a = Distribution.uniform(sp, [0, 1])
    b = Distribution.uniform(sp, [3, 4])
    plan = diagonal_plan(a, b, [(0, 3), (1, 4)])
    assert plan_marginal(plan, "a").mass == a.mass
    assert plan.cost(2) == 9
