import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from concurv import ConcurvError
from concurv.hypercube import (
    C_R_atoms,
    C_R_size,
    bm_curvature,
    bm_scan,
    convex_closure,
    hypercube_dim,
    is_convex,
    is_interval,
    iterated_midpoint_counterexample,
    midpoints_hat,
    midpoints_hat_sets,
    midpoints_rho,
    midpoints_tilde,
    phi_injection_check,
    phi_tilde,
)
from concurv.metric import complete, cycle, hypercube, path, product

from oracles import cube_midpoints

D = 5
H = hypercube(D)
masks = st.integers(0, (1 << D) - 1)
rhos = st.sampled_from([Fraction(1, 2), Fraction(1, 3), Fraction(1, 4), Fraction(2, 5)])


def pop(x):
    return bin(x).count("1")


@settings(max_examples=80, deadline=None)
@given(masks, masks, rhos)
def test_midpoints_hat_matches_bitmask_scan(a, b, rho):
    assert set(midpoints_hat(H, a, b, rho)) == cube_midpoints(D, a, b, rho)


@settings(max_examples=60, deadline=None)
@given(masks, masks)
def test_midpoints_symmetric(a, b):
    assert midpoints_hat(H, a, b) == midpoints_hat(H, b, a)


@settings(max_examples=60, deadline=None)
@given(masks, masks, rhos)
def test_one_sided_midpoints(a, b, rho):
    dab = pop(a ^ b)
    got = midpoints_rho(H, a, b, rho)
    assert all(pop(a ^ u) == math.floor(rho * dab) and pop(u ^ b) == dab - pop(a ^ u) for u in got)
    assert len(got) == math.comb(dab, math.floor(rho * dab))


def test_midpoints_on_cycle():
    assert midpoints_hat(cycle(6), 0, 3) == [1, 2, 4, 5] or sorted(midpoints_hat(cycle(6), 0, 3)) == [1, 2, 4, 5]
    assert midpoints_hat(path(5), 0, 4) == [2]


def test_midpoints_tilde():
    assert midpoints_tilde(complete(2), 0, 1) == [(0, 1)]
    # even distance gives vertices
    assert sorted(midpoints_tilde(H, 0, 0b11)) == [0b01, 0b10]
    for u, v in midpoints_tilde(H, 0, 0b111):
        assert pop(u) == 1 and pop(v) == 2 and pop(u ^ v) == 1


@settings(max_examples=40, deadline=None)
@given(st.sets(masks, min_size=1, max_size=4), st.sets(masks, min_size=1, max_size=4))
def test_set_midpoints_are_union_over_pairs(S, T):
    want = set()
    for s in S:
        for t in T:
            want |= cube_midpoints(D, s, t)
    assert set(midpoints_hat_sets(H, sorted(S), sorted(T))) == want


def brute_closure(S):
    cur = set(S)
    while True:
        new = set(cur)
        for a in cur:
            for b in cur:
                new |= cube_midpoints(D, a, b)
        if new == cur:
            return cur
        cur = new


@settings(max_examples=30, deadline=None)
@given(st.sets(masks, min_size=1, max_size=4))
def test_closure_matches_fixed_point_and_interval(S):
    got = convex_closure(H, S)
    assert set(got) == brute_closure(S)
    assert is_interval(got)
    assert is_convex(H, got)


def test_convexity_examples():
    assert is_convex(H, [0])
    assert not is_convex(H, [0, 0b11])
    assert is_interval([0, 1, 2, 3])
    assert not is_interval([0, 3])


def test_closure_empty():
    with pytest.raises(ConcurvError):
        convex_closure(H, [])


def test_hypercube_dim():
    assert hypercube_dim(H) == D
    assert hypercube_dim(cycle(4)) is None


def test_bm_curvature_formula():
    S, T = [0, 1], [0b11100, 0b11110]
    est = bm_curvature(H, S, T)
    count = len(set().union(*(cube_midpoints(D, s, t) for s in S for t in T)))
    ds = min(pop(s ^ t) for s in S for t in T)
    assert est.d_star == ds and est.midpoint_count == count
    assert est.K_hat == pytest.approx(8 * math.log(count / 2) / ds**2)
    assert bm_curvature(H, [0], [0]).K_hat is None


def test_bm_scan_reproducible_and_positive():
    a = bm_scan(H, 150, seed=4)
    b = bm_scan(H, 150, seed=4)
    assert a == b
    assert a["holds"] and a["min_K_hat"] >= a["threshold"]


def test_phi_injection_on_hypercube_and_product():
    assert phi_injection_check(H, [0, 1], [0b11110, 0b11111])["holds"]
    sp = product([complete(3)] * 3, "l0")
    assert phi_injection_check(sp, [0, 1], [26, 25])["holds"]


@pytest.mark.parametrize("R", range(0, 8))
def test_C_R_size(R):
    atoms = C_R_atoms(R)
    assert len(atoms) == C_R_size(R)
    assert len(set(atoms)) == len(atoms)
    if R % 2 == 0:
        assert len(atoms) == math.comb(R, R // 2)


def test_C_3_size():
    assert C_R_size(3) == 6


@pytest.mark.parametrize("R", [2, 3, 4, 5])
def test_phi_tilde_is_injective_on_atoms(R):
    a, b = 0, (1 << R) - 1
    images = [phi_tilde(a, b, c, R) for c in C_R_atoms(R)]
    assert len(set(images)) == len(images)


def test_iterated_midpoint_counterexample():
    rep = iterated_midpoint_counterexample()
    assert rep["A_convex"] and rep["B_convex"]
    assert rep["zeta_in_iterated"] and not rep["zeta_in_quarter"]
    assert rep["iterated_strictly_contains_quarter"]
