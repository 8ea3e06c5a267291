import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concurv import ConcurvError
from concurv.concentration import (
    adversarial_level_search,
    edge_count,
    empirical_tail,
    expander_midpoints,
    level_set_bounds,
    level_sigma_bound,
    level_space,
    linear_far_check,
    median_chain,
    mixing_lemma,
    mixing_scan,
    normalized_spectrum,
    permutation_variance,
    permutation_variance_corrected,
    permutation_variance_formula,
    sigma2_complete,
    sigma2_Jn,
    sn_bounds_report,
    spectral_lambdas,
    tail_bound,
    tail_check,
)
from concurv.lipschitz import ScalarField, max_variance, subgaussian_constant
from concurv.metric import complete, cycle, hypercube, path, petersen

from oracles import perm_variance

values = st.lists(st.integers(-6, 6), min_size=2, max_size=9)


def test_tail_bound_closed_forms():
    assert tail_bound(1.0, 2.0).value == pytest.approx(math.exp(-2))
    assert tail_bound(4.0, 4.0, "skewed").value == pytest.approx(math.exp(-0.5))
    assert tail_bound(None, 2.0, "level-set", k=3, r=2).value == pytest.approx(math.exp(-4 / 24))
    assert tail_bound(1.0, 0.0).value == 1.0


def test_tail_bound_domain_errors():
    with pytest.raises(ConcurvError):
        tail_bound(1.0, -1.0)
    with pytest.raises(ConcurvError):
        tail_bound(4.0, 1.0, "skewed")
    with pytest.raises(ConcurvError):
        tail_bound(0.0, 1.0)
    with pytest.raises(ConcurvError):
        tail_bound(1.0, 1.0, "bogus")
    with pytest.raises(ConcurvError):
        tail_bound(None, 1.0, "linear-far", n=12, R=3, c=1.5, k=2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 10), st.floats(0, 20), st.floats(0, 20))
def test_plain_bound_decreasing_in_h(s2, h1, h2):
    lo, hi = sorted((h1, h2))
    assert tail_bound(s2, hi).value <= tail_bound(s2, lo).value


@settings(max_examples=50, deadline=None)
@given(values)
def test_median_chain_holds_for_any_field(vals):
    assert median_chain(ScalarField(path(len(vals)), tuple(vals)))["holds"]


@settings(max_examples=50, deadline=None)
@given(values, st.integers(0, 6))
def test_empirical_tail_counts(vals, h):
    f = ScalarField(path(len(vals)), tuple(vals))
    mean = Fraction(sum(vals), len(vals))
    assert empirical_tail(f, h) == Fraction(sum(1 for v in vals if v - mean >= h), len(vals))


@pytest.mark.parametrize("space", [path(5), cycle(6), hypercube(3)])
def test_tail_check_on_optimal_fields(space):
    c2, fields = max_variance(space)
    s2 = subgaussian_constant(space).sigma2
    assert tail_check(fields[0], s2, [0, 1, 2, 3])["holds"]


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_permutation_variance_matches_enumeration(n):
    exact, _ = permutation_variance(n)
    assert exact == perm_variance(n)
    assert exact > Fraction(n, 4)


@pytest.mark.parametrize("n", [3, 5, 7])
def test_corrected_odd_formula(n):
    exact, _ = permutation_variance(n)
    assert exact == permutation_variance_corrected(n)
    assert exact == Fraction((n - 1) * (n + 1) ** 2, 4 * n * n)


def test_paper_formula_disagrees_with_enumeration_at_n5():
    # recorded discrepancy: the closed form undercounts the covariance terms
    exact, formula = permutation_variance(5)
    assert exact == Fraction(36, 25)
    assert formula == Fraction(33, 25)
    assert permutation_variance_formula(4) is None


def test_permutation_cap():
    with pytest.raises(ConcurvError):
        permutation_variance(9, cap=8)


def test_sigma2_complete_two_routes():
    assert sigma2_complete(2) == pytest.approx(0.25)
    assert sigma2_complete(4) == pytest.approx(0.25)
    assert sigma2_complete(3) == pytest.approx(1 / (6 * math.log(2)))
    for m in (3, 5):
        grid = subgaussian_constant(complete(m), tmin=1e-3, tmax=20, tpoints=4000).sigma2
        assert grid == pytest.approx(sigma2_complete(m), rel=1e-4)


def test_sigma2_Jn_small():
    assert sigma2_Jn(2) == pytest.approx(0.25)
    assert sigma2_Jn(3) == pytest.approx((2 - (1 - 2 / (3 * math.log(2)))) / 4)


def test_sn_report_small():
    rep = sn_bounds_report(4)
    assert rep["lower_holds"] and rep["upper_holds"]


def test_level_space_and_bound():
    sp = level_space(4, 2)
    assert sp.n == 4 + 4
    assert level_sigma_bound(4, 2) == 4
    with pytest.raises(ConcurvError):
        level_space(4, 1)
    with pytest.raises(ConcurvError):
        level_sigma_bound(2, 0)


def test_level_set_bounds_small():
    rep = level_set_bounds(4, 0, k=2, t=1.0)
    assert rep["below_bound"]
    assert rep["grid_sigma2"] < float(rep["sigma2_bound"])


def test_adversarial_level_search():
    assert adversarial_level_search(3, 1)["holds"]


def test_linear_far_check_and_domain():
    assert linear_far_check(12, 3, 10, [5, 6, 7], [1, 2, 3])["holds"]
    with pytest.raises(ConcurvError):
        linear_far_check(12, 3, 1.5, [6], [1])


def test_normalized_spectrum_matches_networkx():
    sp = petersen()
    G = nx.Graph(list(sp.graph.edges))
    lap = np.sort(nx.normalized_laplacian_spectrum(G))
    assert np.allclose(normalized_spectrum(sp), np.sort(1 - lap)[::-1])
    lam = spectral_lambdas(sp)
    assert lam["lambda2"] == pytest.approx(1 / 3)
    assert lam["lambda_abs"] == pytest.approx(2 / 3)


@settings(max_examples=40, deadline=None)
@given(st.sets(st.integers(0, 9), min_size=1), st.sets(st.integers(0, 9), min_size=1))
def test_mixing_lemma_on_petersen(X, Y):
    sp = petersen()
    Xa = np.isin(np.arange(10), sorted(X))
    Ya = np.isin(np.arange(10), sorted(Y))
    A = nx.to_numpy_array(nx.Graph(list(sp.graph.edges)), nodelist=range(10))
    assert edge_count(sp, Xa, Ya) == int(A[np.ix_(sorted(X), sorted(Y))].sum())
    assert mixing_lemma(sp, Xa, Ya)["holds"]


def test_mixing_scan_and_expander_midpoints():
    assert mixing_scan(petersen(), pairs=200, seed=1)["holds"]
    rep = expander_midpoints(petersen(), [0, 1], [5, 7])
    assert rep["degree"] == 3 and rep["mixing"]["holds"]
