"""Tail bounds, permutation and level-set concentration, and the expander midpoint estimate."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConcurvError
from .hypercube import d_star, midpoints_hat_sets
from .lipschitz import ScalarField, subgaussian_constant
from .metric import FiniteMetricSpace, boolean_levels, symmetric_group

TAIL_VARIANTS = ("plain", "skewed", "level-set", "linear-far")
PERM_EXHAUSTIVE_CAP = 8
LEVEL_SIGMA_CAP = 14
SN_SIGMA_CAP = 6
EXPANDER_CAP = 2000
EXACT_EIGEN_LIMIT = 500


@dataclass
class TailBound:
    variant: str
    sigma2: float
    h: float
    value: float
    params: dict[str, Any] = field(default_factory=dict)

    def __float__(self) -> float:
        return self.value


def tail_bound(sigma2: float | None, h: float, variant: str = "plain", **params: Any) -> TailBound:
    """Closed-form upper bounds on upper-tail probabilities.

    plain       ``exp(-h^2 / (2 sigma2))`` for ``h >= 0``.
    skewed      ``exp(-(h/sigma - 1)^2 / 2)`` for ``h >= sigma`` (tail above the median).
    level-set   ``exp(-h^2 / (8 sigma2))``, the fraction bound for sets at distance ``h``;
                ``sigma2`` defaults to ``k - 1 + r^2/4`` from ``k`` and ``r``.
    linear-far  ``exp((R+3) ln c - ln k - h^2 / (2(n-1)))`` with ``n, R, c, k``; its
                domain is checked and the value is capped at 1 (``raw`` keeps the formula).
    """
    h = float(h)
    if variant not in TAIL_VARIANTS:
        raise ConcurvError("bad-parameter", f"unknown variant {variant!r}")
    if h < 0:
        raise ConcurvError("bad-parameter", "h must be nonnegative")
    if variant == "level-set" and sigma2 is None:
        k, r = int(params["k"]), int(params.get("r", 0))
        sigma2 = k - 1 + r * r / 4
    if variant == "linear-far":
        n, R, c, k = (params[x] for x in ("n", "R", "c", "k"))
        _check_linear_far(n, R, c)
        sigma2 = n - 1
    if sigma2 is None or sigma2 <= 0:
        raise ConcurvError("bad-parameter", "sigma2 must be positive")
    sigma2 = float(sigma2)
    if variant == "plain":
        value = math.exp(-h * h / (2 * sigma2))
    elif variant == "skewed":
        sigma = math.sqrt(sigma2)
        if h < sigma:
            raise ConcurvError("bad-parameter", f"skewed bound needs h >= sigma = {sigma:.6g}")
        value = math.exp(-((h / sigma - 1) ** 2) / 2)
    elif variant == "level-set":
        value = math.exp(-h * h / (8 * sigma2))
    else:
        raw = (R + 3) * math.log(c) - math.log(k) - h * h / (2 * (n - 1))
        params = dict(params, raw=math.exp(raw))
        value = min(1.0, math.exp(raw))
    return TailBound(variant, sigma2, h, value, dict(params))


def _check_linear_far(n: int, R: float, c: float) -> None:
    if c < 2:
        raise ConcurvError("bad-parameter", "violated: c >= 2")
    if n < 3:
        raise ConcurvError("bad-parameter", "violated: n >= 3")
    hi = (c - 1) / (2 * (c + 1)) * n
    lo = math.sqrt(n * math.log(c / (c - 1)))
    if not lo < R < hi:
        raise ConcurvError("bad-parameter", f"violated: {hi:.6g} > R > {lo:.6g} (R = {R})")


# ---------------------------------------------------------------- empirical tails


def _as_fraction(x: Any) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, str) else Fraction(x)


def empirical_tail(f: ScalarField, h: Any) -> Fraction:
    """Exact ``P(f - E f >= h)`` under the uniform measure."""
    vals = [_as_fraction(v) for v in f.values]
    mean = sum(vals, Fraction(0)) / len(vals)
    h = _as_fraction(h)
    return Fraction(sum(1 for v in vals if v - mean >= h), len(vals))


def _lower_median(vals: Sequence[Fraction]) -> Fraction:
    s = sorted(vals)
    return s[(len(s) - 1) // 2]


def median_chain(f: ScalarField) -> dict[str, Any]:
    """``|E X - m X| <= E|X - m X| <= E|X - E X| <= sqrt(var X)`` for one field."""
    vals = [_as_fraction(v) for v in f.values]
    n = len(vals)
    mean = sum(vals, Fraction(0)) / n
    med = _lower_median(vals)
    a = abs(mean - med)
    b = sum((abs(v - med) for v in vals), Fraction(0)) / n
    c = sum((abs(v - mean) for v in vals), Fraction(0)) / n
    var = sum(((v - mean) ** 2 for v in vals), Fraction(0)) / n
    return {
        "mean_minus_median": a,
        "abs_dev_median": b,
        "abs_dev_mean": c,
        "sqrt_var": math.sqrt(var),
        "holds": a <= b <= c and c * c <= var,
    }


def tail_check(f: ScalarField, sigma2: float, hs: Iterable[Any]) -> dict[str, Any]:
    """Compare exact tails of ``f`` with the plain bound (and the skewed bound above the median)."""
    rows = []
    vals = [_as_fraction(v) for v in f.values]
    med = _lower_median(vals)
    sigma = math.sqrt(sigma2)
    ok = True
    for h in hs:
        emp = empirical_tail(f, h)
        bound = tail_bound(sigma2, float(h)).value
        row = {"h": h, "empirical": emp, "plain_bound": bound, "plain_holds": float(emp) <= bound + 1e-12}
        if float(h) >= sigma:
            above = Fraction(sum(1 for v in vals if v - med >= _as_fraction(h)), len(vals))
            sk = tail_bound(sigma2, float(h), "skewed").value
            row.update({"above_median": above, "skewed_bound": sk, "skewed_holds": float(above) <= sk + 1e-12})
            ok = ok and row["skewed_holds"]
        ok = ok and row["plain_holds"]
        rows.append(row)
    return {"rows": rows, "median_chain": median_chain(f), "holds": ok and median_chain(f)["holds"]}


# ---------------------------------------------------------------- permutations


def permutation_values(n: int) -> np.ndarray:
    """``X(pi) = sum_{i <= n/2} [pi(i) > n/2] + sum_{i > n/2} [pi(i) <= n/2]`` for every permutation of 1..n."""
    perms = np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int64).reshape(-1, n)
    big = 2 * perms > n
    k = n // 2
    return big[:, :k].sum(axis=1) + (~big[:, k:]).sum(axis=1)


def permutation_variance_formula(n: int) -> Fraction | None:
    """The odd-n closed form ``n/4 + ((n-1)^2 - 2) / (8 n^2)``; None for even n."""
    if n % 2 == 0:
        return None
    return Fraction(n, 4) + Fraction((n - 1) ** 2 - 2, 8 * n * n)


def permutation_variance_corrected(n: int) -> Fraction | None:
    """Odd-n variance when the covariance sum runs over ordered pairs: ``2k(k+1)^2/(2k+1)^2``."""
    if n % 2 == 0:
        return None
    k = n // 2
    return Fraction(2 * k * (k + 1) ** 2, (2 * k + 1) ** 2)


def permutation_variance(n: int, cap: int = PERM_EXHAUSTIVE_CAP) -> tuple[Fraction, Fraction | None]:
    """Exact variance of X over all ``n!`` permutations and the odd-n closed form."""
    if n < 1:
        raise ConcurvError("bad-parameter", "n >= 1")
    if n > cap:
        raise ConcurvError("too-large", f"n = {n} exceeds the exhaustive cap {cap}")
    x = permutation_values(n)
    N = len(x)
    s, q = int(x.sum()), int((x * x).sum())
    return Fraction(N * q - s * s, N * N), permutation_variance_formula(n)


# ---------------------------------------------------------------- structured candidates


def _check_candidates(space: FiniteMetricSpace, rows: list[np.ndarray]) -> np.ndarray:
    mat = np.unique(np.array(rows, dtype=np.int64), axis=0)
    D = space.dist.astype(np.int64)
    for row in mat:
        if (np.abs(row[:, None] - row[None, :]) > D).any():
            raise ConcurvError("internal", "candidate field is not 1-Lipschitz")
    return mat


def level_candidates(space: FiniteMetricSpace, n: int) -> np.ndarray:
    """Integer 1-Lipschitz fields on a family of subsets of {1..n} (Hamming metric).

    Signed coordinate sums ``|A ∩ S| - |A \\ S|`` and counts ``|A ∩ S|`` for
    prefix sets ``S``, and the distance to each point.
    """
    bits = np.array([[1 if (i + 1) in p else 0 for i in range(n)] for p in space.points], dtype=np.int64)
    rows = []
    for j in range(n + 1):
        inside = bits[:, :j].sum(axis=1)
        outside = bits[:, j:].sum(axis=1)
        rows.append(inside - outside)
        rows.append(inside)
    D = space.dist.astype(np.int64)
    step = max(1, space.n // 64)
    for p in range(0, space.n, step):
        rows.append(D[p])
    return _check_candidates(space, rows)


def permutation_candidates(space: FiniteMetricSpace, n: int) -> np.ndarray:
    """Integer 1-Lipschitz fields on ``S_n`` (points are tuples of 0..n-1)."""
    perms = np.array(space.points, dtype=np.int64).reshape(space.n, n) + 1
    big = 2 * perms > n
    k = n // 2
    rows = [
        big[:, :k].sum(axis=1) + (~big[:, k:]).sum(axis=1),  # X of the n/4 lower bound
        big[:, :k].sum(axis=1),  # its half-indicator sum
        (perms != np.arange(1, n + 1)).sum(axis=1),  # distance to the identity
    ]
    for j in range(1, n):
        rows.append((perms[:, :j] > n - j).sum(axis=1))
        rows.append((2 * perms[:, :j] > n).sum(axis=1))
    # the J_n extremal pattern |{i : 2 x_i > n + 1 - i}| read on the first n-1 entries
    rows.append((2 * perms[:, : n - 1] > (n + 1 - np.arange(1, n))).sum(axis=1))
    return _check_candidates(space, rows)


def grid_sigma2(space: FiniteMetricSpace, candidates: np.ndarray | None = None, exhaustive_cap: int = 8) -> dict[str, Any]:
    """Grid sigma^2: exhaustive enumeration when the space is small, structured candidates otherwise.

    Both are lower estimates on non-graph metrics (half-integer grid or
    restricted candidates); the mode says which one was used.
    """
    if space.n <= exhaustive_cap:
        est = subgaussian_constant(space, cap=exhaustive_cap)
        mode = "exhaustive" if est.exhaustive else "exhaustive-half-grid"
    else:
        if candidates is None:
            raise ConcurvError("too-large", "space too large for enumeration and no candidates given")
        est = subgaussian_constant(space, candidates=(candidates, 1))
        mode = "candidates"
    return {"sigma2": est.sigma2_grid_sup, "sigma2_lower": est.sigma2_lower, "mode": mode, "limit_variance": est.limit_variance}


# ---------------------------------------------------------------- level sets of the Boolean lattice


def level_space(n: int, r: int) -> FiniteMetricSpace:
    if n < 1 or r < 0 or r > n or (n - r) % 2:
        raise ConcurvError("bad-parameter", f"need 0 <= r <= n with n - r even (n={n}, r={r})")
    return boolean_levels(n, sorted({(n - r) // 2, (n + r) // 2}))


def level_sigma_bound(n: int, r: int) -> Fraction:
    """``n - 1 + r^2/4`` (strict upper bound on sigma^2 of the two-level space, n >= 3)."""
    if n < 3:
        raise ConcurvError("bad-parameter", "violated: n >= 3")
    return n - 1 + Fraction(r * r, 4)


def _far_sets(D: np.ndarray, members: np.ndarray, t: int) -> np.ndarray:
    return D[members].min(axis=0) >= t


def adversarial_level_search(k: int, r: int, exhaustive_limit: int = 16) -> dict[str, Any]:
    """Look for ``A, B`` in the two-level space with ``|A| <= |B|``, ``d(A, B) >= t`` and
    ``|A| > |C| exp(-t^2/(8k - 8 + 2r^2))``.

    For a fixed ``A`` the best ``B`` is everything at distance ``>= t``, so only
    ``A`` is searched: all subsets when the space has at most
    ``exhaustive_limit`` points, otherwise balls around points, coordinate
    threshold sets and their unions with level restrictions.
    """
    space = level_space(k, r)
    N = space.n
    D = space.dist.astype(np.int64)
    denom = 8 * k - 8 + 2 * r * r
    diam = int(D.max())
    worst = {"ratio": 0.0}
    violations = []
    checked = 0

    def consider(mask: np.ndarray) -> None:
        nonlocal checked
        a = int(mask.sum())
        if a == 0:
            return
        dist_to_a = D[mask].min(axis=0)
        for t in range(1, diam + 1):
            b = int((dist_to_a >= t).sum())
            if b < a:
                break
            checked += 1
            bound = N * math.exp(-t * t / denom)
            ratio = a / bound
            if ratio > worst["ratio"]:
                worst.update({"ratio": ratio, "A": a, "B": b, "t": t, "bound": bound})
            if a > bound + 1e-9:
                violations.append({"A": a, "t": t, "bound": bound})

    if N <= exhaustive_limit:
        mode = "exhaustive"
        for m in range(1, 1 << N):
            consider(np.array([(m >> i) & 1 for i in range(N)], dtype=bool))
    else:
        mode = "structured"
        bits = np.array([[1 if (i + 1) in p else 0 for i in range(k)] for p in space.points], dtype=np.int64)
        for p in range(N):
            for rad in range(diam + 1):
                consider(D[p] <= rad)
        for j in range(1, k + 1):
            cnt = bits[:, :j].sum(axis=1)
            for thr in range(j + 1):
                consider(cnt >= thr)
                consider(cnt <= thr)
    return {
        "k": k,
        "r": r,
        "points": N,
        "mode": mode,
        "pairs_checked": checked,
        "worst": worst,
        "violations": violations[:10],
        "holds": not violations,
    }


def linear_far_check(n: int, R: int, c: float, levels: Sequence[int], hs: Iterable[float], seed: int = 0) -> dict[str, Any]:
    """Tail of ``X_*`` restricted to a union of levels against the linearly-far bound.

    ``X_*`` is the distance to a random set of ``2^n/64`` points (a
    1-Lipschitz field); ``E X_*`` is taken on the full cube.
    """
    if n > 16:
        raise ConcurvError("too-large", "the full cube mean needs n <= 16")
    if any(abs(Fraction(n, 2) - r) > R for r in levels):
        raise ConcurvError("bad-parameter", "violated: |n/2 - r_i| <= R")
    _check_linear_far(n, R, c)
    rng = np.random.default_rng(seed)
    size = 1 << n
    idx = np.arange(size, dtype=np.int64)
    pop = np.array([bin(int(x)).count("1") for x in idx])
    target = rng.choice(size, size=max(1, size // 64), replace=False)
    # distance to a random set of points, by BFS over bit flips
    dist = np.full(size, -1, dtype=np.int64)
    dist[target] = 0
    frontier = target
    level = 0
    while frontier.size:
        level += 1
        nxt = np.unique((frontier[:, None] ^ (1 << np.arange(n))[None, :]).ravel())
        nxt = nxt[dist[nxt] < 0]
        dist[nxt] = level
        frontier = nxt
    mean_star = Fraction(int(dist.sum()), size)
    on = np.isin(pop, list(levels))
    x = dist[on]
    rows = []
    ok = True
    for h in hs:
        emp = float(np.mean(x - float(mean_star) >= h))
        b = tail_bound(None, h, "linear-far", n=n, R=R, c=c, k=len(levels))
        rows.append({"h": h, "empirical": emp, "bound": b.value, "raw": b.params["raw"], "holds": emp < b.params["raw"]})
        ok = ok and rows[-1]["holds"]
    return {"n": n, "R": R, "c": c, "levels": list(levels), "mean_star": mean_star, "rows": rows, "holds": ok}


def level_set_bounds(n: int, r: int = 0, k: int | None = None, t: float | None = None) -> dict[str, Any]:
    """Evaluate the level-set theorems for ``C_{(n-r)/2,(n+r)/2}``.

    Reports the sigma^2 bound ``n - 1 + r^2/4``, a grid estimate of sigma^2 of
    the space when ``n <= 14``, and (when ``k`` and ``t`` are given) the
    concentration factor ``exp(-t^2/(8k - 8 + 2r^2))``.
    """
    bound = level_sigma_bound(n, r)
    report: dict[str, Any] = {"n": n, "r": r, "sigma2_bound": bound}
    if n <= LEVEL_SIGMA_CAP:
        space = level_space(n, r)
        est = grid_sigma2(space, level_candidates(space, n) if space.n > 8 else None)
        report.update({"points": space.n, "grid_sigma2": est["sigma2"], "grid_mode": est["mode"]})
        report["below_bound"] = est["sigma2"] < float(bound)
    if k is not None and t is not None:
        report["levels_factor"] = tail_bound(None, t, "level-set", k=k, r=r).value
    return report


# ---------------------------------------------------------------- symmetric group


def sigma2_complete(m: int) -> float:
    """Exact subgaussian constant of ``K_m``: 1/4 for even m, ``1/(2 m ln((m+1)/(m-1)))`` for odd m."""
    if m < 2:
        return 0.0
    if m % 2 == 0:
        return 0.25
    return 1.0 / (2 * m * math.log((m + 1) / (m - 1)))


def sigma2_Jn(n: int) -> float:
    """``(n - 1 - sum_{3 <= 2r+1 <= n} (1 - 2/((2r+1) ln((r+1)/r)))) / 4``."""
    s = sum(1 - 2 / ((2 * r + 1) * math.log((r + 1) / r)) for r in range(1, n) if 3 <= 2 * r + 1 <= n)
    return (n - 1 - s) / 4


def sn_bounds_report(n: int) -> dict[str, Any]:
    """sigma^2 of ``S_n`` against ``n/4 < sigma^2 <= n - 1`` and the ``J_n`` comparison."""
    if n < 2:
        raise ConcurvError("bad-parameter", "n >= 2")
    if n > SN_SIGMA_CAP:
        raise ConcurvError("too-large", f"S_n grid estimate supports n <= {SN_SIGMA_CAP}")
    space = symmetric_group(n)
    est = grid_sigma2(space, permutation_candidates(space, n) if space.n > 8 else None)
    s2 = est["sigma2"]
    jn = sigma2_Jn(n)
    out = {
        "n": n,
        "points": space.n,
        "sigma2": s2,
        "mode": est["mode"],
        "upper": n - 1,
        "lower_n_over_4": n / 4,
        "sigma2_Jn": jn,
        "upper_holds": s2 <= n - 1 + 1e-12,
        "Jn_gap": n / 4 > jn + 0.25 if n >= 3 else None,
    }
    if n >= 3:
        out["lower_holds"] = s2 > n / 4
        out["beats_Jn"] = s2 > jn + 0.25
    return out


# ---------------------------------------------------------------- expanders


def normalized_spectrum(space: FiniteMetricSpace) -> np.ndarray:
    """Eigenvalues of ``D^{-1/2} A D^{-1/2}`` in decreasing order."""
    g = space.graph
    if g is None:
        raise ConcurvError("not-a-graph", "needs a graph")
    n = g.n
    A = np.zeros((n, n))
    for u, v in g.edges:
        A[u, v] = A[v, u] = 1.0
    deg = A.sum(axis=1)
    inv = 1.0 / np.sqrt(deg)
    M = inv[:, None] * A * inv[None, :]
    if n <= EXACT_EIGEN_LIMIT:
        return np.sort(np.linalg.eigvalsh(M))[::-1]
    from scipy.sparse import csr_matrix
    from scipy.sparse.linalg import eigsh

    sp = csr_matrix(M)
    top = eigsh(sp, k=2, which="LA", tol=1e-10, return_eigenvectors=False)
    bottom = eigsh(sp, k=1, which="SA", tol=1e-10, return_eigenvectors=False)
    return np.sort(np.concatenate([top, bottom]))[::-1]


def spectral_lambdas(space: FiniteMetricSpace) -> dict[str, float]:
    ev = normalized_spectrum(space)
    return {"lambda2": float(ev[1]), "lambda_abs": float(max(abs(ev[1]), abs(ev[-1])))}


def edge_count(space: FiniteMetricSpace, X: np.ndarray, Y: np.ndarray) -> int:
    """Ordered pairs ``(x, y)`` with ``x in X``, ``y in Y`` adjacent (shared edges count twice)."""
    g = space.graph
    return sum(int(X[u] and Y[v]) + int(X[v] and Y[u]) for u, v in g.edges)


def mixing_lemma(space: FiniteMetricSpace, X: np.ndarray, Y: np.ndarray, lam: float | None = None) -> dict[str, Any]:
    """``|e(X,Y) - d|X||Y|/n| <= lambda d sqrt(|X||Y|)`` with lambda the largest nontrivial ``|eigenvalue|``."""
    g = space.graph
    if not g.is_regular():
        raise ConcurvError("irregular", "mixing lemma needs a regular graph")
    d = g.degree(0)
    n = g.n
    lam = spectral_lambdas(space)["lambda_abs"] if lam is None else lam
    x, y = int(X.sum()), int(Y.sum())
    e = edge_count(space, X, Y)
    lhs = abs(e - d * x * y / n)
    rhs = lam * d * math.sqrt(x * y)
    return {"e": e, "lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + 1e-9}


def mixing_scan(space: FiniteMetricSpace, pairs: int = 1000, seed: int = 0) -> dict[str, Any]:
    rng = np.random.default_rng(seed)
    lam = spectral_lambdas(space)["lambda_abs"]
    n = space.n
    worst = -math.inf
    fails = 0
    for _ in range(pairs):
        X = rng.random(n) < rng.uniform(0.05, 0.95)
        Y = rng.random(n) < rng.uniform(0.05, 0.95)
        if not X.any() or not Y.any():
            continue
        r = mixing_lemma(space, X, Y, lam)
        worst = max(worst, r["lhs"] - r["rhs"])
        fails += not r["holds"]
    return {"pairs": pairs, "lambda_abs": lam, "max_excess": worst, "violations": fails, "holds": fails == 0}


def expander_midpoints(space: FiniteMetricSpace, S: Sequence[int], T: Sequence[int]) -> dict[str, Any]:
    """Quantities of the expander midpoint estimate for sets ``S`` and ``T``.

    ``m(S, T)`` is read as the union of pairwise symmetric midpoints.  The
    neighbourhoods ``S' = B(S, floor(d_*/2))`` and ``T'`` likewise feed the
    mixing-lemma count ``e(S', T')``.
    """
    g = space.graph
    if g is None:
        raise ConcurvError("not-a-graph", "needs a graph")
    if not g.is_regular():
        raise ConcurvError("irregular", "expander estimate needs a regular graph")
    if g.n > EXPANDER_CAP:
        raise ConcurvError("too-large", f"n <= {EXPANDER_CAP}")
    S, T = list(S), list(T)
    if not S or not T:
        raise ConcurvError("empty-set", "S and T must be nonempty")
    n, d = g.n, g.degree(0)
    lams = spectral_lambdas(space)
    ds = d_star(space, S, T)
    D = space.dist.astype(np.int64)
    rad = ds // 2
    Sp = D[S].min(axis=0) <= rad
    Tp = D[T].min(axis=0) <= rad
    mids = midpoints_hat_sets(space, S, T)
    e = edge_count(space, Sp, Tp)
    sp, tp = int(Sp.sum()), int(Tp.sum())
    lam = lams["lambda_abs"]
    return {
        "n": n,
        "degree": d,
        **lams,
        "d_star": ds,
        "degenerate": ds == 0,
        "S_prime": sp,
        "T_prime": tp,
        "e_S_T_prime": e,
        "midpoints": len(mids),
        "edge_estimate": e / d,
        "hypothesis_lhs": len(S) * len(T) * math.exp(ds * math.log(1 + lams["lambda2"])) if lams["lambda2"] > -1 else None,
        "hypothesis_rhs": lams["lambda2"] * n * n / 4,
        "proof_lower": sp * tp / n - lam * math.sqrt(sp * tp),
        "mixing": mixing_lemma(space, Sp, Tp, lam),
    }
