"""Discrete midpoints, convexity and Brunn-Minkowski curvature on the Boolean lattice and l0 products."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConcurvError
from .metric import FiniteMetricSpace, hypercube, mask_to_set, set_to_mask

Atom = int | tuple[int, int]


def hypercube_dim(space: FiniteMetricSpace) -> int | None:
    """``d`` when ``space`` is ``H_d`` as built by ``hypercube`` (index = bitmask), else None."""
    n = space.n
    if n & (n - 1) or space.kind != "graph-shortest-path":
        return None
    d = n.bit_length() - 1
    if all(isinstance(p, frozenset) and set_to_mask(p) == i for i, p in enumerate(space.points)):
        return d
    return None


def _rows(space: FiniteMetricSpace) -> np.ndarray:
    return space.dist.astype(np.int64) if space.integral else space.dist


def _rho(rho: Fraction | float | str) -> Fraction:
    r = Fraction(rho)
    if not 0 < r < 1:
        raise ConcurvError("bad-parameter", f"rho must lie in (0,1), got {rho}")
    return r


def _geodesic_mask(D: np.ndarray, a: int, b: int) -> np.ndarray:
    return D[a] + D[b] == D[a, b]


def midpoints_hat(space: FiniteMetricSpace, a: int, b: int, rho: Fraction | float | str = Fraction(1, 2)) -> list[int]:
    """Symmetric discrete midpoints: on-geodesic points at distance
    ``floor(rho D)`` or ``ceil((1-rho) D)`` from ``a`` where ``D = d(a,b)``."""
    r = _rho(rho)
    D = _rows(space)
    dab = Fraction(D[a, b])
    levels = {math.floor(r * dab), math.ceil((1 - r) * dab)}
    on = _geodesic_mask(D, a, b) & np.isin(D[a], list(levels))
    return np.nonzero(on)[0].tolist()


def midpoints_rho(space: FiniteMetricSpace, a: int, b: int, rho: Fraction | float | str = Fraction(1, 2)) -> list[int]:
    """One-sided weighted midpoints: on-geodesic points at distance ``floor(rho D)`` from ``a``."""
    r = _rho(rho)
    D = _rows(space)
    level = math.floor(r * Fraction(D[a, b]))
    on = _geodesic_mask(D, a, b) & (D[a] == level)
    return np.nonzero(on)[0].tolist()


def _set_midpoints(space: FiniteMetricSpace, S: Iterable[int], T: Iterable[int], rho, one_sided: bool) -> np.ndarray:
    r = _rho(rho)
    D = _rows(space)
    T = np.fromiter(T, dtype=np.int64)
    out = np.zeros(space.n, dtype=bool)
    if T.size == 0:
        return out
    for start in range(0, T.size, 256):
        block = T[start : start + 256]
        rows_t = D[block]
        for s in S:
            dst = D[s, block]  # distances s -> t
            on = D[s][None, :] + rows_t == dst[:, None]
            lo = np.array([math.floor(r * Fraction(x)) for x in dst.tolist()])
            hit = D[s][None, :] == lo[:, None]
            if not one_sided:
                hi = np.array([math.ceil((1 - r) * Fraction(x)) for x in dst.tolist()])
                hit |= D[s][None, :] == hi[:, None]
            out |= (on & hit).any(axis=0)
    return out


def midpoints_hat_sets(space: FiniteMetricSpace, S: Iterable[int], T: Iterable[int], rho=Fraction(1, 2)) -> list[int]:
    """``m_hat_rho(S,T)``: union of point midpoints over ``S x T``."""
    return np.nonzero(_set_midpoints(space, list(S), T, rho, False))[0].tolist()


def midpoints_rho_sets(space: FiniteMetricSpace, S: Iterable[int], T: Iterable[int], rho=Fraction(1, 2)) -> list[int]:
    return np.nonzero(_set_midpoints(space, list(S), T, rho, True))[0].tolist()


def midpoints_tilde(space: FiniteMetricSpace, a: int, b: int) -> list[Atom]:
    """Tilde midpoints: midpoint vertices for even ``d(a,b)``, midpoint edges ``(u, v)`` for odd.

    An edge atom is the pair with ``2 d(a,u) + 1 = d(a,b) = 2 d(v,b) + 1``,
    reported with ``u`` on the ``a`` side.
    """
    D = _rows(space)
    dab = D[a, b]
    if dab % 2 == 0:
        h = dab // 2
        return np.nonzero((D[a] == h) & (D[b] == h))[0].tolist()
    if space.graph is None or not space.integral:
        raise ConcurvError("no-edge-atoms", "odd distance needs a graph metric for edge atoms")
    h = (dab - 1) // 2
    us = np.nonzero((D[a] == h) & (D[b] == h + 1))[0].tolist()
    out = []
    for u in us:
        for v in sorted(space.graph.adj[u]):
            if D[a, v] == h + 1 and D[b, v] == h:
                out.append((u, v))
    return out


def is_convex(space: FiniteMetricSpace, S: Iterable[int]) -> bool:
    """``m_hat(S,S) ⊆ S``."""
    S = sorted(set(S))
    mask = np.zeros(space.n, dtype=bool)
    mask[S] = True
    return not (_set_midpoints(space, S, S, Fraction(1, 2), False) & ~mask).any()


def convex_closure(space: FiniteMetricSpace, S: Iterable[int]) -> list[int]:
    """Least superset closed under ``m_hat``.

    New points are processed in index order; only pairs touching a newly
    added point are recomputed.  On ``H_d`` the result is checked to be the
    interval between the intersection and the union of ``S``.
    """
    start = sorted(set(S))
    if not start:
        raise ConcurvError("empty-set", "closure of an empty set")
    mask = np.zeros(space.n, dtype=bool)
    mask[start] = True
    frontier = start
    while frontier:
        current = np.nonzero(mask)[0]
        new = _set_midpoints(space, frontier, current, Fraction(1, 2), False) & ~mask
        frontier = np.nonzero(new)[0].tolist()
        mask |= new
    out = np.nonzero(mask)[0].tolist()
    if hypercube_dim(space) is not None:
        lo = (1 << hypercube_dim(space)) - 1
        hi = 0
        for s in start:
            lo &= s
            hi |= s
        interval = [m for m in range(space.n) if m & lo == lo and m | hi == hi]
        if interval != out:
            raise ConcurvError("internal", "closure is not the spanning interval")
    return out


def is_interval(points: Sequence[int]) -> bool:
    """True when a set of bitmasks is ``{g : lo ⊆ g ⊆ hi}``."""
    if not points:
        return False
    lo = -1
    hi = 0
    for p in points:
        lo &= p
        hi |= p
    free = hi & ~lo
    return len(set(points)) == 1 << bin(free).count("1") and all(p & lo == lo and p | hi == hi for p in points)


def iterated_midpoint_counterexample() -> dict[str, Any]:
    """The two convex sets of ``H_12`` whose iterated midpoints overshoot the quarter points."""
    d = 12
    space = hypercube(d)
    A = [set_to_mask(s) for r in range(5) for s in itertools.combinations(range(1, 5), r)]
    base = set_to_mask(range(1, 9))
    B = [base | set_to_mask(s) for r in range(5) for s in itertools.combinations(range(9, 13), r)]
    A, B = sorted(A), sorted(B)
    mid = midpoints_hat_sets(space, A, B)
    quarter_hat = midpoints_hat_sets(space, A, B, Fraction(1, 4))
    quarter = midpoints_rho_sets(space, A, B, Fraction(1, 4))
    half_one_sided = midpoints_rho_sets(space, A, B, Fraction(1, 2))
    phi = set_to_mask(range(7, 13))
    zeta = set_to_mask([1, 2, 3, 4, 8, 9, 10, 11, 12])
    iterated = midpoints_hat_sets(space, A, mid)
    back = midpoints_hat_sets(space, mid, B)
    sizes = lambda pts: (min(bin(p).count("1") for p in pts), max(bin(p).count("1") for p in pts))
    return {
        "d": d,
        "A_convex": is_convex(space, A),
        "B_convex": is_convex(space, B),
        "phi": sorted(mask_to_set(phi)),
        "phi_in_mid": phi in set(mid),
        "phi_mid_of_extremes": phi in midpoints_hat(space, 0, (1 << d) - 1),
        "zeta": sorted(mask_to_set(zeta)),
        "zeta_size": bin(zeta).count("1"),
        "zeta_mid_of_witness": zeta in midpoints_hat(space, set_to_mask([1, 2, 3, 4]), phi),
        "zeta_in_iterated": zeta in set(iterated),
        "zeta_in_quarter": zeta in set(quarter),
        "zeta_in_quarter_hat": zeta in set(quarter_hat),
        "zeta_in_mid": zeta in set(mid),
        "mid_sizes": sizes(mid),
        "half_one_sided_sizes": sizes(half_one_sided),
        "quarter_sizes": sizes(quarter),
        "quarter_hat_sizes": sizes(quarter_hat),
        "counts": {"mid": len(mid), "quarter": len(quarter), "quarter_hat": len(quarter_hat), "iterated": len(iterated), "back": len(back)},
        "iterated_strictly_contains_quarter": set(quarter) < set(iterated),
        "back_strictly_contains_quarter": set(quarter) < set(back),
    }


# ---------------------------------------------------------------- curvature


@dataclass
class CurvatureEstimate:
    S: list[int]
    T: list[int]
    d_star: int
    midpoint_count: int
    K_hat: float | None

    def as_dict(self) -> dict[str, Any]:
        return {"S": self.S, "T": self.T, "d_star": self.d_star, "midpoint_count": self.midpoint_count, "K_hat": self.K_hat}


def d_star(space: FiniteMetricSpace, S: Sequence[int], T: Sequence[int]) -> int:
    return int(_rows(space)[np.ix_(list(S), list(T))].min())


def bm_curvature(space: FiniteMetricSpace, S: Sequence[int], T: Sequence[int], rho=Fraction(1, 2)) -> CurvatureEstimate:
    """``K_hat = 8 ln(|m_hat(S,T)| / sqrt(|S||T|)) / d_*^2``; None when ``d_* = 0``."""
    S, T = sorted(set(S)), sorted(set(T))
    if not S or not T:
        raise ConcurvError("empty-set", "curvature needs nonempty sets")
    ds = d_star(space, S, T)
    count = int(_set_midpoints(space, S, T, rho, False).sum())
    k_hat = None
    if ds > 0:
        k_hat = 8.0 * math.log(count / math.sqrt(len(S) * len(T))) / ds**2
    return CurvatureEstimate(S, T, ds, count, k_hat)


def _ball_around(space: FiniteMetricSpace, center: int, radius: int) -> list[int]:
    return np.nonzero(_rows(space)[center] <= radius)[0].tolist()


def _sample_set(space: FiniteMetricSpace, rng: np.random.Generator, max_size: int) -> list[int]:
    """A random set drawn from one of three shapes: scattered points, a ball, or a subcube."""
    shape = int(rng.integers(3))
    n = space.n
    if shape == 0:
        size = int(rng.integers(1, max_size + 1))
        return sorted(set(rng.choice(n, size=size, replace=False).tolist()))
    if shape == 1:
        return _ball_around(space, int(rng.integers(n)), int(rng.integers(0, 2)))
    # points within a random subcube-like block: agree with a centre outside a few free coordinates
    center = int(rng.integers(n))
    row = _rows(space)[center]
    near = np.nonzero(row <= 1)[0]
    pick = rng.choice(near, size=min(len(near), int(rng.integers(1, max_size + 1))), replace=False)
    return sorted(set(pick.tolist()) | {center})


def bm_scan(
    space: FiniteMetricSpace,
    samples: int = 10_000,
    seed: int = 0,
    min_dstar: int = 2,
    max_size: int = 4,
    dim: int | None = None,
    max_tries: int = 200,
) -> dict[str, Any]:
    """Random search for pairs ``(S, T)`` with ``K_hat < 1/(2 dim)``.

    ``dim`` defaults to the number of coordinates of the space (its diameter
    for the l0 and hypercube cases).  Pairs with ``d_* < min_dstar`` are
    rejected and redrawn.
    """
    rng = np.random.default_rng(seed)
    if dim is None:
        dim = int(space.diameter())
    threshold = 1.0 / (2 * dim)
    worst: CurvatureEstimate | None = None
    flagged = []
    rejected = 0
    accepted = 0
    for _ in range(samples):
        for _try in range(max_tries):
            S = _sample_set(space, rng, max_size)
            T = _sample_set(space, rng, max_size)
            if d_star(space, S, T) >= min_dstar:
                break
            rejected += 1
        else:
            continue
        accepted += 1
        est = bm_curvature(space, S, T)
        if worst is None or est.K_hat < worst.K_hat:
            worst = est
        if est.K_hat < threshold:
            flagged.append(est.as_dict())
    return {
        "samples": accepted,
        "rejected_draws": rejected,
        "seed": seed,
        "dim": dim,
        "threshold": threshold,
        "min_K_hat": worst.K_hat if worst else None,
        "worst": worst.as_dict() if worst else None,
        "violations": flagged,
        "holds": not flagged,
    }


# ---------------------------------------------------------------- the map phi


def coordinates(space: FiniteMetricSpace) -> np.ndarray:
    """Integer coordinate matrix for a hypercube or an l0 product (tuple labels)."""
    d = hypercube_dim(space)
    if d is not None:
        idx = np.arange(space.n)
        return (idx[:, None] >> np.arange(d)[None, :]) & 1
    if space.kind == "hamming" and all(isinstance(p, tuple) for p in space.points):
        width = len(space.points[0])
        codes = [dict() for _ in range(width)]
        out = np.zeros((space.n, width), dtype=np.int64)
        for i, p in enumerate(space.points):
            for j, c in enumerate(p):
                out[i, j] = codes[j].setdefault(c, len(codes[j]))
        return out
    raise ConcurvError("bad-space", "phi needs a hypercube or an l0 product")


def phi_map(coords: np.ndarray, s: int, t: int, pi: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
    """``phi((s,t), pi) = (m1, m2)``.

    With ``i_1 < ... < i_r`` the coordinates where ``s`` and ``t`` differ,
    ``m1`` copies ``s`` on ``{i_k : k in pi}`` and ``t`` on the rest of them,
    ``m2`` does the reverse; agreeing coordinates are kept.
    """
    cs, ct = coords[s], coords[t]
    diff = np.nonzero(cs != ct)[0]
    sel = np.zeros(len(diff), dtype=bool)
    sel[list(pi)] = True
    m1 = cs.copy()
    m2 = cs.copy()
    m1[diff[~sel]] = ct[diff[~sel]]
    m2[diff[sel]] = ct[diff[sel]]
    return m1, m2


def phi_injection_check(
    space: FiniteMetricSpace, S: Sequence[int], T: Sequence[int], rho=Fraction(1, 2), r: int | None = None
) -> dict[str, Any]:
    """Materialise ``phi`` on ``(S,T)_r x C^(r)`` and check its stated properties.

    ``C^(r)`` is the family of subsets of ``{0..r-1}`` whose size is
    ``floor(rho r)`` or ``ceil((1-rho) r)``.  When ``r`` is None every
    distance occurring in ``S x T`` is checked.
    """
    rr = _rho(rho)
    coords = coordinates(space)
    lookup = {tuple(c): i for i, c in enumerate(coords.tolist())}
    D = _rows(space)
    mids = set(np.nonzero(_set_midpoints(space, S, T, rr, False))[0].tolist())
    radii = sorted({int(D[s, t]) for s in S for t in T}) if r is None else [r]
    report: dict[str, Any] = {"radii": {}, "holds": True}
    for rad in radii:
        pairs = [(s, t) for s in S for t in T if D[s, t] == rad]
        sizes = sorted({math.floor(rr * rad), math.ceil((1 - rr) * rad)})
        family = [c for k in sizes for c in itertools.combinations(range(rad), k)]
        levels_ok = dist_ok = in_mid = inverse_ok = True
        preimages: dict[tuple[tuple[int, ...], int, int], int] = {}
        for s, t in pairs:
            for pi in family:
                m1, m2 = phi_map(coords, s, t, pi)
                i1, i2 = lookup[tuple(m1.tolist())], lookup[tuple(m2.tolist())]
                levels_ok &= D[s, i2] == len(pi) and D[s, i1] == rad - len(pi)
                dist_ok &= D[i1, i2] == rad
                in_mid &= i1 in mids and i2 in mids
                b1, b2 = phi_map(coords, i1, i2, pi)
                inverse_ok &= lookup[tuple(b1.tolist())] == s and lookup[tuple(b2.tolist())] == t
                key = (pi, i1, i2)
                preimages[key] = preimages.get(key, 0) + 1
        injective = all(v <= 1 for v in preimages.values())
        ok = bool(levels_ok and dist_ok and in_mid and inverse_ok and injective)
        report["radii"][rad] = {
            "pairs": len(pairs),
            "family_size": len(family),
            "levels": bool(levels_ok),
            "distance_r": bool(dist_ok),
            "images_are_midpoints": bool(in_mid),
            "inverse": bool(inverse_ok),
            "injective_per_pi": injective,
        }
        report["holds"] &= ok
    return report


def hypercube_point(coords_bits: int, pi: Iterable[int], a: int, b: int) -> int:
    """``phi(a, b, pi)`` on ``H_d`` as a single point: flip the ``pi``-indexed differing bits of ``a``."""
    diff = [i for i in range(coords_bits) if (a ^ b) >> i & 1]
    out = a
    for k in pi:
        out ^= 1 << diff[k]
    return out


def C_R_atoms(R: int) -> list[Atom]:
    """``m_tilde(∅, {1..R})`` in ``H_R``: half-size subsets, or level-crossing edges for odd R."""
    if R == 0:
        return [0]
    if R % 2 == 0:
        return [set_to_mask(c) for c in itertools.combinations(range(1, R + 1), R // 2)]
    out = []
    for c in itertools.combinations(range(1, R + 1), (R - 1) // 2):
        x = set_to_mask(c)
        for e in range(1, R + 1):
            if e not in c:
                out.append((x, x | 1 << (e - 1)))
    return out


def C_R_size(R: int) -> int:
    """``|C_R|``: ``binom(R, R/2)`` for even R, ``binom(R, (R-1)/2) (R+1)/2`` for odd R."""
    if R % 2 == 0:
        return math.comb(R, R // 2)
    i = (R - 1) // 2
    return math.comb(2 * i + 1, i) * (i + 1)


def phi_tilde(a: int, b: int, c: Atom, R: int) -> tuple[Atom, Atom]:
    """``(M, M')`` for a pair ``a, b`` at distance ``R`` in ``H_d`` and ``c`` in ``C_R``.

    ``c`` is written in coordinates ``1..R`` that index the bits where ``a``
    and ``b`` differ.
    """
    full = (1 << R) - 1
    bits = max(a.bit_length(), b.bit_length(), 1)

    def point(sub: int) -> int:
        return hypercube_point(bits, [k for k in range(R) if sub >> k & 1], a, b)

    if isinstance(c, tuple):
        x, y = c
        return (point(x), point(y)), (point(full & ~y), point(full & ~x))
    return point(c), point(full & ~c)
