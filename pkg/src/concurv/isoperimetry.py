"""Balls, level sets, the vertex-isoperimetric function and the tripod/caterpillar constructions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConcurvError
from .lipschitz import ScalarField, is_lipschitz, max_variance, variance
from .metric import FiniteMetricSpace, caterpillar, product, tripod, tripod_star

ISO_LIMIT = 20

Number = int | Fraction | float


@dataclass(frozen=True, eq=False)
class VertexSet:
    """Subset of a space, stored as a boolean membership mask."""

    space: FiniteMetricSpace
    mask: np.ndarray

    @classmethod
    def of(cls, space: FiniteMetricSpace, members: Iterable[Hashable]) -> VertexSet:
        mask = np.zeros(space.n, dtype=bool)
        for lab in members:
            mask[space.index(lab)] = True
        return cls(space, mask)

    @classmethod
    def from_indices(cls, space: FiniteMetricSpace, idx: Iterable[int]) -> VertexSet:
        mask = np.zeros(space.n, dtype=bool)
        mask[list(idx)] = True
        return cls(space, mask)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, label: Hashable) -> bool:
        return bool(self.mask[self.space.index(label)])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VertexSet) and other.space is self.space and bool((other.mask == self.mask).all())

    def __le__(self, other: VertexSet) -> bool:
        return bool((~self.mask | other.mask).all())

    def indices(self) -> list[int]:
        return np.nonzero(self.mask)[0].tolist()

    def labels(self) -> list[Hashable]:
        return [self.space.points[i] for i in self.indices()]


def ball(S: VertexSet, d: int | Fraction) -> VertexSet:
    """``B_d(S) = {u : d(u, S) <= d}``."""
    if d < 0:
        raise ConcurvError("bad-parameter", "radius must be nonnegative")
    if not S.mask.any():
        raise ConcurvError("empty-set", "ball of an empty set")
    near = S.space.dist[S.mask].min(axis=0)
    return VertexSet(S.space, np.asarray(near <= d, dtype=bool))


def _power_sums(values: Sequence[Number], n: int) -> np.ndarray:
    """Coordinate sums of a field over the lexicographically ordered n-th power."""
    base = np.array([Fraction(v) for v in values], dtype=object)
    acc = np.array([Fraction(0)], dtype=object)
    for _ in range(n):
        acc = (acc[:, None] + base[None, :]).reshape(-1)
    return acc


def level_set(f: ScalarField, r: Number, n: int = 1, power: FiniteMetricSpace | None = None) -> VertexSet:
    """``S_{r,f} = {a : sum_i f(a_i) <= r}`` on ``G`` or on the l1-power ``G^n``."""
    if n == 1:
        space = f.space
        sums = np.array([Fraction(v) for v in f.values], dtype=object)
    else:
        space = power if power is not None else product([f.space] * n, "l1")
        sums = _power_sums(f.values, n)
    return VertexSet(space, np.array([s <= r for s in sums], dtype=bool))


def iso_function(space: FiniteMetricSpace, d: int) -> tuple[int, VertexSet]:
    """``i_{G,d} = min |B_d(S)|`` over ``|S| >= n/2``.

    Only sets of size exactly ``ceil(n/2)`` are scanned, since enlarging ``S``
    never shrinks its ball.  Ties go to the first set in lexicographic order.
    """
    n = space.n
    if n > ISO_LIMIT:
        raise ConcurvError("too-large", f"iso_function scans subsets of at most {ISO_LIMIT} points")
    size = math.ceil(n / 2)
    reach = np.asarray(space.dist <= d)
    weights = np.array([1 << i for i in range(n)], dtype=np.int64)
    nbhd = (reach * weights[None, :]).sum(axis=1)  # ball of each point as a bitmask
    best = n + 1
    best_set: tuple[int, ...] | None = None
    combos = itertools.combinations(range(n), size)
    while True:
        chunk = np.array(list(itertools.islice(combos, 50_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        masks = np.bitwise_or.reduce(nbhd[chunk], axis=1)
        counts = np.array([int(m).bit_count() for m in masks.tolist()])
        i = int(np.argmin(counts))
        if counts[i] < best:
            best, best_set = int(counts[i]), tuple(chunk[i].tolist())
    assert best_set is not None
    return best, VertexSet.from_indices(space, best_set)


# ---------------------------------------------------------------- caterpillar


def caterpillar_levels(k: int) -> tuple[dict[str, int], dict[str, int]]:
    """The variance-optimal levelling X and the rearranged levelling Y."""
    X: dict[str, int] = {}
    for i in range(1, 2 * k + 1):
        X[f"u{i}"] = i
        X[f"w{i}"] = i - 1 if i <= k else i + 1
    Y = {v: x for v, x in X.items() if x <= k}
    Y[f"w{k + 1}"] = k + 1
    for j in range(k + 2, 2 * k + 1):
        Y[f"w{j}"] = j
        Y[f"u{j - 1}"] = j
    Y[f"u{2 * k}"] = 2 * k + 1
    return X, Y


def caterpillar_psi(k: int) -> dict[str, str]:
    """Level-preserving bijection with ``X(u) = Y(psi(u))``."""
    psi = {f"{c}{i}": f"{c}{i}" for c in "uw" for i in range(1, 2 * k + 1)}
    psi[f"u{k + 1}"] = f"w{k + 1}"
    for j in range(k + 2, 2 * k + 1):
        psi[f"w{j - 1}"] = f"w{j}"
        psi[f"u{j}"] = f"u{j - 1}"
    psi[f"w{2 * k}"] = f"u{2 * k}"
    return psi


def _power_perm(space: FiniteMetricSpace, psi: Mapping[Hashable, Hashable], n: int) -> np.ndarray:
    base = np.array([space.index(psi[p]) for p in space.points], dtype=np.int64)
    m = space.n
    perm = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        perm = (perm[:, None] * m + base[None, :]).reshape(-1)
    return perm


def _ball_table(
    power: FiniteMetricSpace, sums_x: np.ndarray, sums_y: np.ndarray, perm: np.ndarray, shift: Fraction
) -> list[dict[str, Any]]:
    rows = []
    dmax = int(power.dist.max())
    for r in sorted(set(sums_x.tolist())):
        sx = sums_x <= r
        sy = sums_y <= r
        dx = power.dist[sx].min(axis=0)
        dy = power.dist[sy].min(axis=0)
        for d in range(dmax + 1):
            bx = dx <= d
            by = dy <= d
            image = np.zeros(power.n, dtype=bool)
            image[perm[bx]] = True
            contained = bool((image | ~by).all())
            rows.append(
                {
                    "r": int(r),
                    "shifted_r": Fraction(r) - shift,
                    "d": d,
                    "size_S": int(sx.sum()),
                    "ball_X": int(bx.sum()),
                    "ball_Y": int(by.sum()),
                    "contained": contained,
                    "strict": contained and int(bx.sum()) > int(by.sum()),
                    "saturated": bool(by.all()),
                }
            )
    return rows


def caterpillar_counterexample(k: int, n: int = 1, cap: int = 10**5) -> dict[str, Any]:
    """Compare balls around the level sets of X and of the rearrangement Y on ``G^n``.

    Every (d, r) pair is tabulated.  ``containment_all`` is the claim that
    ``psi^n(B_d(S_{r,X})) ⊇ B_d(S_{r,Y})`` for all pairs; the report also
    gives the region on which containment and strict containment hold, and
    the predicted strict region ``d > 0`` and ``r - n(2k+1)/2 >= 3/2`` with
    saturated pairs (where both balls are everything) set aside.
    """
    if k < 2 or n < 1:
        raise ConcurvError("bad-parameter", "need k >= 2 and n >= 1")
    if (4 * k) ** n > cap:
        raise ConcurvError("too-large", f"(4k)^n = {(4 * k) ** n} exceeds cap {cap}")
    g = caterpillar(k)
    X, Y = caterpillar_levels(k)
    psi = caterpillar_psi(k)
    fx = ScalarField.from_mapping(g, X)
    lip_x, _ = is_lipschitz(fx)
    lip_y, bad_y = is_lipschitz(ScalarField.from_mapping(g, Y))
    if sorted(psi.values()) != sorted(g.points) or any(X[u] != Y[psi[u]] for u in g.points):
        raise ConcurvError("internal", "psi is not a level-preserving bijection")
    c2, _ = max_variance(g)
    power = g if n == 1 else product([g] * n, "l1", cap=cap)
    sums_x = _power_sums([X[p] for p in g.points], n)
    sums_y = _power_sums([Y[p] for p in g.points], n)
    perm = _power_perm(g, psi, n)
    shift = Fraction(n * (2 * k + 1), 2)
    rows = _ball_table(power, sums_x, sums_y, perm, shift)
    predicted = [(row["d"] > 0 and row["shifted_r"] >= Fraction(3, 2)) for row in rows]
    strict_match = all(
        row["strict"] == pred for row, pred in zip(rows, predicted) if not row["saturated"]
    )
    above = [row for row in rows if row["shifted_r"] >= Fraction(1, 2)]
    return {
        "k": k,
        "n": n,
        "points": power.n,
        "median": shift,
        "X": X,
        "Y": Y,
        "psi": psi,
        "X_lipschitz": lip_x,
        "Y_lipschitz": lip_y,
        "Y_violation": [g.points[i] for i in bad_y] if bad_y else None,
        "X_variance_optimal": variance(fx) == c2,
        "c2": c2,
        "containment_all": all(row["contained"] for row in rows),
        "containment_failures": [(row["r"], row["d"]) for row in rows if not row["contained"]],
        "containment_above_median": all(row["contained"] for row in above),
        "strict_pairs": [(row["r"], row["d"]) for row in rows if row["strict"]],
        "strict_matches_prediction": strict_match,
        "table": rows,
    }


# ---------------------------------------------------------------- tripods


def _tripod_plain(k: int) -> dict[str, Any]:
    g = tripod(k)
    X = {"r": 0}
    for i in range(1, k + 1):
        X[f"x{i}"] = -i
        X[f"y{i}"] = -i
    for i in range(1, 2 * k + 1):
        X[f"z{i}"] = i
    psi = {"r": "r"}
    for i in range(1, k + 1):
        psi[f"x{i}"] = f"z{2 * i - 1}"
        psi[f"z{2 * i - 1}"] = f"x{i}"
        psi[f"y{i}"] = f"z{2 * i}"
        psi[f"z{2 * i}"] = f"y{i}"
    fx = ScalarField.from_mapping(g, X, "r")
    neg = fx.negated()
    s_x = level_set(fx, 0)
    s_negx = level_set(neg, 0)
    perm = np.array([g.index(psi[p]) for p in g.points])
    image_s = VertexSet.from_indices(g, perm[s_x.indices()])
    rows = []
    for d in range(int(g.diameter()) + 1):
        bx = ball(s_x, d)
        bn = ball(s_negx, d)
        img = VertexSet.from_indices(g, perm[bx.indices()])
        rows.append(
            {
                "d": d,
                "ball_X": len(bx),
                "ball_negX": len(bn),
                "image_subset": img <= bn,
                "image_strict": img <= bn and len(img) < len(bn),
                "formula_X": len(bx) == min(2 * k + 1 + d, g.n),
                "formula_negX": len(bn) == min(2 * k + 1 + 2 * d, g.n),
            }
        )
    vals = sorted(Fraction(v) for v in X.values())
    median = vals[len(vals) // 2]
    c2, witnesses = max_variance(g, anchor=g.index("r"))
    targets = {tuple(fx.values), tuple(neg.values)}
    # swapping the two short hairs is the other symmetry
    swap = {p: p for p in g.points}
    for i in range(1, k + 1):
        swap[f"x{i}"], swap[f"y{i}"] = f"y{i}", f"x{i}"
    sw = [g.index(swap[p]) for p in g.points]
    matches = all(
        tuple(w.values) in targets or tuple(w.values[j] for j in sw) in targets for w in witnesses
    )
    return {
        "variant": "plain",
        "k": k,
        "X": X,
        "psi": psi,
        "median": median,
        "mean": fx.mean(),
        "median_zero_mean_positive": median == 0 and fx.mean() > 0,
        "psi_maps_level_set": image_s == s_negx,
        "balls": rows,
        "containment": all(r["image_subset"] for r in rows),
        "strict_for": [r["d"] for r in rows if r["image_strict"]],
        "ball_formulas_hold_for": [r["d"] for r in rows if r["formula_X"] and r["formula_negX"]],
        "c2": c2,
        "variance_X": variance(fx),
        "X_variance_optimal": variance(fx) == c2,
        "witnesses_match_X": matches,
        "optimality_mode": "exact" if k >= 6 else "exact-small-k",
    }


def tripod_star_psi(k: int) -> dict[str, str]:
    """Involution pairing the long hairs of the tripod with a star.

    The rule for the two vertices sent to ``w2`` and ``w3`` is read as
    ``x_{(k-1)/2} -> w2`` and ``y_{(k-1)/2} -> w3``.
    """
    h = (k + 1) // 2
    psi: dict[str, str] = {"r": "r"}

    def pair(a: str, b: str) -> None:
        psi[a] = b
        psi[b] = a

    for i in range(0, k - h + 1):
        pair(f"x{k - i}", f"z{k - 2 * i}")
    for i in range(0, k - (k + 3) // 2 + 1):
        pair(f"y{k - i}", f"z{k - 2 * i - 1}")
    pair(f"y{h}", "w1")
    pair(f"x{h - 1}", "w2")
    pair(f"y{h - 1}", "w3")
    for i in range(1, (k - 3) // 2 + 1):
        pair(f"x{i}", f"w{3 + i}")
        pair(f"y{i}", f"w{(k + 3) // 2 + i}")
    return psi


def _tripod_star(k: int) -> dict[str, Any]:
    g = tripod_star(k)
    tree = tripod_star(k, chords=False)
    X = {"r": 0}
    for i in range(1, k + 1):
        X[f"x{i}"] = i
        X[f"y{i}"] = i
        X[f"z{i}"] = -i
        X[f"w{i}"] = -1
    psi = tripod_star_psi(k)
    if sorted(psi) != sorted(g.points) or any(psi[psi[p]] != p for p in g.points):
        raise ConcurvError("internal", "psi is not an involution of the vertex set")
    fx = ScalarField.from_mapping(g, X, "r")
    neg = fx.negated()
    s_x = level_set(fx, -2)
    s_negx = level_set(neg, -Fraction(k + 3, 2))
    perm = np.array([g.index(psi[p]) for p in g.points])
    rows = []
    for d in range(int(g.diameter()) + 1):
        bx = ball(s_x, d)
        bn = ball(s_negx, d)
        img = VertexSet.from_indices(g, perm[bx.indices()])
        rows.append(
            {
                "d": d,
                "ball_X": len(bx),
                "ball_negX": len(bn),
                "image_superset": bn <= img,
                "image_strict": bn <= img and len(img) > len(bn),
            }
        )
    c2_tree, _ = max_variance(tree, anchor=tree.index("r"))
    var_x = variance(fx)
    lip, _ = is_lipschitz(fx)
    vals = sorted(Fraction(v) for v in X.values())
    return {
        "variant": "star",
        "k": k,
        "X": X,
        "psi": psi,
        "median": vals[len(vals) // 2],
        "mean": fx.mean(),
        "S_X": s_x.labels(),
        "S_negX": s_negx.labels(),
        "sizes_equal": len(s_x) == len(s_negx) == k - 1,
        "psi_maps_level_set": VertexSet.from_indices(g, perm[s_x.indices()]) == s_negx,
        "balls": rows,
        "containment": all(r["image_superset"] for r in rows),
        "strict_for": [r["d"] for r in rows if r["image_strict"]],
        "c2_tree": c2_tree,
        "variance_X": var_x,
        "X_lipschitz": lip,
        # c(G) <= c(G') because G' is a spanning subgraph, so equality here is optimality on G
        "X_variance_optimal": lip and var_x == c2_tree,
    }


def tripod_examples(k: int, variant: str = "plain") -> dict[str, Any]:
    """Reproduce the tripod constructions; ``variant`` is ``plain`` or ``star``."""
    if variant == "plain":
        if k < 2:
            raise ConcurvError("bad-parameter", "tripod needs k >= 2")
        return _tripod_plain(k)
    if variant == "star":
        if k < 5 or k % 2 == 0:
            raise ConcurvError("bad-parameter", "tripod with star needs odd k >= 5")
        return _tripod_star(k)
    raise ConcurvError("bad-parameter", f"unknown variant {variant!r}")
