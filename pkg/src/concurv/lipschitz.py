"""Extremal Lipschitz functions, spread, log-moment envelopes and subgaussian constants.

Fields are enumerated exactly as integer matrices (values times a fixed
scale) so that variance comparisons are exact; log-moments are evaluated in
floating point with a max-shifted log-sum-exp.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConcurvError
from .metric import FiniteMetricSpace, Graph, find_hairs

DEFAULT_ENUM_CAP = 16
# exhaustive enumeration on metrics without unit steps uses a finer grid and
# grows quickly, so its default cap is lower
DEFAULT_METRIC_ENUM_CAP = 8
TREE_ENUM_LIMIT = 21
TIE_TOL = 1e-12

Number = int | Fraction | float


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A real function on the points of ``space``.

    Enumerated fields hold exact ints or Fractions; analysis code may hold
    floats.  ``anchor`` names the point that the translation convention pins.
    """

    space: FiniteMetricSpace
    values: tuple[Number, ...]
    anchor: int = 0

    def __post_init__(self) -> None:
        if len(self.values) != self.space.n:
            raise ConcurvError("bad-field", "one value per point is required")

    @classmethod
    def from_mapping(
        cls, space: FiniteMetricSpace, mapping: Mapping[Hashable, Number], anchor: Hashable | None = None
    ) -> ScalarField:
        vals = tuple(mapping[p] for p in space.points)
        idx = 0 if anchor is None else space.index(anchor)
        return cls(space, vals, idx)

    def array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self.values)

    def mean(self) -> Number:
        if self.exact:
            return Fraction(sum(self.values), len(self.values))
        return float(np.mean(self.array()))

    def anchored(self) -> ScalarField:
        shift = self.values[self.anchor]
        return ScalarField(self.space, tuple(v - shift for v in self.values), self.anchor)

    def negated(self) -> ScalarField:
        return ScalarField(self.space, tuple(-v for v in self.values), self.anchor)

    def value_of(self, label: Hashable) -> Number:
        return self.values[self.space.index(label)]

    def as_dict(self) -> dict[Hashable, Number]:
        return dict(zip(self.space.points, self.values))


@dataclass
class LogMomentCurve:
    """Envelope ``L_G(t)`` over a fixed candidate matrix.

    ``witness_ids[i]`` lists every candidate row whose log-moment at ``t[i]``
    is within ``TIE_TOL`` of the maximum.
    """

    space: FiniteMetricSpace
    t: np.ndarray
    values: np.ndarray
    witness_ids: list[np.ndarray]
    matrix: np.ndarray = field(repr=False)
    scale: int = 1

    def field(self, row: int) -> ScalarField:
        return _row_to_field(self.space, self.matrix[row], self.scale)

    def witnesses(self, i: int) -> list[ScalarField]:
        return [self.field(r) for r in self.witness_ids[i]]

    def ratio(self) -> np.ndarray:
        return 2.0 * self.values / self.t**2


@dataclass
class SubgaussianEstimate:
    """Grid estimate of the subgaussian constant.

    ``sigma2_lower`` is the largest ``2 L_G(t) / t^2`` over the grid.
    ``sigma2_grid_sup`` also includes the ``t -> 0`` end point, whose value is
    the largest candidate variance, so ``sigma2_lower <= sigma2_grid_sup``.
    ``exhaustive`` is False when the candidate set is not a full extremal
    enumeration, in which case both numbers are lower estimates.
    """

    sigma2_lower: float
    sigma2_grid_sup: float
    witness: ScalarField
    t_star: float
    grid: tuple[float, float, int]
    limit_variance: Fraction | float
    exhaustive: bool
    curve: LogMomentCurve = field(repr=False)

    @property
    def sigma2(self) -> float:
        return self.sigma2_grid_sup


def _row_to_field(space: FiniteMetricSpace, row: np.ndarray, scale: int, anchor: int = 0) -> ScalarField:
    if scale == 1:
        vals: tuple[Number, ...] = tuple(int(x) for x in row)
    else:
        vals = tuple(Fraction(int(x), scale) for x in row)
    return ScalarField(space, vals, anchor)


def _common_scale(values: Sequence[Number], extra: Sequence[Number] = ()) -> int:
    den = 1
    for v in list(values) + list(extra):
        den = math.lcm(den, Fraction(v).denominator)
    return den


def _scaled_dist(space: FiniteMetricSpace, scale: int) -> np.ndarray:
    if space.integral:
        return space.dist.astype(np.int64) * scale
    out = np.empty(space.dist.shape, dtype=np.int64)
    for (i, j), x in np.ndenumerate(space.dist):
        y = Fraction(x) * scale
        if y.denominator != 1:
            raise ConcurvError("bad-scale", "distances are not on the value grid")
        out[i, j] = y.numerator
    return out


def is_lipschitz(f: ScalarField, L: Number = 1) -> tuple[bool, tuple[int, int] | None]:
    """Check ``|f(u)-f(v)| <= L d(u,v)`` on all pairs.

    Returns ``(True, None)`` or ``(False, (u, v))`` with a pair of largest
    excess.  Exact whenever the values and distances are rational.
    """
    space = f.space
    if f.exact and (space.integral or space.dist.dtype == object):
        dist_vals = [] if space.integral else list(space.dist.flat)
        scale = _common_scale(f.values, [Fraction(L)] + dist_vals)
        v = np.array([int(Fraction(x) * scale) for x in f.values], dtype=np.int64)
        lip = Fraction(L)
        d = _scaled_dist(space, 1) if space.integral else None
        if d is not None:
            excess = np.abs(v[:, None] - v[None, :]) * lip.denominator - d * scale * lip.numerator
        else:
            dd = _scaled_dist(space, scale * lip.denominator)
            excess = np.abs(v[:, None] - v[None, :]) * lip.denominator - dd * lip.numerator // lip.denominator
    else:
        v = f.array()
        excess = np.abs(v[:, None] - v[None, :]) - float(L) * space.float_dist() - 1e-12
    worst = np.unravel_index(int(np.argmax(excess)), excess.shape)
    if excess[worst] > 0:
        u, w = int(worst[0]), int(worst[1])
        return False, (min(u, w), max(u, w))
    return True, None


def variance(f: ScalarField) -> Number:
    """Variance under the uniform measure (exact for exact fields)."""
    if f.exact:
        n = len(f.values)
        s = sum(Fraction(x) for x in f.values)
        q = sum(Fraction(x) ** 2 for x in f.values)
        return (n * q - s * s) / (n * n)
    return float(np.var(f.array()))


def log_moment(f: ScalarField, t: float) -> float:
    """``ln E exp(t (f - E f))`` under the uniform measure."""
    v = f.array()
    c = v - v.mean()
    return float(logsumexp(t * c) - math.log(len(v)))


def _bfs_order(space: FiniteMetricSpace, anchor: int) -> list[int]:
    if space.graph is not None and space.kind == "graph-shortest-path":
        dist = space.graph.bfs([anchor])
    else:
        dist = space.dist[anchor].astype(float)
    return sorted(range(space.n), key=lambda v: (dist[v], v))


def _tree_field_matrix(g: Graph, anchor: int) -> np.ndarray:
    """All +-1 edge-sign fields on a tree, anchored at ``anchor``."""
    n = g.n
    parent = [-1] * n
    order = [anchor]
    seen = {anchor}
    queue = deque([anchor])
    while queue:
        u = queue.popleft()
        for w in sorted(g.adj[u]):
            if w not in seen:
                seen.add(w)
                parent[w] = u
                order.append(w)
                queue.append(w)
    non_root = order[1:]
    edge_of = {v: i for i, v in enumerate(non_root)}
    paths = np.zeros((n - 1, n), dtype=np.int64)
    for v in non_root:
        u = v
        while u != anchor:
            paths[edge_of[u], v] = 1
            u = parent[u]
    count = 1 << (n - 1)
    bits = (np.arange(count, dtype=np.int64)[:, None] >> np.arange(n - 1, dtype=np.int64)) & 1
    signs = 1 - 2 * bits
    return signs @ paths


def _connected_tight(values: np.ndarray, pairs_u: np.ndarray, pairs_v: np.ndarray, n: int) -> bool:
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    comps = n
    for a, b in zip(pairs_u.tolist(), pairs_v.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            comps -= 1
            if comps == 1:
                return True
    return comps == 1


def extremal_field_matrix(
    space: FiniteMetricSpace, anchor: int = 0, cap: int | None = None
) -> tuple[np.ndarray, int]:
    """Integer matrix of extremal candidates and its scale.

    Each row holds ``scale * f`` for an anchored 1-Lipschitz ``f`` on the
    value grid whose tight pairs (``|f(u)-f(v)| = d(u,v)``) connect every
    point.  On graphs the grid is the integers and tight pairs reduce to the
    unit-difference edges.
    """
    is_graph = space.kind == "graph-shortest-path" and space.graph is not None
    if cap is None:
        cap = DEFAULT_ENUM_CAP if is_graph else DEFAULT_METRIC_ENUM_CAP
    n = space.n
    if n == 1:
        return np.zeros((1, 1), dtype=np.int64), 1
    if is_graph and space.graph.is_tree() and n <= max(cap, TREE_ENUM_LIMIT):
        return _tree_field_matrix(space.graph, anchor), 1
    if n > cap:
        raise ConcurvError("too-large", f"{n} points exceed the enumeration cap {cap}")
    step = space.unit_step()
    scale = step.denominator
    dist = _scaled_dist(space, scale)
    order = _bfs_order(space, anchor)
    pos = {v: i for i, v in enumerate(order)}
    bipartite = is_graph and space.graph.is_bipartite()
    # distances from each vertex to the vertices placed before it
    prev_d = [dist[order[i], order[:i]] for i in range(n)]
    prev_nb = []
    for i, v in enumerate(order):
        if is_graph:
            prev_nb.append([pos[w] for w in space.graph.adj[v] if pos[w] < i])
        else:
            prev_nb.append([])
    vals = np.zeros(n, dtype=np.int64)
    out: list[np.ndarray] = []

    def rec(i: int) -> None:
        if i == n:
            out.append(vals.copy())
            return
        v_d = prev_d[i]
        lo = int((vals[:i] - v_d).max())
        hi = int((vals[:i] + v_d).min())
        if lo > hi:
            return
        if bipartite:
            nb = prev_nb[i]
            base = vals[nb[0]]
            cands = [x for x in (base - scale, base + scale) if lo <= x <= hi]
            cands = [x for x in cands if all(abs(x - vals[j]) == scale for j in nb)]
        else:
            cands = range(lo, hi + 1)
        for x in cands:
            vals[i] = x
            rec(i + 1)
        vals[i] = 0

    rec(1)
    if not out:
        return np.zeros((0, n), dtype=np.int64), scale
    mat_ordered = np.array(out, dtype=np.int64)
    mat = np.empty_like(mat_ordered)
    mat[:, order] = mat_ordered
    if bipartite:
        return mat, scale
    if is_graph:
        pu = np.array([e[0] for e in space.graph.edges], dtype=np.int64)
        pv = np.array([e[1] for e in space.graph.edges], dtype=np.int64)
        tight_d = np.full(len(pu), scale, dtype=np.int64)
    else:
        iu, iv = np.triu_indices(n, 1)
        pu, pv, tight_d = iu, iv, dist[iu, iv]
    keep = []
    for r, row in enumerate(mat):
        tight = np.abs(row[pu] - row[pv]) == tight_d
        if _connected_tight(row, pu[tight], pv[tight], n):
            keep.append(r)
    return mat[keep], scale


def enumerate_extremal_fields(space: FiniteMetricSpace, anchor: int = 0, cap: int | None = None) -> list[ScalarField]:
    """Anchored integer (or half-integer) Lipschitz fields with spanning tight pairs."""
    mat, scale = extremal_field_matrix(space, anchor, cap)
    return [_row_to_field(space, row, scale, anchor) for row in mat]


def _variance_numerators(mat: np.ndarray) -> np.ndarray:
    n = mat.shape[1]
    s = mat.sum(axis=1)
    return n * (mat * mat).sum(axis=1) - s * s


def _tree_dp_max_variance(g: Graph, anchor: int) -> tuple[Fraction, list[np.ndarray]]:
    """Exact spread of a tree with every optimal +-1 field.

    For each rooted subtree with its root at 0 we keep, per attainable value
    sum, the largest sum of squares; shifting a subtree by ``s`` changes the
    sum of squares by ``2 s S + size s^2``, so these tables compose exactly.
    """
    n = g.n
    children: list[list[int]] = [[] for _ in range(n)]
    order = [anchor]
    seen = {anchor}
    queue = deque([anchor])
    while queue:
        u = queue.popleft()
        for w in sorted(g.adj[u]):
            if w not in seen:
                seen.add(w)
                children[u].append(w)
                order.append(w)
                queue.append(w)
    size = [1] * n
    subtree: list[dict[int, int]] = [dict() for _ in range(n)]
    prefix: list[list[dict[int, int]]] = [[] for _ in range(n)]
    edge_tab: list[dict[int, int]] = [dict() for _ in range(n)]
    for v in reversed(order):
        tabs = [{0: 0}]
        for c in children[v]:
            size[v] += size[c]
            et: dict[int, int] = {}
            for sgn in (1, -1):
                for s, q in subtree[c].items():
                    s2 = s + sgn * size[c]
                    q2 = q + 2 * sgn * s + size[c]
                    if et.get(s2, -1) < q2:
                        et[s2] = q2
            edge_tab[c] = et
            cur: dict[int, int] = {}
            for s1, q1 in tabs[-1].items():
                for s2, q2 in et.items():
                    key = s1 + s2
                    if cur.get(key, -1) < q1 + q2:
                        cur[key] = q1 + q2
            tabs.append(cur)
        prefix[v] = tabs
        subtree[v] = tabs[-1]
    root = subtree[anchor]
    scores = {s: n * q - s * s for s, q in root.items()}
    best = max(scores.values())

    def rec_subtree(v: int, s: int) -> list[dict[int, int]]:
        return rec_prefix(v, len(children[v]), s)

    def rec_prefix(v: int, j: int, s: int) -> list[dict[int, int]]:
        if j == 0:
            return [{v: 0}] if s == 0 else []
        c = children[v][j - 1]
        target = prefix[v][j][s]
        res = []
        for s1, q1 in prefix[v][j - 1].items():
            s2 = s - s1
            q2 = edge_tab[c].get(s2)
            if q2 is None or q1 + q2 != target:
                continue
            for left in rec_prefix(v, j - 1, s1):
                for right in rec_edge(c, s2):
                    merged = dict(left)
                    merged.update(right)
                    res.append(merged)
        return res

    def rec_edge(c: int, s2: int) -> list[dict[int, int]]:
        target = edge_tab[c][s2]
        res = []
        for sgn in (1, -1):
            s = s2 - sgn * size[c]
            q = subtree[c].get(s)
            if q is None or q + 2 * sgn * s + size[c] != target:
                continue
            for part in rec_subtree(c, s):
                res.append({u: x + sgn for u, x in part.items()})
        return res

    rows = []
    for s, sc in sorted(scores.items()):
        if sc == best:
            for assign in rec_subtree(anchor, s):
                rows.append(np.array([assign[u] for u in range(n)], dtype=np.int64))
    return Fraction(best, n * n), rows


def max_variance(space: FiniteMetricSpace, anchor: int = 0, cap: int | None = None) -> tuple[Fraction, list[ScalarField]]:
    """Spread ``c^2``: the largest variance of a 1-Lipschitz field, with all maximizers.

    Trees use an exact dynamic programme; everything else maximizes over the
    extremal enumeration (a superset of the polytope vertices, so the
    maximum is attained inside it).
    """
    g = space.graph
    if space.kind == "graph-shortest-path" and g is not None and g.is_tree() and g.n > 1:
        c2, rows = _tree_dp_max_variance(g, anchor)
        return c2, [_row_to_field(space, r, 1, anchor) for r in rows]
    mat, scale = extremal_field_matrix(space, anchor, cap)
    num = _variance_numerators(mat)
    best = int(num.max())
    n = space.n
    c2 = Fraction(best, n * n * scale * scale)
    return c2, [_row_to_field(space, row, scale, anchor) for row in mat[num == best]]


def geometric_grid(tmin: float = 1e-3, tmax: float = 50.0, tpoints: int = 400) -> np.ndarray:
    if not (0 < tmin < tmax) or tpoints < 2:
        raise ConcurvError("bad-grid", f"need 0 < tmin < tmax and >= 2 points, got {tmin}, {tmax}, {tpoints}")
    return np.geomspace(tmin, tmax, tpoints)


def _envelope_from_matrix(
    space: FiniteMetricSpace, mat: np.ndarray, scale: int, grid: np.ndarray
) -> LogMomentCurve:
    centered = mat.astype(float) / scale
    centered = centered - centered.mean(axis=1, keepdims=True)
    # the log-moment depends only on the multiset of values
    keys = np.sort(mat - mat.min(axis=1, keepdims=True), axis=1)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    reps = centered[first]
    log_n = math.log(space.n)
    values = np.empty(len(grid))
    witness_ids: list[np.ndarray] = []
    for i, t in enumerate(grid):
        lm = logsumexp(t * reps, axis=1) - log_n
        top = lm.max()
        values[i] = top
        classes = np.nonzero(lm >= top - TIE_TOL)[0]
        witness_ids.append(np.nonzero(np.isin(inverse, classes))[0])
    return LogMomentCurve(space, np.asarray(grid, dtype=float), values, witness_ids, mat, scale)


def log_moment_envelope(
    space: FiniteMetricSpace,
    grid: np.ndarray | None = None,
    anchor: int = 0,
    cap: int | None = None,
    candidates: tuple[np.ndarray, int] | None = None,
) -> LogMomentCurve:
    """``L_G(t) = max_f L_f(t)`` over the extremal enumeration (or given candidates)."""
    if grid is None:
        grid = geometric_grid()
    if np.any(np.asarray(grid) <= 0):
        raise ConcurvError("bad-grid", "t must be positive")
    mat, scale = candidates if candidates is not None else extremal_field_matrix(space, anchor, cap)
    return _envelope_from_matrix(space, mat, scale, np.asarray(grid, dtype=float))


def subgaussian_constant(
    space: FiniteMetricSpace,
    tmin: float = 1e-3,
    tmax: float = 50.0,
    tpoints: int = 400,
    anchor: int = 0,
    cap: int | None = None,
    candidates: tuple[np.ndarray, int] | None = None,
) -> SubgaussianEstimate:
    """Grid supremum of ``2 L_G(t) / t^2``.

    ``candidates`` replaces the exhaustive enumeration with a given integer
    matrix and scale; the result is then flagged as non-exhaustive.
    """
    grid = geometric_grid(tmin, tmax, tpoints)
    curve = log_moment_envelope(space, grid, anchor, cap, candidates)
    ratio = curve.ratio()
    i = int(np.argmax(ratio))
    mat, scale = curve.matrix, curve.scale
    num = _variance_numerators(mat)
    best_row = int(np.argmax(num))
    limit = Fraction(int(num[best_row]), space.n * space.n * scale * scale)
    lower = float(ratio[i])
    grid_sup = max(lower, float(limit))
    if float(limit) > lower:
        witness = _row_to_field(space, mat[best_row], scale, anchor)
        t_star = 0.0
    else:
        witness = curve.field(int(curve.witness_ids[i][0]))
        t_star = float(grid[i])
    exhaustive = candidates is None and space.kind == "graph-shortest-path"
    return SubgaussianEstimate(
        sigma2_lower=lower,
        sigma2_grid_sup=grid_sup,
        witness=witness,
        t_star=t_star,
        grid=(tmin, tmax, tpoints),
        limit_variance=limit,
        exhaustive=exhaustive,
        curve=curve,
    )


# ---------------------------------------------------------------- structure


@dataclass
class StructureReport:
    unimodal_hairs: bool
    origin_structure: bool
    origin_below_mean: bool
    descent: bool
    origin: list[int]
    origin_value: Number | None
    component_signs: list[int]
    witnesses: dict[str, Any]

    def as_dict(self) -> dict[str, Any]:
        return {
            "unimodal_hairs": self.unimodal_hairs,
            "origin_structure": self.origin_structure,
            "origin_below_mean": self.origin_below_mean,
            "descent": self.descent,
            "origin": self.origin,
            "origin_value": self.origin_value,
            "component_signs": self.component_signs,
            "witnesses": self.witnesses,
        }


def _is_unimodal(steps: list[Number]) -> bool:
    # one constant run of steps followed by another
    for split in range(len(steps) + 1):
        if len(set(steps[:split])) <= 1 and len(set(steps[split:])) <= 1:
            return True
    return False


def structure_checks(f: ScalarField) -> StructureReport:
    """Evaluate the four structural properties of an extremal field on a graph.

    * unimodal_hairs: along every hair the steps form at most two constant runs.
    * origin_structure: with ``O = {v : -1/2 < f(v) - E f <= 1/2}`` (on which
      ``f`` takes one value ``nu``), every component of ``G - O`` satisfies
      ``f(u) - nu = s d(u, O)`` for a single sign ``s``.
    * origin_below_mean: ``nu - f(u) = d(u, O)`` for every ``u`` with ``f(u) < E f``.
    * descent: every ``u`` with ``f(u) >= E f`` has a neighbour ``v`` with ``f(u) = f(v) + 1``.
    """
    space = f.space
    g = space.graph
    if g is None:
        raise ConcurvError("not-a-graph", "structure checks need a graph")
    vals = [Fraction(v) if not isinstance(v, float) else v for v in f.values]
    mean = sum(vals) / len(vals)
    half = Fraction(1, 2) if not isinstance(mean, float) else 0.5
    witnesses: dict[str, Any] = {}

    unimodal = True
    for hair in find_hairs(g):
        steps = [vals[b] - vals[a] for a, b in zip(hair, hair[1:])]
        if not _is_unimodal(steps):
            unimodal = False
            witnesses.setdefault("unimodal_hairs", [g.labels[v] for v in hair])

    origin = [v for v in range(g.n) if -half < vals[v] - mean <= half]
    origin_vals = {vals[v] for v in origin}
    nu = next(iter(origin_vals)) if len(origin_vals) == 1 else None
    structure_ok = nu is not None
    signs: list[int] = []
    below_ok = nu is not None
    if nu is None:
        witnesses["origin_structure"] = "origin set is empty or not level"
    else:
        d_o = g.bfs(origin)
        rest = [v for v in range(g.n) if v not in set(origin)]
        seen: set[int] = set()
        origin_set = set(origin)
        for start in rest:
            if start in seen:
                continue
            comp = []
            stack = [start]
            seen.add(start)
            while stack:
                u = stack.pop()
                comp.append(u)
                for w in g.adj[u]:
                    if w not in seen and w not in origin_set:
                        seen.add(w)
                        stack.append(w)
            comp_signs = set()
            for u in comp:
                diff = vals[u] - nu
                if diff == d_o[u]:
                    comp_signs.add(1)
                elif diff == -d_o[u]:
                    comp_signs.add(-1)
                else:
                    comp_signs.add(0)
            if len(comp_signs) == 1 and 0 not in comp_signs:
                signs.append(comp_signs.pop())
            else:
                signs.append(0)
                structure_ok = False
                witnesses.setdefault("origin_structure", g.labels[min(comp)])
        for u in range(g.n):
            if vals[u] < mean and nu - vals[u] != d_o[u]:
                below_ok = False
                witnesses.setdefault("origin_below_mean", g.labels[u])

    descent = True
    for u in range(g.n):
        if vals[u] >= mean and not any(vals[u] == vals[w] + 1 for w in g.adj[u]):
            descent = False
            witnesses.setdefault("descent", g.labels[u])
    return StructureReport(
        unimodal_hairs=unimodal,
        origin_structure=structure_ok,
        origin_below_mean=below_ok,
        descent=descent,
        origin=[g.labels[v] for v in origin],
        origin_value=nu,
        component_signs=signs,
        witnesses=witnesses,
    )


# ---------------------------------------------------------------- cycles, trees


def is_distance_function(f: ScalarField) -> bool:
    """True when ``f = +-d(., v) + c`` for some point ``v`` and constant ``c``."""
    d = f.space.dist.astype(np.int64) if f.space.integral else f.space.dist
    vals = [Fraction(x) for x in f.values]
    for v in range(f.space.n):
        for sgn in (1, -1):
            diffs = {vals[u] - sgn * int(d[v, u]) for u in range(f.space.n)}
            if len(diffs) == 1:
                return True
    return False


def odd_cycle_optimality(n: int, grid: np.ndarray | None = None) -> dict[str, Any]:
    """Check that every log-moment envelope witness on ``C_n`` is a distance function.

    For even ``n`` the report instead records whether every witness uses no
    value more than twice (the up-down labelling).
    """
    from .metric import cycle

    if n < 3 or n > 11:
        raise ConcurvError("bad-parameter", "cycle length must be in 3..11")
    space = cycle(n)
    curve = log_moment_envelope(space, grid)
    failures = []
    counts = []
    for i in range(len(curve.t)):
        ws = curve.witnesses(i)
        counts.append(len(ws))
        for w in ws:
            if n % 2 == 1:
                ok = is_distance_function(w)
            else:
                mult = {}
                for x in w.values:
                    mult[x] = mult.get(x, 0) + 1
                ok = max(mult.values()) <= 2
            if not ok:
                failures.append({"t": float(curve.t[i]), "field": list(w.values)})
    report: dict[str, Any] = {
        "n": n,
        "odd": n % 2 == 1,
        "grid_points": len(curve.t),
        "witness_counts": counts,
        "holds": not failures,
        "failures": failures[:10],
    }
    if n % 2 == 0:
        report["even_cycle_witness"] = [int(x) for x in space.dist[0]]
    return report


def tree_conjecture_search(trials: int, max_n: int, seed: int = 0, min_n: int = 3) -> dict[str, Any]:
    """Random-tree search for a root ``r`` with ``|f(u) - f(r)| = d(u, r)``.

    Every variance-optimal field of each sampled tree is tested; for trees
    that are not paths the report also records whether ``r`` can be taken of
    degree at least three.
    """
    import networkx as nx

    from .metric import graph_space

    rng = np.random.default_rng(seed)
    rows = []
    counterexamples = []
    for trial in range(trials):
        n = int(rng.integers(min_n, max_n + 1))
        seq = rng.integers(0, n, size=n - 2).tolist() if n > 2 else []
        tree = nx.from_prufer_sequence(seq) if n > 2 else nx.path_graph(n)
        space = graph_space(list(tree.edges()), n)
        res = root_search(space)
        rows.append({"n": n, "edges": [list(e) for e in tree.edges()], **res})
        if not res["holds"]:
            counterexamples.append(rows[-1])
    return {
        "trials": trials,
        "max_n": max_n,
        "seed": seed,
        "holds": not counterexamples,
        "counterexamples": counterexamples,
        "results": rows,
    }


def root_search(space: FiniteMetricSpace) -> dict[str, Any]:
    """Roots witnessing the tree conjecture for every variance-optimal field."""
    g = space.graph
    c2, fields = max_variance(space)
    d = space.dist.astype(np.int64)
    all_ok = True
    high_degree_ok = True
    per_field = []
    is_path = max(g.degree(v) for v in range(g.n)) <= 2
    for f in fields:
        vals = np.array(f.values, dtype=np.int64)
        roots = [r for r in range(g.n) if (np.abs(vals - vals[r]) == d[r]).all()]
        if not roots:
            all_ok = False
        if not is_path and not any(g.degree(r) >= 3 for r in roots):
            high_degree_ok = False
        per_field.append({"field": [int(x) for x in vals], "roots": [g.labels[r] for r in roots]})
    return {
        "c2": c2,
        "holds": all_ok,
        "high_degree_root": high_degree_ok if not is_path else None,
        "fields": per_field,
    }


# ---------------------------------------------------------------- six-vertex example


def six_vertex_space() -> FiniteMetricSpace:
    """Path v1..v4 with a pendant w1 on v2 and a pendant w2 on v3."""
    from .metric import graph_space

    labels = ["v1", "v2", "v3", "v4", "w1", "w2"]
    edges = [(0, 1), (1, 2), (2, 3), (4, 1), (5, 2)]
    return graph_space(edges, 6, labels)


def six_vertex_example(ts: Sequence[float] = (3, 4, 5)) -> dict[str, Any]:
    """Compare the two extremal fields X1, X2 on :func:`six_vertex_space`.

    X1 and X2 agree except at w2 (4 versus 2).  X1 maximizes the variance,
    yet its log-moment falls below that of X2 for large t, so the positive
    side of the origin structure is not forced for log-moment optimizers.
    """
    space = six_vertex_space()
    base = {"v1": 1, "v2": 2, "v3": 3, "v4": 4, "w1": 1}
    x1 = ScalarField.from_mapping(space, {**base, "w2": 4})
    x2 = ScalarField.from_mapping(space, {**base, "w2": 2})
    c2, _ = max_variance(space)
    rows = []
    for t in ts:
        l1, l2 = log_moment(x1, float(t)), log_moment(x2, float(t))
        rows.append({"t": float(t), "L_X1": l1, "L_X2": l2, "margin": l2 - l1})
    return {
        "lipschitz": [is_lipschitz(x1)[0], is_lipschitz(x2)[0]],
        "variance_X1": variance(x1),
        "variance_X2": variance(x2),
        "max_variance": c2,
        "x1_variance_optimal": variance(x1) == c2,
        "rows": rows,
        "holds": all(r["margin"] > 1e-12 for r in rows),
    }
