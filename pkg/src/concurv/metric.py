"""Finite metric spaces, graphs and the named families used by the toolkit.

Distances are exact: graph metrics are integer arrays, explicit metrics may
carry :class:`fractions.Fraction` entries in an object array.  Every space
is materialized, so constructions are guarded by a point cap.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import ConcurvError

DEFAULT_POINT_CAP = 10**6
# A dense distance matrix is kept for every space; beyond this many points it
# would not fit in memory, whatever the configured point cap says.
DENSE_POINT_LIMIT = 6000

KINDS = ("graph-shortest-path", "hamming", "explicit")


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected connected graph on vertices ``0..n-1``."""

    n: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple[Hashable, ...]
    adj: tuple[frozenset[int], ...] = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> frozenset[int]:
        return self.adj[v]

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adj], dtype=np.int64)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def index(self, label: Hashable) -> int:
        return self.labels.index(label)

    def bfs(self, sources: Iterable[int]) -> np.ndarray:
        """Multi-source BFS distances; unreachable vertices get -1."""
        dist = np.full(self.n, -1, dtype=np.int64)
        queue: deque[int] = deque()
        for s in sources:
            if dist[s] < 0:
                dist[s] = 0
                queue.append(s)
        while queue:
            u = queue.popleft()
            for w in self.adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return dist

    def is_tree(self) -> bool:
        return self.m == self.n - 1

    def is_bipartite(self) -> bool:
        colour = self.bfs([0]) % 2
        return all(colour[u] != colour[v] for u, v in self.edges)

    def is_regular(self) -> bool:
        return len({len(a) for a in self.adj}) == 1

    def to_json(self) -> dict[str, Any]:
        return {"n": self.n, "edges": [list(e) for e in self.edges]}


def build_graph(
    edge_list: Iterable[Sequence[int]],
    n: int,
    labels: Sequence[Hashable] | None = None,
    require_connected: bool = True,
) -> Graph:
    """Validate an edge list and return a :class:`Graph`.

    Duplicate edges are merged.  Raises ``self-loop`` and ``disconnected``.
    """
    if n < 1:
        raise ConcurvError("empty", "a graph needs at least one vertex")
    seen: set[tuple[int, int]] = set()
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for e in edge_list:
        u, v = int(e[0]), int(e[1])
        if not (0 <= u < n and 0 <= v < n):
            raise ConcurvError("bad-index", f"edge ({u},{v}) outside [0,{n})")
        if u == v:
            raise ConcurvError("self-loop", f"vertex {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        nbrs[u].add(v)
        nbrs[v].add(u)
    if labels is None:
        labels = tuple(range(n))
    elif len(labels) != n:
        raise ConcurvError("bad-labels", "label count differs from n")
    g = Graph(
        n=n,
        edges=tuple(sorted(seen)),
        labels=tuple(labels),
        adj=tuple(frozenset(s) for s in nbrs),
    )
    if require_connected and n > 1 and (g.bfs([0]) < 0).any():
        raise ConcurvError("disconnected", "every vertex must be reachable")
    return g


def _compact(dist: np.ndarray) -> np.ndarray:
    top = int(dist.max()) if dist.size else 0
    if top < 127:
        return dist.astype(np.int8)
    if top < 32767:
        return dist.astype(np.int16)
    return dist.astype(np.int64)


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Ordered point labels with an exact distance matrix.

    ``graph`` is present when the metric is the shortest-path metric of a
    graph whose edges are the unit-distance pairs (graph and Hamming kinds).
    """

    points: tuple[Hashable, ...]
    dist: np.ndarray
    kind: str
    graph: Graph | None = None
    _index: dict[Hashable, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConcurvError("bad-kind", self.kind)
        self._index.update({p: i for i, p in enumerate(self.points)})

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def integral(self) -> bool:
        return self.dist.dtype.kind in "iu"

    def index(self, label: Hashable) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ConcurvError("unknown-point", repr(label)) from None

    def d(self, i: int, j: int) -> int | Fraction:
        x = self.dist[i, j]
        return int(x) if self.integral else Fraction(x)

    def eccentricity(self, i: int) -> int | Fraction:
        row = self.dist[i]
        return int(row.max()) if self.integral else max(Fraction(x) for x in row)

    def diameter(self) -> int | Fraction:
        return int(self.dist.max()) if self.integral else max(Fraction(x) for x in self.dist.flat)

    def float_dist(self) -> np.ndarray:
        return self.dist.astype(float)

    def unit_step(self) -> Fraction:
        """Value grid used by extremal enumeration.

        Graph metrics only need integers.  Metrics without unit steps (for
        instance Hamming metrics on permutations, where distances jump by 2)
        have non-integral extreme points, so a half-integer grid is used and
        results over it are lower estimates.
        """
        if self.kind == "graph-shortest-path":
            return Fraction(1)
        return Fraction(1, 2)


def shortest_path_metric(g: Graph) -> FiniteMetricSpace:
    """All-pairs BFS distances of a connected graph."""
    if g.n > DENSE_POINT_LIMIT:
        raise ConcurvError("too-large", f"{g.n} vertices exceed the dense limit")
    if g.n == 1:
        dist = np.zeros((1, 1), dtype=np.int8)
    else:
        rows = [u for u, v in g.edges] + [v for u, v in g.edges]
        cols = [v for u, v in g.edges] + [u for u, v in g.edges]
        mat = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n, g.n))
        raw = shortest_path(mat, directed=False, unweighted=True)
        if not np.isfinite(raw).all():
            raise ConcurvError("disconnected")
        dist = _compact(raw.astype(np.int64))
    return FiniteMetricSpace(points=g.labels, dist=dist, kind="graph-shortest-path", graph=g)


def graph_space(edges: Iterable[Sequence[int]], n: int, labels: Sequence[Hashable] | None = None) -> FiniteMetricSpace:
    return shortest_path_metric(build_graph(edges, n, labels))


def _combine(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    na, nb = a.shape[0], b.shape[0]
    if metric == "l0":
        # the accumulated factor already counts differing coordinates
        b = (b != 0).astype(np.int64)
    x = a[:, None, :, None]
    y = b[None, :, None, :]
    if metric in ("l1", "l0"):
        out = x + y
    elif metric == "linf":
        out = np.maximum(x, y)
    else:
        raise ConcurvError("bad-metric", metric)
    return out.reshape(na * nb, na * nb)


def product(
    spaces: Sequence[FiniteMetricSpace],
    metric: str = "l1",
    cap: int = DEFAULT_POINT_CAP,
) -> FiniteMetricSpace:
    """Product space with tuple labels in lexicographic index order.

    ``l1`` sums coordinate distances, ``l0`` counts differing coordinates,
    ``linf`` takes the largest coordinate distance.
    """
    if not spaces:
        raise ConcurvError("empty", "no factors")
    total = 1
    for s in spaces:
        total *= s.n
    if total > cap or total > DENSE_POINT_LIMIT:
        raise ConcurvError("too-large", f"{total} points")
    integral = all(s.integral for s in spaces)
    dist = spaces[0].dist.astype(np.int64) if integral else spaces[0].dist.astype(object)
    if metric == "l0":
        dist = (dist != 0).astype(np.int64)
    for s in spaces[1:]:
        other = s.dist.astype(np.int64) if integral else s.dist.astype(object)
        dist = _combine(dist, other, metric)
    points = tuple(
        tuple(s.points[i] for s, i in zip(spaces, idx))
        for idx in itertools.product(*(range(s.n) for s in spaces))
    )
    graph = None
    kind = "explicit"
    if metric == "l1" and all(s.kind == "graph-shortest-path" for s in spaces):
        kind = "graph-shortest-path"
    elif metric == "l0":
        kind = "hamming"
    if kind != "explicit":
        ii, jj = np.nonzero(np.triu(dist == 1))
        graph = build_graph(zip(ii.tolist(), jj.tolist()), total, points)
    if integral:
        dist = _compact(dist)
    return FiniteMetricSpace(points=points, dist=dist, kind=kind, graph=graph)


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64)
    out = np.zeros(x.shape, dtype=np.int64)
    while x.any():
        out += (x & np.uint64(1)).astype(np.int64)
        x >>= np.uint64(1)
    return out


def mask_to_set(mask: int) -> frozenset[int]:
    """Bitmask -> subset of {1, 2, ...} (bit ``i`` is element ``i+1``)."""
    return frozenset(i + 1 for i in range(mask.bit_length()) if mask >> i & 1)


def set_to_mask(s: Iterable[int]) -> int:
    m = 0
    for e in s:
        m |= 1 << (int(e) - 1)
    return m


def complete(k: int) -> FiniteMetricSpace:
    return graph_space(itertools.combinations(range(k), 2), k)


def cycle(n: int) -> FiniteMetricSpace:
    if n < 3:
        raise ConcurvError("bad-parameter", "cycle needs n >= 3")
    return graph_space([(i, (i + 1) % n) for i in range(n)], n)


def path(n: int) -> FiniteMetricSpace:
    return graph_space([(i, i + 1) for i in range(n - 1)], n)


def hypercube(d: int) -> FiniteMetricSpace:
    """H_d with points the subsets of {1..d}; point index equals bitmask."""
    size = 1 << d
    if size > DENSE_POINT_LIMIT:
        raise ConcurvError("too-large", f"H_{d} has {size} points")
    idx = np.arange(size, dtype=np.int64)
    dist = _compact(_popcount(idx[:, None] ^ idx[None, :]))
    edges = [(v, v | 1 << b) for v in range(size) for b in range(d) if not v >> b & 1]
    labels = tuple(mask_to_set(v) for v in range(size))
    g = build_graph(edges, size, labels)
    return FiniteMetricSpace(points=labels, dist=dist, kind="graph-shortest-path", graph=g)


def boolean_levels(n: int, levels: Iterable[int]) -> FiniteMetricSpace:
    """Subsets of {1..n} with size in ``levels``; symmetric-difference metric."""
    levels = sorted(set(int(r) for r in levels))
    masks = [m for m in range(1 << n) if bin(m).count("1") in levels]
    if len(masks) > DENSE_POINT_LIMIT:
        raise ConcurvError("too-large", f"{len(masks)} points")
    arr = np.array(masks, dtype=np.int64)
    dist = _compact(_popcount(arr[:, None] ^ arr[None, :]))
    labels = tuple(mask_to_set(m) for m in masks)
    graph = None
    if any(b - a == 1 for a, b in zip(levels, levels[1:])) or len(masks) == 1:
        ii, jj = np.nonzero(np.triu(dist == 1))
        try:
            graph = build_graph(zip(ii.tolist(), jj.tolist()), len(masks), labels)
        except ConcurvError:
            graph = None
    return FiniteMetricSpace(points=labels, dist=dist, kind="hamming", graph=graph)


def symmetric_group(n: int) -> FiniteMetricSpace:
    """Permutations of ``0..n-1`` in lexicographic order, Hamming distance."""
    if n > 8:
        raise ConcurvError("too-large", "symmetric_group supports n <= 8")
    perms = list(itertools.permutations(range(n)))
    if len(perms) > DENSE_POINT_LIMIT:
        raise ConcurvError("too-large", f"S_{n} has {len(perms)} points (dense limit)")
    arr = np.array(perms, dtype=np.int64).reshape(len(perms), n)
    dist = (arr[:, None, :] != arr[None, :, :]).sum(axis=2)
    return FiniteMetricSpace(points=tuple(perms), dist=_compact(dist), kind="hamming")


def scaled_edge(r: int | Fraction | str) -> FiniteMetricSpace:
    """Two points ``0`` and ``1`` at distance ``r``."""
    r = Fraction(r)
    if r <= 0:
        raise ConcurvError("bad-parameter", "distance must be positive")
    if r.denominator == 1:
        dist = np.array([[0, int(r)], [int(r), 0]], dtype=np.int64)
    else:
        dist = np.array([[Fraction(0), r], [r, Fraction(0)]], dtype=object)
    return FiniteMetricSpace(points=(0, 1), dist=dist, kind="explicit")


def _labelled_graph(labels: list[str], edges: list[tuple[str, str]]) -> FiniteMetricSpace:
    pos = {lab: i for i, lab in enumerate(labels)}
    return graph_space([(pos[a], pos[b]) for a, b in edges], len(labels), labels)


def tripod(k: int) -> FiniteMetricSpace:
    """Unbalanced tripod: a root with hairs of k, k and 2k further vertices."""
    if k < 1:
        raise ConcurvError("bad-parameter", "tripod needs k >= 1")
    xs = [f"x{i}" for i in range(1, k + 1)]
    ys = [f"y{i}" for i in range(1, k + 1)]
    zs = [f"z{i}" for i in range(1, 2 * k + 1)]
    edges = [("r", "x1"), ("r", "y1"), ("r", "z1")]
    for chain in (xs, ys, zs):
        edges += list(zip(chain, chain[1:]))
    return _labelled_graph(["r"] + xs + ys + zs, edges)


def tripod_star(k: int, chords: bool = True) -> FiniteMetricSpace:
    """Root with three hairs of k vertices, k single-vertex hairs, plus three chords.

    ``chords=False`` gives the underlying tree.
    """
    if k < 3:
        raise ConcurvError("bad-parameter", "tripod_star needs k >= 3")
    xs = [f"x{i}" for i in range(1, k + 1)]
    ys = [f"y{i}" for i in range(1, k + 1)]
    zs = [f"z{i}" for i in range(1, k + 1)]
    ws = [f"w{i}" for i in range(1, k + 1)]
    edges = [("r", "x1"), ("r", "y1"), ("r", "z1")] + [("r", w) for w in ws]
    for chain in (xs, ys, zs):
        edges += list(zip(chain, chain[1:]))
    if chords:
        edges += [("w1", "z2"), ("w1", "w2"), ("w1", "w3")]
    return _labelled_graph(["r"] + xs + ys + zs + ws, edges)


def caterpillar(k: int) -> FiniteMetricSpace:
    """Path u1..u2k with one leaf w_i hanging off each u_i."""
    if k < 1:
        raise ConcurvError("bad-parameter", "caterpillar needs k >= 1")
    us = [f"u{i}" for i in range(1, 2 * k + 1)]
    ws = [f"w{i}" for i in range(1, 2 * k + 1)]
    edges = list(zip(us, us[1:])) + list(zip(us, ws))
    return _labelled_graph(us + ws, edges)


def petersen() -> FiniteMetricSpace:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return graph_space(outer + spokes + inner, 10)


_FAMILIES = {
    "complete": complete,
    "cycle": cycle,
    "path": path,
    "hypercube": hypercube,
    "symmetric_group": symmetric_group,
    "scaled_edge": scaled_edge,
    "tripod": tripod,
    "tripod_star": tripod_star,
    "caterpillar": caterpillar,
    "petersen": petersen,
}


def family(name: str, *params: Any, cap: int = DEFAULT_POINT_CAP) -> FiniteMetricSpace:
    """Build a named family.  ``boolean_levels`` takes ``(n, levels)``."""
    if name == "boolean_levels":
        n, levels = params
        space = boolean_levels(int(n), levels)
    elif name in _FAMILIES:
        fn = _FAMILIES[name]
        args = [p if name == "scaled_edge" else int(p) for p in params]
        space = fn(*args)
    else:
        raise ConcurvError("unknown-family", name)
    if space.n > cap:
        raise ConcurvError("too-large", f"{space.n} points > cap {cap}")
    return space


def parse_space(text: str, cap: int = DEFAULT_POINT_CAP) -> FiniteMetricSpace:
    """Parse ``"tripod:4"``, ``"boolean_levels:6:2,4"``, ``"product:l0:complete:3,complete:4"``,
    a JSON graph ``{"n":..,"edges":..}`` or a path to such a JSON file."""
    text = text.strip()
    if text.startswith("{"):
        data = json.loads(text)
        return shortest_path_metric(build_graph(data["edges"], int(data["n"]), data.get("labels")))
    if text.endswith(".json"):
        with open(text, encoding="utf-8") as fh:
            return parse_space(fh.read(), cap)
    head, _, rest = text.partition(":")
    if head == "product":
        metric, _, factors = rest.partition(":")
        parts = [parse_space(p.replace("=", ":"), cap) for p in factors.split(",")]
        return product(parts, metric, cap)
    if head == "boolean_levels":
        n, _, levels = rest.partition(":")
        return family("boolean_levels", int(n), [int(x) for x in levels.split(",")], cap=cap)
    params = [p for p in rest.split(":") if p] if rest else []
    if head not in _FAMILIES:
        raise ConcurvError("unknown-family", head)
    try:
        return family(head, *params, cap=cap)
    except TypeError as exc:
        raise ConcurvError("bad-parameter", str(exc)) from None


def find_hairs(g: Graph) -> list[list[int]]:
    """Maximal pendant paths ``w_0, ..., w_k`` ending at a leaf ``w_k``.

    Each hair starts at the first vertex of degree other than two met when
    walking in from the leaf.  For a path graph both walks cover the same
    vertices; only the one starting at the smaller endpoint is kept.
    """
    hairs: list[list[int]] = []
    seen: set[frozenset[int]] = set()
    leaves = [v for v in range(g.n) if g.degree(v) == 1]
    for leaf in leaves:
        seq = [leaf]
        prev, cur = leaf, next(iter(g.adj[leaf]))
        while g.degree(cur) == 2:
            seq.append(cur)
            nxt = [w for w in g.adj[cur] if w != prev][0]
            prev, cur = cur, nxt
        seq.append(cur)
        seq.reverse()
        key = frozenset(seq)
        if key in seen:
            continue
        if g.degree(seq[0]) == 1:
            # whole graph is a path: orient from the smaller endpoint
            if seq[0] > seq[-1]:
                seq.reverse()
        seen.add(key)
        hairs.append(seq)
    hairs.sort(key=lambda h: (min(h[0], h[-1]), h))
    return hairs


def check_metric(space: FiniteMetricSpace, samples: int = 100_000, seed: int = 0) -> bool:
    """Symmetry, zero diagonal and triangle inequality.

    Exhaustive up to 1000 points, sampled triples above that.
    """
    d = space.dist if space.integral else space.dist.astype(object)
    if space.integral:
        d = d.astype(np.int64)
    if any(d[i, i] != 0 for i in range(space.n)):
        return False
    if not (d == d.T).all():
        return False
    if space.n <= 1000:
        for k in range(space.n):
            if (d > d[:, k : k + 1] + d[k : k + 1, :]).any():
                return False
        return True
    rng = np.random.default_rng(seed)
    tri = rng.integers(0, space.n, size=(samples, 3))
    i, j, k = tri[:, 0], tri[:, 1], tri[:, 2]
    return bool((d[i, j] <= d[i, k] + d[k, j]).all())
