"""Weighted random geodesics: exact midpoint laws and the teleporting random walk."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from .errors import ConcurvError
from .metric import FiniteMetricSpace, graph_space

EXACT_LAW_CAP = 400
MIN_MC_STEPS = 100_000


@dataclass
class WeightedGeodesic:
    """A shortest path with its weight under one of the two variants."""

    vertices: tuple[int, ...]
    weight: Fraction
    variant: int


def path_weight(space: FiniteMetricSpace, vertices: tuple[int, ...], variant: int = 1) -> Fraction:
    """``prod 1/deg(u_i)`` over interior vertices (variant 1) or
    ``(deg x + deg y) prod 1/(deg u + 1)`` over all vertices (variant 2)."""
    g = space.graph
    if variant == 1:
        w = Fraction(1)
        for u in vertices[1:-1]:
            w /= g.degree(u)
        return w
    if variant == 2:
        w = Fraction(g.degree(vertices[0]) + g.degree(vertices[-1]))
        for u in vertices:
            w /= g.degree(u) + 1
        return w
    raise ConcurvError("bad-parameter", "variant must be 1 or 2")


def enumerate_geodesics(space: FiniteMetricSpace, x: int, y: int, variant: int = 1, cap: int = 10**5) -> list[WeightedGeodesic]:
    """Every shortest path from x to y with its weight (small graphs only)."""
    g = space.graph
    D = space.dist
    out: list[WeightedGeodesic] = []

    def rec(path: list[int]) -> None:
        if len(out) > cap:
            raise ConcurvError("too-large", "geodesic count exceeds cap")
        u = path[-1]
        if u == y:
            out.append(WeightedGeodesic(tuple(path), path_weight(space, tuple(path), variant), variant))
            return
        for w in sorted(g.adj[u]):
            if D[w, y] == D[u, y] - 1:
                path.append(w)
                rec(path)
                path.pop()

    rec([x])
    return out


def _half_weights(space: FiniteMetricSpace, x: int, variant: int) -> list[Fraction]:
    """``F_x(u)``: sum over geodesics x..u of the per-vertex factors after x (variant 1)
    or including x (variant 2), computed along BFS layers."""
    g = space.graph
    D = space.dist[x].astype(np.int64)
    order = np.argsort(D, kind="stable").tolist()
    F = [Fraction(0)] * g.n
    F[x] = Fraction(1) if variant == 1 else Fraction(1, g.degree(x) + 1)
    for u in order:
        if u == x:
            continue
        s = sum((F[w] for w in g.adj[u] if D[w] == D[u] - 1), Fraction(0))
        F[u] = s / g.degree(u) if variant == 1 else s / (g.degree(u) + 1)
    return F


def exact_midpoint_law(
    space: FiniteMetricSpace, variant: int = 1, c: Fraction | int = 1, cap: int = EXACT_LAW_CAP
) -> dict[str, Any]:
    """Law of the middle vertex of a weighted random even-length geodesic.

    Every ordered pair ``x != y`` at even distance ``2m`` contributes all its
    geodesics; a geodesic through ``u`` has weight ``F_x(u) F_y(u) deg(u)``
    (variant 1) or ``(deg x + deg y) F_x(u) F_y(u) (deg u + 1)`` (variant 2),
    times ``c^{2m}`` when ``c < 1`` (the law seen by the walk at finite c).
    Odd-length geodesics have no middle vertex; their share of the total
    weight is reported as ``excluded_mass``.
    """
    g = space.graph
    if g is None:
        raise ConcurvError("not-a-graph", "needs a graph")
    if g.n > cap:
        raise ConcurvError("too-large", f"n <= {cap}")
    if variant not in (1, 2):
        raise ConcurvError("bad-parameter", "variant must be 1 or 2")
    c = Fraction(c)
    n = g.n
    D = space.dist.astype(np.int64)
    deg = [g.degree(u) for u in range(n)]
    F = [_half_weights(space, x, variant) for x in range(n)]
    mass = [Fraction(0)] * n
    odd = Fraction(0)
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            L = int(D[x, y])
            cw = c**L
            if L % 2:
                tot = F[x][y] * deg[y] if variant == 1 else (deg[x] + deg[y]) * F[x][y]
                odd += cw * tot
                continue
            m = L // 2
            mids = np.nonzero((D[x] == m) & (D[y] == m))[0]
            for u in mids.tolist():
                if variant == 1:
                    w = F[x][u] * F[y][u] * deg[u]
                else:
                    w = (deg[x] + deg[y]) * F[x][u] * F[y][u] * (deg[u] + 1)
                mass[u] += cw * w
    even = sum(mass, Fraction(0))
    report: dict[str, Any] = {
        "variant": variant,
        "c": c,
        "n": n,
        "excluded_mass": odd / (odd + even) if odd + even else Fraction(0),
    }
    if even == 0:
        report.update({"law": None, "no_even_geodesics": True, "proportional": None})
        return report
    law = [m / even for m in mass]
    attaining = [u for u in range(n) if law[u] > 0]
    ratios = {u: law[u] / deg[u] for u in attaining}
    kappa = set(ratios.values())
    report.update(
        {
            "law": law,
            "no_even_geodesics": False,
            "attaining": attaining,
            "non_attaining": [u for u in range(n) if law[u] == 0],
            "ratios": ratios,
            "proportional": len(kappa) == 1,
            "kappa": next(iter(kappa)) if len(kappa) == 1 else None,
            "ratio_spread": float(max(kappa) / min(kappa)),
        }
    )
    return report


def walk_stationary(space: FiniteMetricSpace, variant: int = 1, c: float = 0.9) -> np.ndarray:
    """Stationary law of the token process (walk step or edge teleport)."""
    g = space.graph
    n = g.n
    deg = np.array([g.degree(u) for u in range(n)], dtype=float)
    A = np.zeros((n, n))
    for u, v in g.edges:
        A[u, v] = A[v, u] = 1.0
    walk = A / deg[:, None]
    tele = np.tile(deg / deg.sum(), (n, 1))
    stay = np.full(n, c) if variant == 1 else deg / (deg + 1)
    P = stay[:, None] * walk + (1 - stay)[:, None] * tele
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    return pi / pi.sum()


def mc_teleport_walk(
    space: FiniteMetricSpace, c: float = 0.9, steps: int = 10**6, seed: int = 0, variant: int = 1, batches: int = 50
) -> dict[str, Any]:
    """Simulate the token process and tally midpoints of geodesic segments.

    A segment runs from a teleport landing to the vertex before the next
    teleport.  Segments that are even-length geodesics (length > 0) vote for
    their middle vertex.  Landings are independent draws proportional to
    degree, so accepted segments are i.i.d. and the per-vertex tolerance is
    the binomial ``3 sigma``.  Occupancy uses batch means.
    """
    g = space.graph
    if g is None:
        raise ConcurvError("not-a-graph", "needs a graph")
    if steps < MIN_MC_STEPS:
        raise ConcurvError("bad-parameter", f"steps >= {MIN_MC_STEPS}")
    if variant == 1 and not 0 < c < 1:
        raise ConcurvError("bad-parameter", "c must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n = g.n
    D = space.dist.astype(np.int64)
    deg = np.array([g.degree(u) for u in range(n)])
    nbrs = [sorted(g.adj[u]) for u in range(n)]
    ends = np.array(g.edges, dtype=np.int64).reshape(-1, 2)
    stay = np.full(n, c) if variant == 1 else deg / (deg + 1.0)
    coin = rng.random(steps)
    pick = rng.random(steps)
    edge_pick = rng.integers(0, len(ends), size=steps)
    side = rng.integers(0, 2, size=steps)
    z = int(ends[rng.integers(len(ends)), rng.integers(2)])
    visits = np.zeros(n, dtype=np.int64)
    batch_len = steps // batches
    batch_counts = np.zeros((batches, n), dtype=np.int64)
    tally = np.zeros(n, dtype=np.int64)
    seg = [z]
    segments = accepted = rejected = odd = 0

    def close(seg: list[int]) -> None:
        nonlocal segments, accepted, rejected, odd
        segments += 1
        L = len(seg) - 1
        if L == 0:
            return
        if D[seg[0], seg[-1]] != L:
            rejected += 1
            return
        if L % 2:
            odd += 1
            return
        accepted += 1
        tally[seg[L // 2]] += 1

    for i in range(steps):
        visits[z] += 1
        b = min(i // batch_len, batches - 1)
        batch_counts[b, z] += 1
        if coin[i] < stay[z]:
            nb = nbrs[z]
            z = nb[int(pick[i] * len(nb))]
            seg.append(z)
        else:
            close(seg)
            z = int(ends[edge_pick[i], side[i]])
            seg = [z]
    close(seg)
    target_occ = deg / deg.sum()
    occ = visits / visits.sum()
    frac = batch_counts / batch_counts.sum(axis=1, keepdims=True)
    se = frac.std(axis=0, ddof=1) / math.sqrt(batches)
    occ_ok = np.abs(occ - target_occ) <= 3 * np.maximum(se, 1e-12)
    exact = exact_midpoint_law(space, variant, Fraction(c).limit_denominator(10**6) if variant == 1 else 1)
    out: dict[str, Any] = {
        "variant": variant,
        "c": c,
        "steps": steps,
        "seed": seed,
        "segments": segments,
        "accepted": accepted,
        "rejected_non_geodesic": rejected,
        "odd_geodesics": odd,
        "tally": tally.tolist(),
        "occupancy": occ.tolist(),
        "occupancy_degree_proportional": bool(occ_ok.all()),
        "occupancy_max_z": float(np.max(np.abs(occ - target_occ) / np.maximum(se, 1e-12))),
    }
    if accepted and exact["law"] is not None:
        p = np.array([float(x) for x in exact["law"]])
        emp = tally / accepted
        sd = np.sqrt(p * (1 - p) / accepted)
        zscores = np.where(sd > 0, np.abs(emp - p) / np.where(sd > 0, sd, 1), np.where(emp > 0, np.inf, 0.0))
        mask = p > 0
        chi2 = float(((tally[mask] - accepted * p[mask]) ** 2 / (accepted * p[mask])).sum())
        out.update(
            {
                "empirical_law": emp.tolist(),
                "exact_law": p.tolist(),
                "max_z": float(zscores.max()),
                "within_3sigma": bool((zscores <= 3).all()),
                "chi2": chi2,
            }
        )
    return out


def power_law_graph(n: int, exponent: float, seed: int = 0, k_min: int = 2, retries: int = 20) -> FiniteMetricSpace:
    """Configuration-model sample with ``P(deg = k) ~ k^-exponent`` on ``k_min..n-1``.

    Loops and multi-edges are dropped and the largest component is kept; the
    sample is redrawn (with derived seeds) until that component holds at
    least half of the vertices.
    """
    import networkx as nx

    if exponent <= 1:
        raise ConcurvError("bad-parameter", "exponent must exceed 1")
    if n < 4:
        raise ConcurvError("bad-parameter", "n >= 4")
    ks = np.arange(k_min, n)
    probs = ks ** (-float(exponent))
    probs /= probs.sum()
    for attempt in range(retries):
        rng = np.random.default_rng([seed, attempt])
        degs = rng.choice(ks, size=n, p=probs)
        if degs.sum() % 2:
            degs[int(np.argmin(degs))] += 1
        G = nx.configuration_model(degs.tolist(), seed=int(rng.integers(2**31)))
        G = nx.Graph(G)
        G.remove_edges_from(nx.selfloop_edges(G))
        comp = max(nx.connected_components(G), key=len)
        if len(comp) >= n / 2:
            H = nx.convert_node_labels_to_integers(G.subgraph(sorted(comp)).copy(), ordering="sorted")
            return graph_space(sorted(H.edges()), H.number_of_nodes())
    raise ConcurvError("generation-failed", f"no sample with a large component after {retries} tries")
