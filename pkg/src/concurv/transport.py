"""Optimal transport on finite metric spaces and the entropy interpolation checks built on it.

Plans on supports of at most ``EXACT_LIMIT`` atoms are solved with an exact
rational min-cost flow (successive shortest paths); larger ones fall back to
the HiGHS LP in floating point.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConcurvError
from .hypercube import C_R_atoms, C_R_size, hypercube_dim, midpoints_tilde, phi_tilde
from .metric import FiniteMetricSpace

EXACT_LIMIT = 64
IPF_TOL = 1e-10
IPF_MAX_ITER = 100_000
STRONG_PLAN_CAP = 1000

Mass = Fraction | float
Atom = int | tuple[int, int]


def _norm_atom(x: Atom) -> Atom:
    if isinstance(x, tuple):
        return (min(x), max(x))
    return int(x)


@dataclass
class Distribution:
    """Probability mass on points (ints) or edge atoms (sorted index pairs)."""

    space: FiniteMetricSpace
    mass: dict[Atom, Mass]

    def __post_init__(self) -> None:
        clean: dict[Atom, Mass] = {}
        for a, m in self.mass.items():
            if m < 0:
                raise ConcurvError("bad-distribution", f"negative mass at {a}")
            if m > 0:
                key = _norm_atom(a)
                clean[key] = clean.get(key, 0) + m
        if not clean:
            raise ConcurvError("bad-distribution", "empty support")
        total = sum(clean.values())
        if abs(float(total) - 1.0) > 1e-12:
            raise ConcurvError("bad-distribution", f"masses sum to {float(total)}")
        self.mass = dict(sorted(clean.items(), key=lambda kv: _atom_key(kv[0])))

    @classmethod
    def uniform(cls, space: FiniteMetricSpace, atoms: Iterable[Atom]) -> Distribution:
        atoms = list(dict.fromkeys(atoms))
        return cls(space, {a: Fraction(1, len(atoms)) for a in atoms})

    @classmethod
    def point(cls, space: FiniteMetricSpace, atom: Atom) -> Distribution:
        return cls(space, {atom: Fraction(1)})

    @classmethod
    def from_labels(cls, space: FiniteMetricSpace, data: Mapping[Hashable, Any]) -> Distribution:
        return cls(space, {space.index(k): Fraction(str(v)) for k, v in data.items()})

    @property
    def support(self) -> list[Atom]:
        return list(self.mass)

    @property
    def exact(self) -> bool:
        return all(isinstance(m, (int, Fraction)) for m in self.mass.values())

    def total(self) -> Mass:
        return sum(self.mass.values())


def _atom_key(a: Atom) -> tuple[int, int, int]:
    return (1, a[0], a[1]) if isinstance(a, tuple) else (0, a, 0)


def entropy(dist: Distribution | Mapping[Any, Mass]) -> float:
    """Shannon entropy in nats; each atom (point or edge) is one outcome."""
    masses = dist.mass.values() if isinstance(dist, Distribution) else dist.values()
    return 0.0 - sum(float(p) * math.log(float(p)) for p in masses if p > 0)


@dataclass
class TransportPlan:
    """Coupling of two distributions stored on the product of their supports."""

    space: FiniteMetricSpace
    source: list[int]
    target: list[int]
    mu_a: list[Mass]
    mu_b: list[Mass]
    tau: np.ndarray  # object array (exact) or float array
    order: int = 2
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.tau.dtype == object

    def dist_block(self) -> np.ndarray:
        D = self.space.dist
        block = D[np.ix_(self.source, self.target)]
        return block.astype(np.int64) if self.space.integral else block

    def cost(self, k: int | None = None) -> Mass:
        k = self.order if k is None else k
        c = self.dist_block()
        if self.exact:
            return sum(
                (self.tau[i, j] * Fraction(c[i, j]) ** k for i, j in zip(*np.nonzero(self.tau != 0))),
                Fraction(0),
            )
        return float((self.tau * c.astype(float) ** k).sum())

    @property
    def W1(self) -> Mass:
        return self.cost(1)

    @property
    def W2(self) -> Mass:
        return self.cost(2)

    def pairs(self) -> list[tuple[int, int]]:
        """Support pairs as (row, column) positions."""
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.tau > 0))]

    def support_pairs(self) -> list[tuple[int, int]]:
        """Support pairs as space point indices."""
        return [(self.source[i], self.target[j]) for i, j in self.pairs()]

    def marginal_residual(self) -> float:
        rows = self.tau.sum(axis=1)
        cols = self.tau.sum(axis=0)
        r = max(abs(float(rows[i]) - float(self.mu_a[i])) for i in range(len(self.source)))
        c = max(abs(float(cols[j]) - float(self.mu_b[j])) for j in range(len(self.target)))
        return max(r, c)

    def marginals_exact(self) -> bool:
        rows = self.tau.sum(axis=1)
        cols = self.tau.sum(axis=0)
        return all(rows[i] == self.mu_a[i] for i in range(len(self.source))) and all(
            cols[j] == self.mu_b[j] for j in range(len(self.target))
        )

    def entropy(self) -> float:
        return 0.0 - sum(float(x) * math.log(float(x)) for x in self.tau.flat if x > 0)

    def as_dict(self) -> dict[str, Any]:
        pts = self.space.points
        return {
            "pairs": [
                {"a": pts[self.source[i]], "b": pts[self.target[j]], "mass": self.tau[i, j]} for i, j in self.pairs()
            ],
            "order": self.order,
            "W1": self.W1,
            "W2": self.W2,
            **self.meta,
        }


def _check_common(mu_a: Distribution, mu_b: Distribution) -> FiniteMetricSpace:
    if mu_a.space is not mu_b.space:
        raise ConcurvError("mismatched-spaces", "distributions live on different spaces")
    for d in (mu_a, mu_b):
        if any(isinstance(a, tuple) for a in d.support):
            raise ConcurvError("bad-distribution", "transport endpoints must be points")
    return mu_a.space


# ---------------------------------------------------------------- exact min-cost flow


def _ssp_transport(cost: np.ndarray, supply: Sequence[Fraction], demand: Sequence[Fraction]) -> np.ndarray:
    """Exact successive-shortest-path solver for the transportation problem.

    Nodes: source s, rows, columns, sink t.  Row/column arcs have capacity
    given by the marginals; row->column arcs are uncapacitated.  Bellman-Ford
    handles the negative residual costs; rational capacities keep it exact.
    """
    m, n = cost.shape
    flow = np.full((m, n), Fraction(0), dtype=object)
    sent_a = [Fraction(0)] * m
    sent_b = [Fraction(0)] * n
    total = sum(supply, Fraction(0))
    shipped = Fraction(0)
    c = [[int(x) if not isinstance(x, Fraction) else x for x in row] for row in cost.tolist()]
    while shipped < total:
        # Bellman-Ford over rows (0..m-1) and columns (m..m+n-1), sources: rows with spare supply
        INF = None
        dist: list[Any] = [INF] * (m + n)
        prev: list[int] = [-1] * (m + n)
        for i in range(m):
            if sent_a[i] < supply[i]:
                dist[i] = 0
        for _ in range(m + n):
            changed = False
            for i in range(m):
                if dist[i] is None:
                    continue
                for j in range(n):
                    nd = dist[i] + c[i][j]
                    if dist[m + j] is None or nd < dist[m + j]:
                        dist[m + j] = nd
                        prev[m + j] = i
                        changed = True
            for j in range(n):
                if dist[m + j] is None:
                    continue
                for i in range(m):
                    if flow[i, j] > 0:
                        nd = dist[m + j] - c[i][j]
                        if dist[i] is None or nd < dist[i]:
                            dist[i] = nd
                            prev[i] = m + j
                            changed = True
            if not changed:
                break
        best_j = None
        for j in range(n):
            if sent_b[j] < demand[j] and dist[m + j] is not None:
                key = (dist[m + j], j)
                if best_j is None or key < best_j[0]:
                    best_j = (key, j)
        if best_j is None:
            raise ConcurvError("infeasible", "no augmenting path")
        j = best_j[1]
        # walk back to collect the path and its bottleneck
        path = []
        node = m + j
        while True:
            p = prev[node]
            if p == -1:
                break
            path.append((p, node))
            node = p
        start = node
        delta = min(supply[start] - sent_a[start], demand[j] - sent_b[j])
        for u, v in path:
            if u >= m:  # backward arc column -> row
                delta = min(delta, flow[v, u - m])
        for u, v in path:
            if u < m:
                flow[u, v - m] += delta
            else:
                flow[v, u - m] -= delta
        sent_a[start] += delta
        sent_b[j] += delta
        shipped += delta
    return flow


def _potentials(cost: np.ndarray, flow: np.ndarray) -> tuple[list[Any], list[Any]]:
    """Dual (u, v) with ``u_i + v_j <= c_ij`` and equality on the flow support.

    Bellman-Ford from a virtual root on the final residual graph; no negative
    cycles exist at optimality.
    """
    m, n = cost.shape
    c = [[x if isinstance(x, Fraction) else int(x) for x in row] for row in cost.tolist()]
    pot: list[Any] = [0] * (m + n)
    for _ in range(m + n + 1):
        changed = False
        for i in range(m):
            for j in range(n):
                if pot[i] + c[i][j] < pot[m + j]:
                    pot[m + j] = pot[i] + c[i][j]
                    changed = True
                if flow[i, j] > 0 and pot[m + j] - c[i][j] < pot[i]:
                    pot[i] = pot[m + j] - c[i][j]
                    changed = True
        if not changed:
            break
    else:
        raise ConcurvError("internal", "negative residual cycle: plan is not optimal")
    u = [-pot[i] for i in range(m)]
    v = [pot[m + j] for j in range(n)]
    return u, v


def _cost_matrix(space: FiniteMetricSpace, rows: Sequence[int], cols: Sequence[int], k: int) -> np.ndarray:
    block = space.dist[np.ix_(list(rows), list(cols))]
    if space.integral:
        return block.astype(np.int64) ** k
    return np.array([[Fraction(x) ** k for x in r] for r in block], dtype=object)


def _lp_transport(cost: np.ndarray, supply: Sequence[float], demand: Sequence[float]) -> np.ndarray:
    from scipy.optimize import linprog

    m, n = cost.shape
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1
    for j in range(n):
        a_eq[m + j, j::n] = 1
    res = linprog(
        cost.astype(float).ravel(),
        A_eq=a_eq,
        b_eq=np.concatenate([np.asarray(supply, float), np.asarray(demand, float)]),
        bounds=(0, None),
        method="highs-ds",
    )
    if not res.success:
        raise ConcurvError("lp-failed", res.message)
    x = res.x.reshape(m, n)
    x[x < 1e-15] = 0.0
    return x


def _make_plan(mu_a: Distribution, mu_b: Distribution, tau: np.ndarray, order: int, meta=None) -> TransportPlan:
    return TransportPlan(
        space=mu_a.space,
        source=list(mu_a.support),
        target=list(mu_b.support),
        mu_a=list(mu_a.mass.values()),
        mu_b=list(mu_b.mass.values()),
        tau=tau,
        order=order,
        meta=dict(meta or {}),
    )


def plan_from_matrix(mu_a: Distribution, mu_b: Distribution, tau: np.ndarray, order: int = 2) -> TransportPlan:
    """Wrap a coupling matrix indexed by the two supports; marginals must hold exactly."""
    tau = np.asarray(tau, dtype=object)
    if tau.shape != (len(mu_a.support), len(mu_b.support)):
        raise ConcurvError("bad-plan", "matrix shape differs from the supports")
    if any(x < 0 for x in tau.flat):
        raise ConcurvError("bad-plan", "negative entry")
    plan = _make_plan(mu_a, mu_b, tau, order, {"solver": "given"})
    if not plan.marginals_exact():
        raise ConcurvError("bad-plan", "marginals do not match")
    return plan


def optimal_plan(mu_a: Distribution, mu_b: Distribution, order: int = 2) -> TransportPlan:
    """An optimal plan (not necessarily basic) with duals recorded in ``meta``."""
    space = _check_common(mu_a, mu_b)
    if order not in (1, 2):
        raise ConcurvError("bad-parameter", "order must be 1 or 2")
    rows, cols = mu_a.support, mu_b.support
    cost = _cost_matrix(space, rows, cols, order)
    exact = mu_a.exact and mu_b.exact and len(rows) + len(cols) <= EXACT_LIMIT
    if exact:
        tau = _ssp_transport(cost, list(mu_a.mass.values()), list(mu_b.mass.values()))
        u, v = _potentials(cost, tau)
        meta = {"solver": "exact-ssp", "dual_u": u, "dual_v": v}
    else:
        tau = _lp_transport(cost, [float(x) for x in mu_a.mass.values()], [float(x) for x in mu_b.mass.values()])
        meta = {"solver": "highs-float"}
    return _make_plan(mu_a, mu_b, tau, order, meta)


def wasserstein(mu_a: Distribution, mu_b: Distribution, order: int = 2) -> tuple[Mass, TransportPlan]:
    """``W^k`` (the optimal cost, without the 1/k root) and a basic optimal plan."""
    plan = optimal_plan(mu_a, mu_b, order)
    plan = _cancel_cycles(plan)
    return plan.cost(order), plan


# ---------------------------------------------------------------- monotonicity


def is_cyclically_monotone(plan: TransportPlan, cap: int | None = 6) -> tuple[bool, list[tuple[Any, Any]] | None]:
    """Search support cycles of length <= cap for a cost-reducing swap.

    A cycle ``(a_1,b_1) .. (a_k,b_k)`` violates monotonicity when
    ``sum c(a_i,b_i) > c(a_1,b_k) + sum c(a_{i+1},b_i)``.  Closed walks of
    bounded length are scanned with a min-plus recursion; a negative closed
    walk always contains a negative simple cycle, which is returned as a list
    of (a, b) label pairs.
    """
    pairs = plan.pairs()
    p = len(pairs)
    if p <= 1:
        return True, None
    cap = p if cap is None else min(cap, p)
    c = _cost_matrix(plan.space, plan.source, plan.target, plan.order)
    exact = c.dtype == object or np.issubdtype(c.dtype, np.integer)
    # step i -> j means a_j is re-matched with b_i: weight c(a_j, b_i) - c(a_i, b_i)
    w = [[c[pairs[j][0], pairs[i][1]] - c[pairs[i][0], pairs[i][1]] for j in range(p)] for i in range(p)]
    tol = 0 if exact else 1e-12
    for s in range(p):
        best: list[Any] = [None] * p
        parents: list[list[int]] = []
        best = [w[s][j] for j in range(p)]
        parents.append([s] * p)
        for length in range(1, cap + 1):
            if best[s] is not None and best[s] < -tol:
                walk = [s]
                node = s
                for level in range(length - 1, -1, -1):
                    node = parents[level][node]
                    walk.append(node)
                walk = walk[::-1]
                cycle = _negative_simple_cycle(walk, w, tol)
                pts = plan.space.points
                return False, [(pts[plan.source[pairs[i][0]]], pts[plan.target[pairs[i][1]]]) for i in cycle]
            if length == cap:
                break
            nxt: list[Any] = [None] * p
            par = [-1] * p
            for i in range(p):
                if best[i] is None:
                    continue
                for j in range(p):
                    val = best[i] + w[i][j]
                    if nxt[j] is None or val < nxt[j]:
                        nxt[j] = val
                        par[j] = i
            best = nxt
            parents.append(par)
    return True, None


def _negative_simple_cycle(walk: list[int], w: list[list[Any]], tol) -> list[int]:
    """Split a closed walk into simple cycles and return one of negative weight."""
    stack: list[int] = []
    pos: dict[int, int] = {}
    for v in walk:
        if v in pos:
            cyc = stack[pos[v] :]
            weight = sum(w[cyc[i]][cyc[(i + 1) % len(cyc)]] for i in range(len(cyc)))
            if weight < -tol:
                return cyc
            for u in cyc[1:]:
                del pos[u]
            del stack[pos[v] + 1 :]
        else:
            pos[v] = len(stack)
            stack.append(v)
    return stack


# ---------------------------------------------------------------- cycle cancelling


def _find_support_cycle(tau: np.ndarray) -> list[tuple[int, int]] | None:
    """An even cycle of support cells alternating row/column moves, or None."""
    m, n = tau.shape
    adj: dict[tuple[str, int], list[tuple[str, int]]] = {}
    for i, j in zip(*np.nonzero(tau > 0)):
        adj.setdefault(("r", int(i)), []).append(("c", int(j)))
        adj.setdefault(("c", int(j)), []).append(("r", int(i)))
    seen: dict[tuple[str, int], tuple[str, int] | None] = {}
    depth: dict[tuple[str, int], int] = {}
    for root in sorted(adj):
        if root in seen:
            continue
        seen[root] = None
        depth[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v == seen[u]:
                    continue
                if v in seen:
                    # cycle through tree paths u..lca..v
                    a, b = u, v
                    left, right = [a], [b]
                    while depth[a] > depth[b]:
                        a = seen[a]
                        left.append(a)
                    while depth[b] > depth[a]:
                        b = seen[b]
                        right.append(b)
                    while a != b:
                        a = seen[a]
                        b = seen[b]
                        left.append(a)
                        right.append(b)
                    nodes = left + right[-2::-1]
                    cells = []
                    for x, y in zip(nodes, nodes[1:] + nodes[:1]):
                        cells.append((x[1], y[1]) if x[0] == "r" else (y[1], x[1]))
                    return cells
                seen[v] = u
                depth[v] = depth[u] + 1
                queue.append(v)
    return None


def _cancel_cycles(plan: TransportPlan) -> TransportPlan:
    """Shift mass around support cycles until the support graph is a forest.

    Alternate cells of a cycle gain and lose ``eps``; the direction that does
    not increase cost is chosen and ``eps`` is the smallest mass on the
    losing cells, so at least one cell leaves the support.
    """
    tau = plan.tau.copy()
    c = _cost_matrix(plan.space, plan.source, plan.target, plan.order)
    steps = 0
    while True:
        cyc = _find_support_cycle(tau)
        if cyc is None:
            break
        plus, minus = cyc[0::2], cyc[1::2]
        delta = sum(c[i, j] for i, j in plus) - sum(c[i, j] for i, j in minus)
        if delta > 0:
            plus, minus = minus, plus
        eps = min(tau[i, j] for i, j in minus)
        for i, j in plus:
            tau[i, j] += eps
        for i, j in minus:
            tau[i, j] -= eps
            if not plan.exact and tau[i, j] < 1e-15:
                tau[i, j] = 0.0
        for i, j in minus:
            if tau[i, j] == eps - eps and plan.exact:
                tau[i, j] = Fraction(0)
        steps += 1
    meta = dict(plan.meta)
    meta["cycle_cancellations"] = steps
    return TransportPlan(plan.space, plan.source, plan.target, plan.mu_a, plan.mu_b, tau, plan.order, meta)


def acyclic_optimal_transport(mu_a: Distribution, mu_b: Distribution, order: int = 2, start: TransportPlan | None = None) -> TransportPlan:
    """Cancel support cycles of an optimal plan (``start`` if given) until the support is a forest."""
    plan = start if start is not None else optimal_plan(mu_a, mu_b, order)
    if start is not None and not start.exact:
        plan = _exactify(start)
    return _cancel_cycles(plan)


def _exactify(plan: TransportPlan) -> TransportPlan:
    """Snap a float plan to nearby rationals; marginals must then hold exactly."""
    tau = np.array([[Fraction(float(x)).limit_denominator(10**8) for x in row] for row in plan.tau], dtype=object)
    mu_a = [Fraction(x).limit_denominator(10**8) if isinstance(x, float) else x for x in plan.mu_a]
    mu_b = [Fraction(x).limit_denominator(10**8) if isinstance(x, float) else x for x in plan.mu_b]
    out = TransportPlan(plan.space, plan.source, plan.target, mu_a, mu_b, tau, plan.order, dict(plan.meta))
    if not out.marginals_exact():
        raise ConcurvError("needs-exact", "plan does not round to exact rational marginals")
    return out


def is_forest(plan: TransportPlan) -> bool:
    return _find_support_cycle(plan.tau) is None


def forest_bound_holds(plan: TransportPlan) -> bool:
    """For all row subsets A' and column subsets B', the support inside A' x B' has
    at most ``2(|A'| + |B'|) - 1`` pairs (checked on the support-restricted sets)."""
    pairs = plan.pairs()
    rows = sorted({i for i, _ in pairs})
    cols = sorted({j for _, j in pairs})
    if len(rows) + len(cols) > 14:
        # a forest has fewer edges than vertices on every vertex subset
        return is_forest(plan)
    for ra in range(1, len(rows) + 1):
        for A in itertools.combinations(rows, ra):
            for rb in range(1, len(cols) + 1):
                for B in itertools.combinations(cols, rb):
                    inside = sum(1 for i, j in pairs if i in A and j in B)
                    if inside > 2 * (len(A) + len(B)) - 1:
                        return False
    return True


# ---------------------------------------------------------------- optimal face, max entropy


def optimal_face(plan: TransportPlan) -> np.ndarray:
    """Boolean mask of pairs that carry mass in at least one optimal plan.

    With duals from the exact solve, a pair is usable iff its reduced cost is
    zero and it closes a zero-reduced-cost cycle in the residual graph (or
    already carries mass).
    """
    if not plan.exact or "dual_u" not in plan.meta:
        raise ConcurvError("needs-exact", "optimal face needs an exact plan with duals")
    u, v = plan.meta["dual_u"], plan.meta["dual_v"]
    c = _cost_matrix(plan.space, plan.source, plan.target, plan.order)
    m, n = c.shape
    tight = np.array([[c[i, j] - u[i] - v[j] == 0 for j in range(n)] for i in range(m)], dtype=bool)
    carries = np.array([[plan.tau[i, j] > 0 for j in range(n)] for i in range(m)], dtype=bool)
    # residual zero-cost arcs: row i -> col j when tight, col j -> row i when carrying mass
    face = carries.copy()
    for i in range(m):
        for j in range(n):
            if not tight[i, j] or face[i, j]:
                continue
            # can col j reach row i?
            seen_c = {j}
            seen_r: set[int] = set()
            queue = deque([("c", j)])
            found = False
            while queue and not found:
                kind, x = queue.popleft()
                if kind == "c":
                    for r in range(m):
                        if carries[r, x] and r not in seen_r:
                            if r == i:
                                found = True
                                break
                            seen_r.add(r)
                            queue.append(("r", r))
                else:
                    for cc in range(n):
                        if tight[x, cc] and cc not in seen_c:
                            seen_c.add(cc)
                            queue.append(("c", cc))
            face[i, j] = found
    return face


def max_entropy_optimal_plan(mu_a: Distribution, mu_b: Distribution, order: int = 2) -> TransportPlan:
    """The entropy maximiser among optimal plans, by IPF on the optimal face."""
    base = optimal_plan(mu_a, mu_b, order)
    face = optimal_face(base)
    a = np.array([float(x) for x in base.mu_a])
    b = np.array([float(x) for x in base.mu_b])
    tau = face.astype(float)
    tau /= tau.sum()
    residual = math.inf
    for it in range(IPF_MAX_ITER):
        rs = tau.sum(axis=1)
        tau *= (a / np.where(rs > 0, rs, 1))[:, None]
        cs = tau.sum(axis=0)
        tau *= (b / np.where(cs > 0, cs, 1))[None, :]
        residual = max(np.abs(tau.sum(axis=1) - a).max(), np.abs(tau.sum(axis=0) - b).max())
        if residual < IPF_TOL:
            break
    else:
        raise ConcurvError("ipf-no-convergence", f"residual {residual:.3e} after {IPF_MAX_ITER} sweeps")
    plan = _make_plan(mu_a, mu_b, tau, order, {"solver": "ipf", "ipf_iterations": it + 1, "ipf_residual": float(residual)})
    opt = float(base.cost(order))
    # on the face every used pair has c = u + v, so marginal error bounds cost error
    u, v = base.meta["dual_u"], base.meta["dual_v"]
    slack = float(residual) * (sum(abs(float(x)) for x in u) + sum(abs(float(x)) for x in v)) + 1e-9
    if abs(plan.cost(order) - opt) > slack:
        raise ConcurvError("internal", f"max-entropy plan cost {plan.cost(order)} differs from optimum {opt}")
    plan.meta["optimum"] = base.cost(order)
    return plan


def product_structure_check(plan: TransportPlan, tol: float = 1e-9) -> dict[str, Any]:
    """At every atom X shared by several support pairs, test ``tau(a_i,b_j) = f(a_i) g(b_j)``
    across all combinations of the sources and targets reaching X."""
    pairs = plan.support_pairs()
    pos_a = {a: i for i, a in enumerate(plan.source)}
    pos_b = {b: j for j, b in enumerate(plan.target)}
    by_atom: dict[Atom, list[tuple[int, int]]] = {}
    for a, b in pairs:
        for x in midpoints_tilde(plan.space, a, b):
            by_atom.setdefault(_norm_atom(x), []).append((a, b))
    failures = []
    for x, group in by_atom.items():
        As = sorted({a for a, _ in group})
        Bs = sorted({b for _, b in group})
        if len(As) < 2 or len(Bs) < 2:
            continue
        sub = np.array([[float(plan.tau[pos_a[a], pos_b[b]]) for b in Bs] for a in As])
        # rank one with positive entries
        total = sub.sum()
        outer = np.outer(sub.sum(axis=1), sub.sum(axis=0)) / total
        if (sub <= 0).any() or np.abs(sub - outer).max() > tol:
            failures.append(x)
    return {"atoms_checked": len(by_atom), "holds": not failures, "failures": failures[:10]}


# ---------------------------------------------------------------- partitions


@dataclass
class PartitionResult:
    component: dict[tuple[int, int], int]
    eta: list[Fraction]
    plans: list[TransportPlan]

    @property
    def count(self) -> int:
        return len(self.eta)


def _pair_atoms(space: FiniteMetricSpace, a: int, b: int) -> set[Atom]:
    return {_norm_atom(x) for x in midpoints_tilde(space, a, b)}


def partition(plan: TransportPlan) -> PartitionResult:
    """Components of the support under the relation "tilde midpoints intersect".

    Masses are converted to exact fractions so that ``sum eta_i tau_i``
    reproduces ``tau`` exactly.
    """
    exact = plan if plan.exact else _exactify(plan)
    pairs = exact.pairs()
    atoms = [_pair_atoms(plan.space, exact.source[i], exact.target[j]) for i, j in pairs]
    parent = list(range(len(pairs)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    owner: dict[Atom, int] = {}
    for k, ats in enumerate(atoms):
        for x in ats:
            if x in owner:
                ra, rb = find(owner[x]), find(k)
                if ra != rb:
                    parent[ra] = rb
            else:
                owner[x] = k
    roots = sorted({find(k) for k in range(len(pairs))}, key=lambda r: min(k for k in range(len(pairs)) if find(k) == r))
    component = {}
    etas: list[Fraction] = []
    plans: list[TransportPlan] = []
    for ci, r in enumerate(roots):
        members = [k for k in range(len(pairs)) if find(k) == r]
        eta = sum((exact.tau[pairs[k]] for k in members), Fraction(0))
        sub = np.full(exact.tau.shape, Fraction(0), dtype=object)
        for k in members:
            sub[pairs[k]] = exact.tau[pairs[k]] / eta
            component[(exact.source[pairs[k][0]], exact.target[pairs[k][1]])] = ci
        rows = sub.sum(axis=1)
        cols = sub.sum(axis=0)
        keep_r = [i for i in range(len(exact.source)) if rows[i] > 0]
        keep_c = [j for j in range(len(exact.target)) if cols[j] > 0]
        tau_i = sub[np.ix_(keep_r, keep_c)]
        plans.append(
            TransportPlan(
                plan.space,
                [exact.source[i] for i in keep_r],
                [exact.target[j] for j in keep_c],
                [rows[i] for i in keep_r],
                [cols[j] for j in keep_c],
                tau_i,
                plan.order,
                {"component": ci},
            )
        )
        etas.append(eta)
    return PartitionResult(component, etas, plans)


def recombine(plan: TransportPlan, parts: PartitionResult) -> np.ndarray:
    """``sum_i eta_i tau_i`` on the frame of ``plan``."""
    out = np.full(plan.tau.shape, Fraction(0), dtype=object)
    pos_a = {a: i for i, a in enumerate(plan.source)}
    pos_b = {b: j for j, b in enumerate(plan.target)}
    for eta, p in zip(parts.eta, parts.plans):
        for i, j in p.pairs():
            out[pos_a[p.source[i]], pos_b[p.target[j]]] += eta * p.tau[i, j]
    return out


def everybody_is_large_check(plan: TransportPlan) -> dict[str, Any]:
    """For a plan without partition: constant support distance D, every cross
    pair at distance at least D, and ``W^k = D^k`` for k = 1, 2."""
    parts = partition(plan)
    if parts.count != 1:
        raise ConcurvError("has-partition", f"{parts.count} components")
    D = plan.space.dist
    dists = {int(D[a, b]) if plan.space.integral else Fraction(D[a, b]) for a, b in plan.support_pairs()}
    const = len(dists) == 1
    d0 = next(iter(dists))
    cross_min = min(D[a, b] for a in plan.source for b in plan.target)
    w1, w2 = plan.cost(1), plan.cost(2)
    tol = 0 if plan.exact else 1e-9
    return {
        "D": d0,
        "constant_distance": const,
        "all_pairs_at_least_D": bool(cross_min >= d0),
        "W1_equals_D": abs(w1 - d0) <= tol,
        "W2_equals_D2": abs(w2 - d0**2) <= tol,
        "W1": w1,
        "W2": w2,
        "holds": const and bool(cross_min >= d0) and abs(w1 - d0) <= tol and abs(w2 - d0**2) <= tol,
    }


# ---------------------------------------------------------------- interpolation


class _GeodesicCounter:
    """Shortest-path counts ``N(a, u)`` by BFS layers, cached per source."""

    def __init__(self, space: FiniteMetricSpace):
        if space.graph is None:
            raise ConcurvError("not-a-graph", "interpolation needs a graph metric")
        self.space = space
        self.cache: dict[int, np.ndarray] = {}

    def counts(self, a: int) -> np.ndarray:
        if a not in self.cache:
            D = self.space.dist[a].astype(np.int64)
            order = np.argsort(D, kind="stable")
            cnt = [0] * self.space.n
            cnt[a] = 1
            g = self.space.graph
            for u in order.tolist():
                if u == a:
                    continue
                cnt[u] = sum(cnt[w] for w in g.adj[u] if D[w] == D[u] - 1)
            self.cache[a] = np.array(cnt, dtype=object)
        return self.cache[a]


def _pair_layer(counter: _GeodesicCounter, a: int, b: int, level: int) -> dict[Atom, Fraction]:
    D = counter.space.dist
    na, nb = counter.counts(a), counter.counts(b)
    total = na[b]
    on = np.nonzero((D[a].astype(np.int64) == level) & (D[b].astype(np.int64) == int(D[a, b]) - level))[0]
    return {int(u): Fraction(int(na[u] * nb[u]), int(total)) for u in on}


def _pair_edges(counter: _GeodesicCounter, a: int, b: int) -> dict[Atom, Fraction]:
    na, nb = counter.counts(a), counter.counts(b)
    total = na[b]
    out = {}
    for u, v in midpoints_tilde(counter.space, a, b):
        out[_norm_atom((u, v))] = Fraction(int(na[u] * nb[v]), int(total))
    return out


def interpolate(plan: TransportPlan, t: Fraction | float | str) -> Distribution:
    """Distance interpolation: every pair spreads its mass over geodesics uniformly.

    At time ``t`` a pair at distance ``d`` lands on layer ``t d`` when it is an
    integer; otherwise half the mass goes to each of the two neighbouring
    layers, except at ``t = 1/2`` where odd distances land on midpoint edges.
    """
    t = Fraction(t)
    if not 0 <= t <= 1:
        raise ConcurvError("bad-parameter", "t must lie in [0, 1]")
    counter = _GeodesicCounter(plan.space)
    out: dict[Atom, Mass] = {}
    D = plan.space.dist
    for i, j in plan.pairs():
        a, b = plan.source[i], plan.target[j]
        m = plan.tau[i, j]
        d = int(D[a, b])
        pos = t * d
        if pos.denominator == 1:
            parts = [(Fraction(1), _pair_layer(counter, a, b, int(pos)))]
        elif t == Fraction(1, 2):
            parts = [(Fraction(1), _pair_edges(counter, a, b))]
        else:
            lo = math.floor(pos)
            parts = [(Fraction(1, 2), _pair_layer(counter, a, b, lo)), (Fraction(1, 2), _pair_layer(counter, a, b, lo + 1))]
        for share, layer in parts:
            for x, w in layer.items():
                add = m * share * w if plan.exact else float(m) * float(share * w)
                out[x] = out.get(x, 0) + add
    return Distribution(plan.space, out)


def plan_marginal(plan: TransportPlan, side: str) -> Distribution:
    if side == "a":
        return Distribution(plan.space, dict(zip(plan.source, plan.mu_a)))
    return Distribution(plan.space, dict(zip(plan.target, plan.mu_b)))


def displacement_convexity_slack(
    mu_a: Distribution, mu_b: Distribution, plan: TransportPlan, t: Fraction | float | str, K: float = 0.0
) -> float:
    """``H(mu_t) - t H(mu_A) - (1-t) H(mu_B) - (K/2) t (1-t) W^2(plan)``."""
    t = Fraction(t)
    mu_t = interpolate(plan, t)
    tf = float(t)
    return entropy(mu_t) - tf * entropy(mu_a) - (1 - tf) * entropy(mu_b) - K / 2 * tf * (1 - tf) * float(plan.cost(2))


def diagonal_plan(mu_a: Distribution, mu_b: Distribution, pairs: Sequence[tuple[int, int]]) -> TransportPlan:
    """Plan putting equal mass on the given (a, b) pairs; marginals are checked."""
    tau = np.full((len(mu_a.support), len(mu_b.support)), Fraction(0), dtype=object)
    pa = {a: i for i, a in enumerate(mu_a.support)}  # pairs may repeat a target
    pb = {b: j for j, b in enumerate(mu_b.support)}
    for a, b in pairs:
        tau[pa[a], pb[b]] += Fraction(1, len(pairs))
    plan = _make_plan(mu_a, mu_b, tau, 2, {"solver": "given"})
    if not plan.marginals_exact():
        raise ConcurvError("bad-plan", "pairs do not reproduce the marginals")
    return plan


def basic_optimal_plans(mu_a: Distribution, mu_b: Distribution, cap: int = STRONG_PLAN_CAP, seed: int = 0) -> tuple[list[TransportPlan], str]:
    """Vertices of the optimal face found by minimising random integer objectives over it.

    Returns the distinct plans and the mode ``"unique"`` (the face is a single
    plan) or ``"sampled"``.
    """
    base = optimal_plan(mu_a, mu_b, 2)
    face = optimal_face(base)
    rng = np.random.default_rng(seed)
    m, n = face.shape
    big = 10**6
    seen: dict[tuple, TransportPlan] = {}
    stale = 0
    for _ in range(cap):
        cost = np.where(face, rng.integers(0, 1000, size=(m, n)), big).astype(np.int64)
        tau = _cancel_cycles(
            _make_plan(mu_a, mu_b, _ssp_transport(cost, base.mu_a, base.mu_b), 2)
        ).tau
        key = tuple(tau.ravel().tolist())
        if key in seen:
            stale += 1
            if stale > 50:
                break
            continue
        stale = 0
        seen[key] = _make_plan(mu_a, mu_b, tau, 2, {"solver": "face-vertex"})
    mode = "unique" if int(face.sum()) == int((base.tau > 0).sum()) and len(seen) == 1 else "sampled"
    return list(seen.values()), mode


def convexity_check(
    mu_a: Distribution, mu_b: Distribution, t: Fraction | float | str = Fraction(1, 2), K: float = 0.0, flavor: str = "weak", seed: int = 0
) -> dict[str, Any]:
    """Evaluate the entropy inequality under one of the four plan quantifiers.

    ``strong`` and ``sos`` need the inequality for every optimal plan (basic
    plans are sampled from the optimal face; only uniform geodesic measures
    are used); ``sow`` and ``weak`` use the max-entropy plan.
    """
    if flavor in ("strong", "sos"):
        plans, mode = basic_optimal_plans(mu_a, mu_b, seed=seed)
        slacks = [displacement_convexity_slack(mu_a, mu_b, p, t, K) for p in plans]
        worst = int(np.argmin(slacks))
        return {
            "flavor": flavor,
            "plans_examined": len(plans),
            "mode": mode,
            "min_slack": slacks[worst],
            "worst_plan": plans[worst].as_dict(),
            "holds": slacks[worst] >= -1e-12,
        }
    if flavor in ("sow", "weak"):
        plan = max_entropy_optimal_plan(mu_a, mu_b)
        s = displacement_convexity_slack(mu_a, mu_b, plan, t, K)
        return {"flavor": flavor, "plans_examined": 1, "mode": "max-entropy", "min_slack": s, "holds": s >= -1e-12}
    raise ConcurvError("bad-parameter", f"unknown flavor {flavor!r}")


# ---------------------------------------------------------------- hypercube entropy bounds


def _zeta(plan: TransportPlan, R: int) -> dict[tuple, float]:
    """Joint law of (a, b, c, M, M') with mass tau(a,b)/|C_R| at (M, M') = phi_tilde(a, b, c)."""
    atoms = C_R_atoms(R)
    size = len(atoms)
    out: dict[tuple, float] = {}
    for i, j in plan.pairs():
        a, b = plan.source[i], plan.target[j]
        m = float(plan.tau[i, j]) / size
        for c in atoms:
            M, M2 = phi_tilde(a, b, c, R)
            key = (a, b, c, _norm_atom(M), _norm_atom(M2))
            out[key] = out.get(key, 0.0) + m
    return out


def _proj_entropy(zeta: Mapping[tuple, float], coords: Sequence[int]) -> float:
    acc: dict[tuple, float] = {}
    for k, v in zeta.items():
        key = tuple(k[c] for c in coords)
        acc[key] = acc.get(key, 0.0) + v
    return entropy(acc)


def weird_entropy_identities(plan: TransportPlan, R: int, tol: float = 1e-9) -> dict[str, Any]:
    """Evaluate the conditional-entropy relations of the ``zeta`` construction."""
    z = _zeta(plan, R)
    A, B, C, M, M2 = 0, 1, 2, 3, 4
    S = lambda *cs: _proj_entropy(z, cs)
    full = S(A, B, C, M, M2)
    s_a, s_b, s_m = S(A), S(B), S(M)
    s_am, s_bm = S(A, M), S(B, M)
    cond_am_a = s_am - s_a
    cond_bm_b = s_bm - s_b
    cond_full_am = full - s_am
    cond_full_bm = full - s_bm
    cond_full_m = full - s_m
    ln_c = math.log(C_R_size(R))
    mu_c = entropy(interpolate(plan, Fraction(1, 2)))
    vals = {
        "first": (cond_am_a - cond_full_bm, mu_c - s_a),
        "first_alt": (cond_am_a - cond_full_am, mu_c - s_a),
        "second": (cond_bm_b - cond_full_am, mu_c - s_b),
        "second_alt": (cond_bm_b - cond_full_bm, mu_c - s_b),
        "third": (cond_full_am + cond_full_bm, cond_full_m),
    }
    vals["summed"] = (s_am + s_bm - full, mu_c)
    out = {k: {"lhs": l, "rhs": r, "holds": abs(l - r) <= tol} for k, (l, r) in vals.items()}
    out["fourth"] = {
        "S(AM|A)": cond_am_a,
        "S(BM|B)": cond_bm_b,
        "ln|C_R|": ln_c,
        "holds": cond_am_a >= ln_c - tol and cond_bm_b >= ln_c - tol,
    }
    out["mu_C_matches_projection"] = abs(s_m - mu_c) <= tol
    out["phi_tilde_injective"] = abs(S(M, M2) - full) <= tol
    return out


def weak_curvature_bounds(mu_a: Distribution, mu_b: Distribution) -> dict[str, Any]:
    """Check the hypercube entropy bounds on the max-entropy optimal plan.

    Per partition component of constant distance R the weak bound
    ``S(mu_C) >= (S(mu_A) + S(mu_B) + 2 ln|C_R|)/3`` is evaluated; the
    aggregate uses the eta-weighted ``ln|C_R|``.  The almost-curved slack
    ``S(mu_C) - S(mu_A)/3 - S(mu_B)/3 - 2 (W^2)^2/(5 d^3) + 2/3`` is
    reported as well.
    """
    space = mu_a.space
    d = hypercube_dim(space)
    if d is None:
        raise ConcurvError("not-hypercube", "weak curvature bounds need H_d")
    plan = max_entropy_optimal_plan(mu_a, mu_b)
    parts = partition(plan)
    s_a, s_b = entropy(mu_a), entropy(mu_b)
    mu_c = interpolate(plan, Fraction(1, 2))
    s_c = entropy(mu_c)
    comps = []
    weighted_ln = 0.0
    for eta, sub in zip(parts.eta, parts.plans):
        Ds = {int(space.dist[a, b]) for a, b in sub.support_pairs()}
        R = next(iter(Ds))
        sub_float = TransportPlan(space, sub.source, sub.target, sub.mu_a, sub.mu_b, sub.tau.astype(float), 2)
        sa = entropy(plan_marginal(sub, "a"))
        sb = entropy(plan_marginal(sub, "b"))
        sc = entropy(interpolate(sub, Fraction(1, 2)))
        ln_c = math.log(C_R_size(R))
        weighted_ln += float(eta) * ln_c
        bound = (sa + sb + 2 * ln_c) / 3
        comps.append(
            {
                "eta": eta,
                "R": R,
                "constant_distance": len(Ds) == 1,
                "S_A": sa,
                "S_B": sb,
                "S_C": sc,
                "C_R": C_R_size(R),
                "bound": bound,
                "holds": sc >= bound - 1e-9,
                "identities": weird_entropy_identities(sub_float, R) if len(Ds) == 1 else None,
            }
        )
    w2 = float(plan.cost(2))
    weak_rhs = (s_a + s_b + 2 * weighted_ln) / 3
    almost = s_c - s_a / 3 - s_b / 3 - 2 * w2**2 / (5 * d**3) + 2 / 3
    return {
        "d": d,
        "components": comps,
        "S_A": s_a,
        "S_B": s_b,
        "S_C": s_c,
        "W2": w2,
        "weak_bound": weak_rhs,
        "weak_holds": s_c >= weak_rhs - 1e-9 and all(c["holds"] for c in comps),
        "almost_curved_slack": almost,
        "almost_curved_holds": almost >= -1e-9,
        "plan_entropy": plan.entropy(),
    }


def ln_CR_linear_bound(R_max: int = 60) -> dict[str, Any]:
    """``ln|C_R| >= 0.6 R - 1`` for ``1 <= R <= R_max``."""
    fails = [R for R in range(1, R_max + 1) if math.log(C_R_size(R)) < 0.6 * R - 1]
    return {"R_max": R_max, "holds": not fails, "failures": fails}


# ---------------------------------------------------------------- strong convexity


def is_strong_family(g) -> str | None:
    """Name of the family (path, cycle, complete, complete-minus-edge) or None."""
    n, m = g.n, g.m
    degs = sorted(g.degree(v) for v in range(n))
    if n == 1:
        return "complete"
    if m == n * (n - 1) // 2:
        return "complete"
    if m == n * (n - 1) // 2 - 1:
        return "complete-minus-edge"
    if m == n - 1 and degs[-1] <= 2:
        return "path"
    if m == n and all(x == 2 for x in degs):
        return "cycle"
    return None


def local_obstructions(g):
    """Every vertex ``v`` with two distinct non-adjacent pairs inside ``N(v)``."""
    for v in range(g.n):
        nb = sorted(g.adj[v])
        gaps = [(x, y) for x, y in itertools.combinations(nb, 2) if not g.has_edge(x, y)]
        for p, q in itertools.combinations(gaps, 2):
            yield v, p, q


def local_obstruction(g) -> tuple[int, tuple[int, int], tuple[int, int]] | None:
    return next(local_obstructions(g), None)


def strong_convexity_characterization(space: FiniteMetricSpace) -> dict[str, Any]:
    """Compare the family recogniser with the local obstruction; build a witness when it fails.

    The witness is a pair of uniform two-point (or point) distributions, an
    optimal plan and a routing of every pair through the centre ``v``, so that
    ``mu_{1/2}`` is a point mass.  Some obstructions (two disjoint gaps whose
    ends are cross-adjacent, as in the wheel W_4) admit no such optimal plan;
    all obstructions are tried and ``witness["found"]`` says whether one worked.
    """
    g = space.graph
    if g is None:
        raise ConcurvError("not-a-graph", "needs a graph")
    if g.n > 10:
        raise ConcurvError("too-large", "n <= 10")
    fam = is_strong_family(g)
    obs = local_obstruction(g)
    report: dict[str, Any] = {"family": fam, "recognizer": fam is not None, "obstruction_free": obs is None}
    report["agree"] = report["recognizer"] == report["obstruction_free"]
    if obs is not None:
        report["obstruction"] = {"center": space.points[obs[0]], "gaps": [tuple(space.points[x] for x in pq) for pq in obs[1:]]}
        witness = None
        for cand in local_obstructions(g):
            witness = _obstruction_witness(space, *cand)
            if witness is not None:
                break
        report["witness"] = witness if witness is not None else {"found": False}
    return report


def _obstruction_witness(space: FiniteMetricSpace, v: int, p: tuple[int, int], q: tuple[int, int]) -> dict[str, Any] | None:
    """Two-point transport whose optimal geodesics can all be routed through ``v``."""
    shared = set(p) & set(q)
    if shared:
        s = shared.pop()
        candidates = [(sorted({x for x in p + q if x != s}), [s])]
    else:
        candidates = [([p[0], q[0]], [p[1], q[1]]), ([p[0], q[1]], [p[1], q[0]])]
        candidates += [(t, s) for s, t in candidates]
    pts = space.points
    for src, tgt in candidates:
        mu_a = Distribution.uniform(space, src)
        mu_b = Distribution.uniform(space, tgt)
        w2, _ = wasserstein(mu_a, mu_b)
        pairs = [(a, tgt[0]) for a in src] if len(tgt) == 1 else list(zip(src, tgt))
        plan = diagonal_plan(mu_a, mu_b, pairs)
        if plan.cost(2) != w2:
            continue
        slack = entropy({v: 1}) - 0.5 * entropy(mu_a) - 0.5 * entropy(mu_b)
        return {
            "found": True,
            "center": pts[v],
            "mu_A": [pts[x] for x in src],
            "mu_B": [pts[x] for x in tgt],
            "pairs": [(pts[a], pts[b]) for a, b in pairs],
            "W2": w2,
            "slack": slack,
        }
    return None
