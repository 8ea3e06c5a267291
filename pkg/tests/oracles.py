"""Independent brute-force oracles used to freeze expected values in the tests.

Nothing here imports the package under test.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import networkx as nx
import numpy as np
from scipy.optimize import linprog


def bfs_matrix(n, edges):
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(edges)
    d = dict(nx.all_pairs_shortest_path_length(G))
    return np.array([[d[i][j] for j in range(n)] for i in range(n)])


def brute_max_variance(D):
    """Max variance over anchored integer 1-Lipschitz functions with values in [-ecc, ecc]."""
    n = len(D)
    ecc = int(max(D[0]))
    best = Fraction(-1)
    for vals in itertools.product(range(-ecc, ecc + 1), repeat=n - 1):
        f = (0,) + vals
        if any(abs(f[i] - f[j]) > D[i][j] for i in range(n) for j in range(i)):
            continue
        s = sum(f)
        q = sum(x * x for x in f)
        var = Fraction(n * q - s * s, n * n)
        best = max(best, var)
    return best


def lp_w2(D, a_pts, a_mass, b_pts, b_mass):
    """Float optimal transport cost with squared distances."""
    m, k = len(a_pts), len(b_pts)
    c = np.array([[float(D[i][j]) ** 2 for j in b_pts] for i in a_pts]).ravel()
    A = []
    for i in range(m):
        row = np.zeros(m * k)
        row[i * k : (i + 1) * k] = 1
        A.append(row)
    for j in range(k):
        row = np.zeros(m * k)
        row[j::k] = 1
        A.append(row)
    b = [float(x) for x in a_mass] + [float(x) for x in b_mass]
    res = linprog(c, A_eq=np.array(A), b_eq=b, bounds=(0, None), method="highs")
    return res.fun


def perm_variance(n):
    """Variance over S_n of the number of positions whose value crosses the half split.

    Positions 1..floor(n/2) count when their value exceeds n/2; the other
    positions count when their value is at most n/2.
    """
    h = n // 2
    vals = []
    for p in itertools.permutations(range(1, n + 1)):
        x = sum(1 for i in range(h) if 2 * p[i] > n) + sum(1 for i in range(h, n) if 2 * p[i] <= n)
        vals.append(x)
    N = len(vals)
    s = sum(vals)
    q = sum(v * v for v in vals)
    return Fraction(N * q - s * s, N * N)


def cube_midpoints(d, a, b, rho=Fraction(1, 2)):
    """Symmetric rho-midpoints of bitmasks a, b in H_d by scanning every mask."""
    dab = bin(a ^ b).count("1")
    levels = {math.floor(rho * dab), math.ceil((1 - rho) * dab)}
    out = set()
    for u in range(1 << d):
        da = bin(a ^ u).count("1")
        if da + bin(u ^ b).count("1") == dab and da in levels:
            out.add(u)
    return out


def entropy(ps):
    return -sum(p * math.log(p) for p in ps if p > 0)
