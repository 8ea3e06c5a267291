import itertools
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from concurv import ConcurvError
from concurv.metric import (
    boolean_levels,
    caterpillar,
    check_metric,
    complete,
    cycle,
    find_hairs,
    graph_space,
    hypercube,
    mask_to_set,
    parse_space,
    path,
    petersen,
    product,
    scaled_edge,
    set_to_mask,
    symmetric_group,
    tripod,
)

from oracles import bfs_matrix


@st.composite
def connected_graphs(draw, max_n=9):
    n = draw(st.integers(2, max_n))
    # random spanning tree via parent pointers, then extra edges
    edges = {(draw(st.integers(0, i - 1)), i) for i in range(1, n)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    return n, sorted(edges)


@settings(max_examples=60, deadline=None)
@given(connected_graphs())
def test_bfs_metric_matches_networkx(data):
    n, edges = data
    sp = graph_space(edges, n)
    assert np.array_equal(sp.dist.astype(int), bfs_matrix(n, edges))
    assert check_metric(sp)


@settings(max_examples=40, deadline=None)
@given(connected_graphs(max_n=6))
def test_triangle_inequality_and_symmetry(data):
    n, edges = data
    D = graph_space(edges, n).dist.astype(int)
    assert (D == D.T).all()
    assert (np.diag(D) == 0).all()
    for i, j, k in itertools.product(range(n), repeat=3):
        assert D[i, k] <= D[i, j] + D[j, k]


def test_hypercube_labels_are_subsets_and_hamming():
    h = hypercube(3)
    assert h.n == 8
    for i in range(8):
        assert h.points[i] == mask_to_set(i)
        for j in range(8):
            assert h.d(i, j) == len(h.points[i] ^ h.points[j])


def test_mask_roundtrip():
    for mask in range(64):
        assert set_to_mask(mask_to_set(mask)) == mask


def test_product_l1_of_paths_is_grid():
    sp = product([path(2), path(3)], "l1")
    G = nx.grid_2d_graph(2, 3)
    for (a, b) in itertools.product(range(sp.n), repeat=2):
        assert sp.d(a, b) == nx.shortest_path_length(G, sp.points[a], sp.points[b])


def test_product_l0_of_complete_graphs_is_hamming():
    sp = product([complete(3), path(3), complete(4)], "l0")
    for a, b in itertools.product(range(sp.n), repeat=2):
        pa, pb = sp.points[a], sp.points[b]
        assert sp.d(a, b) == sum(x != y for x, y in zip(pa, pb))


def test_product_linf():
    sp = product([path(3), path(3)], "linf")
    assert sp.diameter() == 2


def test_scaled_edge_is_exact():
    sp = scaled_edge("3/2")
    assert sp.d(0, 1) == Fraction(3, 2)
    assert sp.unit_step() == Fraction(1, 2)


def test_boolean_levels_and_symmetric_group():
    sp = boolean_levels(4, [1, 2])
    assert sp.n == 4 + 6
    sg = symmetric_group(3)
    assert sg.n == 6
    # Hamming distance between distinct permutations is never 1
    vals = {int(sg.d(i, j)) for i in range(6) for j in range(6) if i != j}
    assert vals == {2, 3}


def test_petersen():
    sp = petersen()
    assert sp.n == 10
    assert sp.diameter() == 2
    assert sp.graph.is_regular()
    assert sp.graph.m == 15


def test_named_families_sizes():
    assert cycle(7).diameter() == 3
    assert path(5).diameter() == 4
    assert tripod(2).n == 9
    assert caterpillar(2).n == 8


def test_hairs():
    assert find_hairs(tripod(2).graph) == [[0, 1, 2], [0, 3, 4], [0, 5, 6, 7, 8]]
    assert find_hairs(path(4).graph) == [[0, 1, 2, 3]]
    assert find_hairs(cycle(5).graph) == []


@pytest.mark.parametrize("text", ["nope:3", "cycle:x"])
def test_parse_space_rejects_bad_input(text):
    with pytest.raises(ValueError):
        parse_space(text)


def test_parse_space_json_and_product():
    sp = parse_space('{"n": 3, "edges": [[0, 1], [1, 2]]}')
    assert sp.diameter() == 2
    sp = parse_space("product:l0:complete=3,complete=3")
    assert sp.n == 9 and sp.diameter() == 2


def test_size_cap():
    with pytest.raises(ConcurvError):
        parse_space("hypercube:12", cap=100)
