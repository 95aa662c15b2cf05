import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import bellman_ford, path_enumeration_distances
from stream_sssp.graph import (INF, NONE, Graph, GraphError, dijkstra_reference,
                               distances_from, pair_index, shortest_path_tree, tree_distance,
                               union)


@st.composite
def small_graphs(draw, max_n=8, max_w=20, zero=True):
    n = draw(st.integers(1, max_n))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    lo = 0 if zero else 1
    ws = draw(st.lists(st.integers(lo, max_w), min_size=len(chosen), max_size=len(chosen)))
    return Graph.from_edges(n, [(a, b, w) for (a, b), w in zip(chosen, ws)])


def test_single_edge():
    t = shortest_path_tree(Graph.from_edges(2, [(0, 1, 5)]), 0)
    assert t.dist[1] == 5 and t.parent[1] == 0
    assert t.dist[0] == 0 and t.parent[0] == NONE


def test_detour_is_shorter():
    # s=0, a=1, b=2
    g = Graph.from_edges(3, [(0, 1, 2), (1, 2, 3), (0, 2, 10)])
    t = shortest_path_tree(g, 0)
    assert t.dist[2] == 5 and t.parent[2] == 1
    assert path_enumeration_distances(3, g.edges(), 0)[2] == 5
    assert tree_distance(t, 2) == 5


def test_unreachable_is_infinity():
    g = Graph.from_edges(3, [(0, 1, 1)])
    t = shortest_path_tree(g, 0)
    assert t.dist[2] == INF and math.isinf(tree_distance(t, 2))
    assert t.parent[2] == NONE
    assert tree_distance(t, 0) == 0


def test_tie_break_smallest_parent():
    # vertex 3 reachable at distance 2 through 1 and through 2
    g = Graph.from_edges(4, [(0, 2, 1), (2, 3, 1), (0, 1, 1), (1, 3, 1)])
    assert shortest_path_tree(g, 0).parent[3] == 1
    g = Graph.from_edges(5, [(0, 4, 1), (4, 3, 1), (0, 2, 1), (2, 3, 1)])
    assert shortest_path_tree(g, 0).parent[3] == 2


def test_zero_weight_edges():
    g = Graph.from_edges(4, [(0, 1, 0), (1, 2, 0), (2, 3, 4), (0, 3, 9)])
    t = shortest_path_tree(g, 0)
    assert list(t.dist) == [0, 0, 0, 4]


def test_graph_rejects_bad_edges():
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(1, 1, 2)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 1, -2)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 1, 2), (1, 0, 3)])


def test_canonical_orientation():
    g = Graph.from_edges(3, [(2, 0, 4)])
    assert g.edges() == [(0, 2, 4)]
    assert g.weight(2, 0) == 4 and g.has_edge(0, 2)


def test_union_examples():
    a = Graph.from_edges(4, [(0, 1, 3), (1, 2, 1)])
    b = Graph.from_edges(4, [(2, 3, 2)])
    c = Graph.from_edges(4, [(0, 1, 7)])
    assert union([a, a]) == a
    assert union([a, b]).edge_set() == a.edge_set() | b.edge_set()
    assert union([a, c]).weight(0, 1) == 3
    with pytest.raises(GraphError):
        union([a, Graph.from_edges(5, [])])


def test_pair_index_is_lexicographic():
    n = 6
    want = {p: i for i, p in enumerate((a, b) for a in range(n) for b in range(a + 1, n))}
    for (a, b), i in want.items():
        assert int(pair_index(n, a, b)) == i == int(pair_index(n, b, a))


@given(small_graphs(), st.data())
def test_spt_matches_path_enumeration(g, data):
    s = data.draw(st.integers(0, g.n - 1))
    t = shortest_path_tree(g, s)
    want = path_enumeration_distances(g.n, g.edges(), s)
    assert list(map(float, t.dist)) == [float(x) for x in want]


@given(small_graphs(max_n=12))
def test_spt_tree_invariants(g):
    t = shortest_path_tree(g, 0)
    assert t.dist[0] == 0 and t.parent[0] == NONE
    for v in range(g.n):
        p = int(t.parent[v])
        if v == 0:
            continue
        if p == NONE:
            assert math.isinf(t.dist[v])
        else:
            assert g.has_edge(p, v)
            assert t.dist[v] == t.dist[p] + g.weight(p, v)
    # no edge of g violates the triangle inequality w.r.t. its own exact tree
    for a, b, w in g.edges():
        da, db = float(t.dist[a]), float(t.dist[b])
        if math.isinf(da) or math.isinf(db):
            assert math.isinf(da) and math.isinf(db)
        else:
            assert abs(da - db) <= w


@given(small_graphs(max_n=12))
def test_fast_and_reference_dijkstra_agree(g):
    a, b = shortest_path_tree(g, 0), dijkstra_reference(g, 0)
    assert np.array_equal(a.dist, b.dist)
    assert list(map(float, a.dist)) == [float(x) for x in bellman_ford(g.n, g.edges(), 0)]


@given(small_graphs(max_n=10))
def test_distances_from_all_pairs(g):
    d = distances_from(g)
    for s in range(g.n):
        assert list(d[s]) == [float(x) for x in bellman_ford(g.n, g.edges(), s)]


@given(small_graphs(max_n=6), small_graphs(max_n=6), small_graphs(max_n=6))
def test_union_commutative_associative(a, b, c):
    n = min(a.n, b.n, c.n)
    a, b, c = (Graph.from_edges(n, [e for e in x.edges() if e[1] < n]) for x in (a, b, c))
    assert union([a, b]) == union([b, a])
    assert union([union([a, b]), c]) == union([a, union([b, c])])
