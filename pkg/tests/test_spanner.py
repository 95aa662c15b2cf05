import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import floyd_warshall
from stream_sssp.graph import Graph
from stream_sssp.spanner import (bucket_base, bucket_of, max_stretch, size_bound,
                                 spanner_from_graph, streaming_spanner, verify_stretch)
from stream_sssp.stream_core import EdgeStream, SpaceLedger, StreamError, StreamMode
from stream_sssp.workloads import random_connected_graph, shuffled_stream


def oracle_stretch(g, h):
    dg, dh = floyd_warshall(g.n, g.edges()), floyd_warshall(h.n, h.edges())
    worst = 1.0
    for i in range(g.n):
        for j in range(i + 1, g.n):
            if dg[i][j] == float("inf"):
                continue
            if dg[i][j] == 0:
                assert dh[i][j] == 0
                continue
            worst = max(worst, dh[i][j] / dg[i][j])
    return worst


def test_unweighted_triangle_k2():
    g = Graph.from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    sp = streaming_spanner(EdgeStream.from_graph(g), 2, 0.5)
    assert sp.m == 2
    assert oracle_stretch(g, sp.subgraph) == 2 <= sp.stretch_bound


def test_tree_input_kept_whole():
    g = random_connected_graph(30, 29, seed=4)
    sp = streaming_spanner(shuffled_stream(g, 1), 3, 0.2)
    assert sp.subgraph == g


def test_k1_keeps_everything():
    g = random_connected_graph(25, 120, seed=2)
    sp = streaming_spanner(shuffled_stream(g, 3), 1, 0.3)
    assert sp.subgraph == g
    assert oracle_stretch(g, sp.subgraph) <= 1 + 0.3


def test_exactly_one_pass_and_ledger():
    g = random_connected_graph(40, 200, seed=1)
    s = shuffled_stream(g, 0)
    led = SpaceLedger()
    sp = streaming_spanner(s, 2, 0.5, led)
    assert s.pass_count == 1
    assert led.current_words == 2 * sp.m


def test_dynamic_stream_rejected():
    s = EdgeStream.from_updates(3, [(0, 1, 1, 1)], StreamMode.DYNAMIC)
    with pytest.raises(StreamError):
        streaming_spanner(s, 2, 0.5)


@pytest.mark.parametrize("k,eps", [(0, 0.5), (2, 0.0), (2, 1.0)])
def test_parameter_validation(k, eps):
    with pytest.raises(ValueError):
        streaming_spanner(EdgeStream.from_updates(2, [(0, 1, 1)]), k, eps)


def test_verify_stretch_examples():
    tri = Graph.from_edges(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    cut = Graph.from_edges(3, [(0, 1, 1), (1, 2, 1)])
    assert verify_stretch(tri, tri, 1)
    assert verify_stretch(tri, cut, 2)
    assert not verify_stretch(tri, cut, 1.5)
    assert max_stretch(tri, cut) == 2


def test_zero_weight_edges_use_forest():
    g = Graph.from_edges(4, [(0, 1, 0), (1, 2, 0), (0, 2, 0), (2, 3, 5)])
    sp = streaming_spanner(EdgeStream.from_graph(g), 2, 0.5)
    assert sp.m == 3
    assert verify_stretch(g, sp.subgraph, sp.stretch_bound)


def test_bucket_of_boundaries():
    base = bucket_base(2, 0.4)
    for j in range(0, 60):
        lo = base ** j
        w = int(np.ceil(lo))
        b = bucket_of(w, base)
        assert base ** b <= w < base ** (b + 1)


def test_reference_spanner_flags():
    g = random_connected_graph(20, 60, seed=0)
    sp = spanner_from_graph(g, 2, 0.5)
    assert sp.reference_only and sp.passes == 0


@st.composite
def weighted_graphs(draw):
    n = draw(st.integers(2, 14))
    m = draw(st.integers(n - 1, n * (n - 1) // 2))
    seed = draw(st.integers(0, 10 ** 6))
    wmax = draw(st.sampled_from([1, 4, 100]))
    return random_connected_graph(n, m, seed, max_weight=wmax)


@given(weighted_graphs(), st.integers(1, 4), st.sampled_from([0.1, 0.5, 0.9]),
       st.integers(0, 1000))
def test_stretch_property(g, k, eps, order_seed):
    sp = streaming_spanner(shuffled_stream(g, order_seed), k, eps)
    assert sp.subgraph.is_subgraph_of(g)
    assert oracle_stretch(g, sp.subgraph) <= 2 * k - 1 + eps + 1e-9


def test_size_scaling_bounded():
    # edges kept / (n^(1+1/k) log2 n / eps), across a 8x range of n
    ratios = []
    for n in (50, 100, 200, 400):
        g = random_connected_graph(n, n * (n - 1) // 4, seed=n, max_weight=50)
        sp = streaming_spanner(shuffled_stream(g, 1), 2, 0.5)
        ratios.append(sp.m / size_bound(n, 2, 0.5))
    assert max(ratios) < 0.5
    assert max(ratios) / min(ratios) <= 3
