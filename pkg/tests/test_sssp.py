import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import bellman_ford
from stream_sssp.graph import INF, Graph, ShortestPathTree, shortest_path_tree
from stream_sssp.spanner import streaming_spanner
from stream_sssp.sssp import (METRIC_COLUMNS, Config, Metrics, RoundState, approx_sssp,
                              approximation_ratio, check_fail_counts, check_potential_growth,
                              explicit_sssp, fail_bound, importance, metrics_csv, round_count,
                              run_round, sampling_coefficient, sampling_prob,
                              telescoping_excess, violates)
from stream_sssp.stream_core import EdgeStream, SpaceLedger
from stream_sssp.workloads import budget_density, random_connected_graph, shuffled_stream


def tree(dist):
    dist = np.array(dist, dtype=float)
    return ShortestPathTree(0, np.full(len(dist), -1), dist)


# -- violation rule and importances ------------------------------------------

def test_violates_examples():
    t = tree([0, 3, 7, INF, INF])
    assert violates(t, 1, 2, 2)
    assert not violates(t, 1, 2, 4)
    assert violates(t, 1, 3, 10 ** 9)
    assert not violates(t, 3, 4, 1)


def test_importance_examples():
    st0 = RoundState()
    assert importance(0, 1, 5, st0, 16, 2) == 1
    bad, good = tree([0, 0, 100]), tree([0, 0, 0])
    state = RoundState(round=4, trees=(bad, bad, good, bad))
    assert importance(1, 2, 1, state, 16, 2) == 125
    assert importance(0, 1, 1, state, 16, 2) == 1


def test_fail_counts_match_scalar_rule():
    trees = (tree([0, 1, 9, INF]), tree([0, 5, 6, 2]), tree([0, 1, 9, INF]))
    state = RoundState(round=3, trees=trees, distinct=(trees[0], trees[1]),
                       multiplicity=(2, 1))
    u, v, w = np.array([0, 1, 2, 0]), np.array([1, 2, 3, 3]), np.array([1, 2, 1, 1])
    want = [sum(violates(t, a, b, c) for t in trees) for a, b, c in zip(u, v, w)]
    assert state.fail_counts(u, v, w).tolist() == want


def test_sampling_prob_examples():
    assert sampling_coefficient(16, 2, 0.5) == 10240
    assert sampling_prob(1, 40960, 16, 2, 0.5) == 0.25
    assert sampling_prob(1, 10240, 16, 2, 0.5) == 1
    assert sampling_prob(7.5, 7.5, 16, 2, 0.5) == 1
    with pytest.raises(ValueError):
        sampling_prob(1, 0, 16, 2, 0.5)


@pytest.mark.parametrize("k,eps,R", [(2, 0.5, 80), (2, 0.25, 160), (3, 0.1, 900),
                                     (2, 0.1, 400), (3, 0.3, 300), (1, 0.7, 15)])
def test_round_count(k, eps, R):
    assert round_count(k, eps) == R == Config(k, eps).R


def test_config_validation():
    with pytest.raises(ValueError):
        Config(k=5, eps=0.5).validate(16)        # ceil(ln 16) = 3
    with pytest.warns(UserWarning):
        Config(k=3, eps=0.5).validate(16)        # ln 16 = 2.77 < 3
    with pytest.raises(ValueError):
        Config(k=2, eps=1.0).validate(16)
    with pytest.raises(ValueError):
        Config(k=2, eps=0.5, source=16).validate(16)


# -- checks --------------------------------------------------------------------

def test_potential_growth_check():
    cfg = Config(k=2, eps=0.5)
    assert check_potential_growth([10.0] * 5, cfg)
    assert not check_potential_growth([10.0, 10.0 * (1 + 0.5 / 10)], cfg)
    assert check_potential_growth([10.0, 10.0 * (1 + 0.5 / 20)], cfg)


def test_fail_count_check():
    cfg = Config(k=2, eps=0.5)
    m = Metrics(fail_counts=np.zeros(7, dtype=int))
    assert check_fail_counts(m, cfg)
    assert cfg.R > 2 * cfg.k / cfg.eps
    m.fail_counts = np.array([0, cfg.R, 1])
    assert not check_fail_counts(m, cfg)
    assert fail_bound(cfg) == 0.5 * 80 / 4


# -- rounds --------------------------------------------------------------------

def _started(g, cfg, order=0):
    s = shuffled_stream(g, order)
    sp = streaming_spanner(s, cfg.k, cfg.eps)
    return s, RoundState(spanner=sp)


def test_run_round_consumes_two_passes_and_first_q_is_m():
    g = random_connected_graph(30, 120, seed=5)
    cfg = Config(k=2, eps=0.5, seed=1)
    s, state = _started(g, cfg)
    before = s.pass_count
    state = run_round(s, state, cfg)
    assert s.pass_count - before == 2
    assert state.round == len(state.trees) == 1
    assert state.big_q_trace == (g.m,)


def test_round_state_is_immutable():
    with pytest.raises(Exception):
        RoundState().round = 3


def test_graph_equal_to_spanner_converges_in_round_one():
    g = random_connected_graph(25, 24, seed=3)   # a tree is its own spanner
    cfg = Config(k=2, eps=0.5)
    s, state = _started(g, cfg)
    exact = shortest_path_tree(g, 0)
    for _ in range(3):
        state = run_round(s, state, cfg)
        assert state.trees[-1].same_as(exact)


def test_sample_size_matches_bernoulli_sum():
    # round 1: all q = 1, so p = min(1, c * coef / m) for every edge
    g = random_connected_graph(20, 50, seed=8, max_weight=4)
    scale = 1e-3
    p = min(1.0, scale * sampling_coefficient(20, 2, 0.5) / g.m)
    assert 0.1 < p < 0.9
    sizes = []
    for seed in range(1000):
        cfg = Config(k=2, eps=0.5, seed=seed, coef_scale=scale)
        s, state = _started(g, cfg)
        sizes.append(run_round(s, state, cfg).sample_sizes[-1])
    mean, sd = g.m * p, math.sqrt(g.m * p * (1 - p) / len(sizes))
    assert abs(np.mean(sizes) - mean) <= 3 * sd


# -- full pipeline ---------------------------------------------------------------

def test_star_graph_exact():
    g = Graph.from_edges(6, [(0, i, i) for i in range(1, 6)])
    t, m = approx_sssp(EdgeStream.from_graph(g), Config(k=1, eps=0.5))
    assert t.to_graph() == g and approximation_ratio(t, g) == 1.0


def test_unreachable_vertices_stay_infinite():
    g = Graph.from_edges(6, [(0, 1, 2), (1, 2, 2), (3, 4, 1)])
    t, _ = approx_sssp(EdgeStream.from_graph(g), Config(k=1, eps=0.5))
    want = bellman_ford(6, g.edges(), 0)
    assert [float(x) for x in t.dist] == [float(x) for x in want]


def test_pass_count_and_metrics():
    g = random_connected_graph(64, 400, seed=2)
    cfg = Config(k=2, eps=0.5, seed=3)
    s = shuffled_stream(g, 1)
    t, m = approx_sssp(s, cfg, run_id="x")
    assert m.passes == s.pass_count == 1 + 2 * cfg.R
    assert (m.spanner_passes, m.round_passes) == (1, 2 * cfg.R)
    assert approximation_ratio(t, g) <= 1 + cfg.eps
    assert len(m.q_trace) == cfg.R + 1 and m.q_trace[0] == g.m
    assert m.state.round == len(m.state.trees) == cfg.R
    row = m.row()
    assert list(row) == METRIC_COLUMNS
    assert metrics_csv([m]).splitlines()[0] == ",".join(METRIC_COLUMNS)


@pytest.mark.parametrize("seed", range(5))
def test_random_graphs_within_ratio(seed):
    g = random_connected_graph(64, 300, seed=100 + seed)
    cfg = Config(k=2, eps=0.25, seed=seed)
    t, m = approx_sssp(shuffled_stream(g, seed), cfg)
    assert approximation_ratio(t, g) <= 1.25
    assert check_potential_growth(m.q_trace, cfg) and check_fail_counts(m, cfg)


def test_explicit_matches_streaming_bitwise():
    g = random_connected_graph(40, 160, seed=11, max_weight=4)
    cfg = Config(k=2, eps=0.5, seed=9, coef_scale=1e-3)
    s = shuffled_stream(g, 4)
    sp = streaming_spanner(shuffled_stream(g, 4), cfg.k, cfg.eps)
    t1, m1 = approx_sssp(s, cfg)
    t2, m2 = explicit_sssp(g, cfg, spanner=sp)
    assert t1.fingerprint() == t2.fingerprint()
    assert [x.fingerprint() for x in m1.state.trees] == [x.fingerprint() for x in m2.state.trees]
    assert m1.q_trace == m2.q_trace


def test_same_seed_same_output():
    g = random_connected_graph(40, 160, seed=12, max_weight=4)
    cfg = Config(k=2, eps=0.5, seed=2, coef_scale=1e-3)
    a = approx_sssp(shuffled_stream(g, 1), cfg)
    b = approx_sssp(shuffled_stream(g, 1), cfg)
    assert a[0].fingerprint() == b[0].fingerprint() and a[1].row() == b[1].row()


def test_scaled_run_self_consistency_and_telescoping():
    # a scaled-down coefficient makes sampling sparse, so trees genuinely differ
    g = random_connected_graph(48, 300, seed=21, max_weight=4)
    cfg = Config(k=2, eps=0.5, seed=5, coef_scale=1e-3)
    t, m = approx_sssp(shuffled_stream(g, 2), cfg)
    state = m.state
    h = state.spanner.subgraph
    for tr in state.distinct:
        d = np.asarray(tr.dist, dtype=float)
        assert np.all(np.abs(d[h.u] - d[h.v]) <= h.w)
    assert telescoping_excess(state, g, 0) <= 1 + cfg.eps
    assert approximation_ratio(t, g) <= 1 + cfg.eps


@given(st.lists(st.integers(0, 6), min_size=1, max_size=6))
def test_importance_monotone_in_failures(fails):
    base = 1 + 16 ** 0.5
    vals = sorted(fails)
    imps = [base ** f for f in vals]
    assert imps == sorted(imps)
    bad, good = tree([0, 0, 100]), tree([0, 0, 0])
    for f in vals:
        state = RoundState(round=6, trees=(bad,) * f + (good,) * (6 - f))
        assert importance(1, 2, 1, state, 16, 2) == base ** f


def test_peak_words_within_frozen_constant():
    # frozen constant C for peak_words / ((k/eps) n^(1+1/k) log2 n)
    C = 0.5
    for n in (64, 256):
        g = random_connected_graph(n, budget_density(n, 2, 0.5, 1 / 32), seed=n)
        led = SpaceLedger()
        approx_sssp(shuffled_stream(g, 0), Config(k=2, eps=0.5), ledger=led)
        shape = (2 / 0.5) * n ** 1.5 * math.log2(n)
        assert led.peak_words <= C * shape
