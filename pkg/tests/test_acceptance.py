"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line (shown even
under output capture) and then asserts the same verdict.
"""

import math
import warnings

import numpy as np
import pytest

from stream_sssp import experiments as ex
from stream_sssp.derand import (WeightedImportanceGraph, compose_eps, derandomized_sssp, merge,
                                merge_reduce_stream, sample_sparsifier, verify_sparsifier)
from stream_sssp.graph import Graph
from stream_sssp.spanner import max_stretch, size_bound, streaming_spanner
from stream_sssp.sssp import (Config, approx_sssp, approximation_ratio, check_fail_counts,
                              count_potential_violations, fail_bound)
from stream_sssp.workloads import (budget_density, dynamic_stream, random_connected_graph,
                                   shuffled_stream)

SEEDS = 50
SIZES = (64, 256, 1024)
EPSILONS = (0.1, 0.25, 0.5)
KS = (2, 3)


def report(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def approx_runs():
    """All criterion-1 runs, reused by criteria 2, 4 and 5."""
    out = []
    for n in SIZES:
        for eps in EPSILONS:
            for k in KS:
                for seed in range(SEEDS):
                    g = random_connected_graph(n, 4 * n, seed=1000 * n + seed, max_weight=100)
                    cfg = Config(k=k, eps=eps, seed=seed)
                    tree, m = approx_sssp(shuffled_stream(g, seed), cfg)
                    out.append((cfg, n, approximation_ratio(tree, g), m))
    return out


def test_criterion_1_approximation(approx_runs, capsys):
    bad = [(n, c.eps, c.k, c.seed, r) for c, n, r, _ in approx_runs if r > 1 + c.eps + 1e-12]
    worst = max(r / (1 + c.eps) for c, _, r, _ in approx_runs)
    report(capsys, 1, not bad,
           f"{len(approx_runs) - len(bad)}/{len(approx_runs)} runs within 1+eps "
           f"(worst ratio / (1+eps) = {worst:.4f})")


def test_criterion_2_pass_budget(approx_runs, capsys):
    bad = [m.passes for c, _, _, m in approx_runs
           if m.passes != 1 + 2 * math.ceil(10 * c.k ** 2 / c.eps)]
    report(capsys, 2, not bad, f"{len(approx_runs) - len(bad)}/{len(approx_runs)} exact pass counts")


def test_criterion_3_space_shape(capsys):
    k, eps = 2, 0.5
    ratios = {}
    for n in (64, 256, 1024, 4096):
        g = random_connected_graph(n, budget_density(n, k, eps, 1 / 32), seed=n, max_weight=100)
        _, m = approx_sssp(shuffled_stream(g, 1), Config(k=k, eps=eps, seed=1))
        ratios[n] = m.peak_words / ((k / eps) * n ** (1 + 1 / k) * math.log2(n))
    spread = max(ratios.values()) / min(ratios.values())
    detail = ", ".join(f"n={n}: {r:.3f}" for n, r in ratios.items())
    report(capsys, 3, spread <= 3, f"spread {spread:.2f}x ({detail})")


def test_criterion_4_potential_growth(approx_runs, capsys):
    bad = sum(count_potential_violations(m.log_q_trace, c, log_domain=True) > 0
              for c, _, _, m in approx_runs)
    rounds = sum(len(m.log_q_trace) - 1 for _, _, _, m in approx_runs)
    report(capsys, 4, bad == 0, f"{bad} runs with a violating round ({rounds} rounds checked)")


def test_criterion_5_fail_counts(approx_runs, capsys):
    bad = [c for c, _, _, m in approx_runs if not check_fail_counts(m, c)]
    top = max(m.max_fail_count / fail_bound(c) for c, _, _, m in approx_runs)
    report(capsys, 5, not bad,
           f"{len(bad)} runs over the bound (largest count / bound {top:.3f})")


def test_criterion_6_spanner(capsys):
    eps = 0.5
    stretch_bad, pass_bad, checked = [], [], 0
    rng = np.random.default_rng(6)
    for k in (2, 3, 4):
        for i in range(20):
            n = int(rng.integers(20, 301))
            m = int(rng.integers(n, min(n * (n - 1) // 2, 8 * n) + 1))
            g = random_connected_graph(n, m, seed=int(rng.integers(1 << 31)),
                                       max_weight=int(rng.choice([1, 10, 1000])))
            s = shuffled_stream(g, i)
            sp = streaming_spanner(s, k, eps)
            checked += 1
            if s.pass_count != 1:
                pass_bad.append((k, i))
            if max_stretch(g, sp.subgraph) > 2 * k - 1 + eps + 1e-9:
                stretch_bad.append((k, i))
    spreads = {}
    for k in (2, 3):
        ratios = []
        for n in (50, 100, 200, 400):
            g = random_connected_graph(n, n * (n - 1) // 4, seed=n + k, max_weight=50)
            ratios.append(streaming_spanner(shuffled_stream(g, 1), k, eps).m / size_bound(n, k, eps))
        spreads[k] = max(ratios) / min(ratios)
    ok = not stretch_bad and not pass_bad and max(spreads.values()) <= 3
    detail = (f"{checked - len(stretch_bad)}/{checked} within stretch, "
              f"{checked - len(pass_bad)}/{checked} single pass, size spread "
              + ", ".join(f"k={k}: {v:.2f}x" for k, v in spreads.items()))
    report(capsys, 6, ok, detail)


def test_criterion_7_l1_sampler(capsys):
    cases = [(1000, 300, 20_000, 0), (200, 60, 20_000, 1), (40, 10, 20_000, 2)]
    reports = [ex.sampler_experiment(d, s, t, eps=0.1, delta=0.1, seed=seed)
               for d, s, t, seed in cases]
    ok = all(r.tv_ok and r.fail_ok and r.linear for r in reports)
    detail = "; ".join(f"dim={r.dim}: tv {r.tv:.4f} (null {r.tv_null_mean:.4f}), "
                       f"fail {r.fail_rate:.4f}, linear {r.linear}" for r in reports)
    report(capsys, 7, ok, detail)


def test_criterion_8_dynamic(capsys):
    cfg_ratios = []
    for seed in range(20):
        g = random_connected_graph(10, 30, seed=seed, max_weight=100)
        stream, final = dynamic_stream(g, seed + 100, delete_fraction=0.2)
        cfg = Config(k=2, eps=0.5, seed=seed)
        tree, m = approx_sssp(stream, cfg)
        cfg_ratios.append((approximation_ratio(tree, final), m.reference_only))
    bad = sum(r > 1.5 + 1e-12 for r, _ in cfg_ratios)
    flagged = all(f for _, f in cfg_ratios)
    report(capsys, 8, bad == 0 and flagged,
           f"{20 - bad}/20 dynamic runs within 1+eps at n=10, spanner flagged reference_only={flagged}")


def _split(g: Graph):
    h = g.m // 2
    return Graph(g.n, g.u[:h], g.v[:h], g.w[:h]), Graph(g.n, g.u[h:], g.v[h:], g.w[h:])


def test_criterion_9_sparsifiers(capsys):
    shapes = [(4, 6), (5, 8), (6, 10), (6, 12), (7, 12)]
    sampled_pass = sampled_total = 0
    for i, (n, m) in enumerate(shapes):
        r = ex.sparsifier_experiment(n, m, graphs=2, seeds=1000, eps=0.5, seed=i)
        sampled_pass += r.passed
        sampled_total += r.total
    rate = sampled_pass / sampled_total

    merge_ok = compose_ok = True
    for seed in range(40):
        rng = np.random.default_rng(seed)
        g = random_connected_graph(6, 12, seed=seed, max_weight=6)
        a, b = _split(g)
        pa = WeightedImportanceGraph(a, ex.skewed_importances(a.m, rng))
        pb = WeightedImportanceGraph(b, ex.skewed_importances(b.m, rng))
        mg = merge(sample_sparsifier(pa, 0.5, seed), sample_sparsifier(pb, 0.5, seed + 1))
        merge_ok &= verify_sparsifier(mg.parent, mg, 0)
        p = WeightedImportanceGraph(g, ex.skewed_importances(g.m, rng))
        first = sample_sparsifier(p, 0.3, seed)
        second = sample_sparsifier(first.as_parent(), 0.3, seed + 7)
        compose_ok &= verify_sparsifier(p, second, 0, eps=compose_eps(0.3, 0.3))

    held_ok = True
    for m, seg in ((40, 3), (80, 5), (120, 2)):
        g = random_connected_graph(20, m, seed=m)
        r = merge_reduce_stream(shuffled_stream(g, 0), 0.5, segment_size=seg)
        held_ok &= r.max_held <= math.ceil(math.log2(r.segments)) + 1

    ratios = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed, (n, m) in enumerate([(5, 8), (6, 10), (6, 12), (7, 12)]):
            g = random_connected_graph(n, m, seed, max_weight=9)
            cfg = Config(k=1, eps=0.5, seed=seed)
            tree, _ = derandomized_sssp(shuffled_stream(g, seed), cfg)
            ratios.append(approximation_ratio(tree, g))
    derand_ok = max(ratios) <= 1.5

    ok = rate >= 0.99 and merge_ok and compose_ok and held_ok and derand_ok
    report(capsys, 9, ok,
           f"sampled pass rate {rate:.4f} over {sampled_total}, merge {merge_ok}, "
           f"compose {compose_ok}, held bound {held_ok}, derandomized worst ratio {max(ratios):.3f}")


def test_criterion_10_dichotomy(capsys):
    planted = [ex.dichotomy_experiment(1, t, d, w, trials=1000, seed=1)
               for t, d, w in ((2, 2, 4096), (3, 3, 64))]
    null = ex.dichotomy_experiment(0, 2, 2, 4096, alpha=1.0, trials=1000, seed=2)
    assert null.bound <= 0.1
    ok = all(r.ok for r in planted) and null.ok
    detail = ("b=1 exact 2d-1 in " + ", ".join(f"{r.hits}/{r.trials}" for r in planted)
              + f"; b=0 short rate {null.rate:.4f} vs bound {null.bound:.4f}")
    report(capsys, 10, ok, detail)


def test_criterion_11_random_matching(capsys):
    reps = [ex.matching_experiment(k, trials=10_000, seed=11) for k in (50, 100, 200)]
    ok = all(r.ok for r in reps)
    report(capsys, 11, ok, ", ".join(f"k={r.k}: {r.rate:.4f} (target {r.target:.4f})" for r in reps))
