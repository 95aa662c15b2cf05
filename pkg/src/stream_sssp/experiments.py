"""Seeded Monte Carlo harnesses shared by the CLI and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import derand, hard_instances as hi
from .dynamic import SamplerBank
from .workloads import random_connected_graph


@dataclass
class SamplerReport:
    dim: int
    support: int
    trials: int
    eps: float
    delta: float
    tv: float
    tv_null_mean: float
    tv_null_sd: float
    fail_rate: float
    linear: bool

    @property
    def tv_ok(self) -> bool:
        return self.tv <= self.eps + self.tv_null_mean + 4 * self.tv_null_sd

    @property
    def fail_ok(self) -> bool:
        sd = math.sqrt(self.delta * (1 - self.delta) / self.trials)
        return self.fail_rate <= self.delta + 4 * sd

    def row(self) -> dict:
        out = asdict(self)
        out.update(tv_ok=self.tv_ok, fail_ok=self.fail_ok)
        return out


def signed_test_vector(dim: int, support: int, rng, max_value: int = 100,
                       cancelled: int | None = None):
    """A random integer vector plus the updates that build it.

    ``cancelled`` extra coordinates are inserted and later deleted, so they
    end at zero but did pass through the sketch.
    """
    support = min(support, dim)
    cancelled = support // 3 if cancelled is None else cancelled
    cancelled = min(cancelled, dim - support)
    coords = rng.choice(dim, size=support + cancelled, replace=False)
    live, dead = coords[:support], coords[support:]
    vals = rng.integers(1, max_value + 1, size=support) * rng.choice([-1, 1], size=support)
    x = np.zeros(dim)
    x[live] = vals
    dead_vals = rng.integers(1, max_value + 1, size=len(dead))
    idx = np.concatenate([live, dead, dead])
    delta = np.concatenate([vals, dead_vals, -dead_vals]).astype(np.float64)
    return x, idx, delta


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def sampler_experiment(dim: int = 1000, support: int = 300, trials: int = 20000,
                       eps: float = 0.1, delta: float = 0.1, seed: int = 0,
                       null_reps: int = 200) -> SamplerReport:
    """Run ``trials`` independent samplers on one vector and compare to |x|/||x||_1.

    The TV reference is the distribution of the empirical TV of exact
    multinomial draws with the same number of successes (Monte Carlo noise).
    """
    rng = np.random.default_rng(seed)
    x, idx, dl = signed_test_vector(dim, support, rng)
    bank = SamplerBank(dim, eps, delta, lanes=trials, seed=seed)
    # feed updates in a shuffled order, a few at a time
    order = rng.permutation(len(idx))
    for part in np.array_split(order, max(1, len(order) // 64)):
        bank.update(idx[part], dl[part])
    picked, _ = bank.query()
    ok = picked >= 0
    exact = np.abs(x) / np.abs(x).sum()
    hits = int(ok.sum())
    emp = np.bincount(picked[ok], minlength=dim) / max(hits, 1)
    tv = tv_distance(emp, exact)
    null = rng.multinomial(max(hits, 1), exact, size=null_reps) / max(hits, 1)
    null_tv = 0.5 * np.abs(null - exact[None, :]).sum(axis=1)
    return SamplerReport(dim, support, trials, eps, delta, tv, float(null_tv.mean()),
                         float(null_tv.std(ddof=1)), 1 - hits / trials,
                         linearity_check(dim, eps, delta, seed))


def linearity_check(dim: int, eps: float, delta: float, seed: int, updates: int = 50) -> bool:
    """Insert a batch, then delete it: the sketch must return to its exact prior state."""
    rng = np.random.default_rng([seed, 7])
    bank = SamplerBank(dim, eps, delta, lanes=4, seed=seed)
    base_idx = rng.integers(0, dim, size=updates)
    bank.update(base_idx, rng.integers(1, 100, size=updates).astype(float))
    before = bank.state_bytes()
    idx = rng.integers(0, dim, size=updates)
    val = rng.integers(1, 100, size=updates).astype(float)
    bank.update(idx, val)
    bank.update(idx[::-1], -val[::-1])
    return bank.state_bytes() == before


# -- sparsifiers ---------------------------------------------------------------

def skewed_importances(m: int, rng) -> np.ndarray:
    """Heavy-tailed importances so that some sampling probabilities fall below 1."""
    return np.exp(rng.uniform(0, 12, size=m))


@dataclass
class SparsifierReport:
    graphs: int
    seeds: int
    eps: float
    passed: int
    total: int
    sampled_below_one: int

    @property
    def pass_rate(self) -> float:
        return self.passed / self.total if self.total else 1.0

    def row(self) -> dict:
        out = asdict(self)
        out["pass_rate"] = self.pass_rate
        return out


def sparsifier_experiment(n: int = 6, m: int = 12, graphs: int = 4, seeds: int = 2500,
                          eps: float = 0.5, seed: int = 0) -> SparsifierReport:
    """Exhaustively verify sampled sparsifiers over many graphs and seeds."""
    passed = total = below = 0
    for gi in range(graphs):
        rng = np.random.default_rng([seed, gi])
        g = random_connected_graph(n, m, int(rng.integers(1 << 31)), max_weight=6)
        wg = derand.WeightedImportanceGraph(g, skewed_importances(g.m, rng))
        p = derand.sampling_scale(n, eps) * wg.importances / wg.total
        below += int((p < 1).sum() > 0)
        for s in range(seeds):
            sp = derand.sample_sparsifier(wg, eps, seed * 1_000_003 + gi * 100_003 + s)
            passed += derand.verify_sparsifier(wg, sp, 0)
            total += 1
    return SparsifierReport(graphs, seeds, eps, passed, total, below)


# -- hard instances --------------------------------------------------------------

@dataclass
class DichotomyReport:
    b: int
    t: int
    d: int
    w: int
    alpha: float
    trials: int
    hits: int          # b=1: distance == 2d-1; b=0: distance <= 2 alpha d
    bound: float

    @property
    def rate(self) -> float:
        return self.hits / self.trials

    @property
    def ok(self) -> bool:
        if self.b == 1:
            return self.hits == self.trials
        sd = math.sqrt(max(self.bound * (1 - self.bound), 0.0) / self.trials)
        return self.rate <= self.bound + 3 * sd

    def row(self) -> dict:
        out = asdict(self)
        out.update(rate=self.rate, ok=self.ok)
        return out


def dichotomy_experiment(b: int, t: int, d: int, w: int, alpha: float = 1.0,
                         trials: int = 1000, seed: int = 0) -> DichotomyReport:
    hits = 0
    for i in range(trials):
        inst = hi.sample_or_ppc(b, t, d, w, seed * 1_000_003 + i)
        dist = hi.layer_distance(hi.collection_graph(inst), d, w)
        hits += (dist == 2 * d - 1) if b == 1 else (dist <= 2 * alpha * d)
    return DichotomyReport(b, t, d, w, alpha, trials, int(hits),
                           hi.short_path_bound(t, d, w, alpha))


@dataclass
class MatchingReport:
    k: int
    trials: int
    hits: int

    @property
    def rate(self) -> float:
        return self.hits / self.trials

    @property
    def target(self) -> float:
        return 1 - 1 / self.k ** 2

    @property
    def ok(self) -> bool:
        p = self.target
        return self.rate >= p - 3 * math.sqrt(p * (1 - p) / self.trials)

    def row(self) -> dict:
        out = asdict(self)
        out.update(rate=self.rate, target=self.target, ok=self.ok)
        return out


def matching_experiment(k: int, trials: int = 10_000, seed: int = 0) -> MatchingReport:
    """How often a random k-edge off-diagonal bipartite graph has a matching of size >= 0.1k."""
    rng = np.random.default_rng([seed, k])
    need = math.ceil(0.1 * k)
    hits = sum(hi.random_matching_size(k, rng) >= need for _ in range(trials))
    return MatchingReport(k, trials, int(hits))
