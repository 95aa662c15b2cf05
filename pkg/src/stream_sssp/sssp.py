"""Multi-pass (1+eps)-approximate single-source shortest paths.

The algorithm keeps a spanner ``H`` and, over ``R`` rounds, samples edge sets
``F`` with probability proportional to per-edge importances. Each round
builds an exact shortest-path tree on ``H + F``; an edge's importance grows
by a factor ``1 + n^(1/k)`` for every stored tree whose distances violate
the triangle inequality across it. The answer is a shortest-path tree of
the union of all stored trees.

Importances are never stored per edge. They are recomputed during every
pass from the stored trees (fail counts), so working space is the spanner
plus the trees plus the current sample.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterator

import numpy as np

from ._hashing import mix_key, uniform01
from .graph import (Graph, ShortestPathTree, distances_from, pair_keys,
                    spt_arrays, union)
from .spanner import EDGE_WORDS, Spanner, spanner_from_graph, streaming_spanner
from .stream_core import EdgeStream, SpaceLedger, StreamMode

METRIC_COLUMNS = ["run_id", "n", "m", "k", "eps", "R", "passes", "peak_words",
                  "max_ratio", "rounds_violating_potential", "max_fail_count"]

_REL_TOL = 1e-12  # float slack when comparing log-domain potentials

Scan = Callable[[], Iterator[tuple]]


def round_count(k: int, eps: float) -> int:
    """R = ceil(10 k^2 / eps), computed on the decimal value of eps."""
    return math.ceil(Fraction(10 * k * k) / Fraction(repr(float(eps))))


@dataclass(frozen=True)
class Config:
    k: int
    eps: float
    seed: int = 0
    source: int = 0
    # Multiplies the sampling coefficient. 1.0 is the real algorithm; tests
    # shrink it so that sampling probabilities drop below 1 at small n.
    coef_scale: float = 1.0

    @property
    def R(self) -> int:
        return round_count(self.k, self.eps)

    def validate(self, n: int) -> None:
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not 0 <= self.source < max(n, 1):
            raise ValueError(f"source {self.source} out of range for n={n}")
        if self.coef_scale <= 0:
            raise ValueError("coef_scale must be positive")
        if n >= 2:
            ln_n = math.log(n)
            if self.k > math.ceil(ln_n):
                raise ValueError(f"k={self.k} exceeds ceil(ln n)={math.ceil(ln_n)}")
            if self.k > ln_n:
                warnings.warn(f"k={self.k} is above ln n={ln_n:.3f}", stacklevel=3)


def log_growth(n: int, k: int) -> float:
    """log(1 + n^(1/k)), the log of the per-failure importance factor."""
    return math.log1p(n ** (1.0 / k))


def sampling_coefficient(n: int, k: int, eps: float) -> float:
    """(10/eps) * k * n^(1+1/k) * log2 n."""
    return 10.0 / eps * k * n ** (1.0 + 1.0 / k) * math.log2(max(n, 2))


def violates(t: ShortestPathTree, u: int, v: int, w) -> bool:
    """Does edge (u, v, w) violate the triangle inequality w.r.t. tree ``t``?"""
    du, dv = float(t.dist[u]), float(t.dist[v])
    fu, fv = math.isinf(du), math.isinf(dv)
    if fu or fv:
        return fu != fv
    return abs(du - dv) > w


def _violation_matrix(dist: np.ndarray, u, v, w) -> np.ndarray:
    """Boolean (trees x edges) violation table for a stack of distance rows."""
    du = dist[:, u]
    dv = dist[:, v]
    with np.errstate(invalid="ignore"):
        # inf - inf is nan and compares False: both-unreachable is no violation
        return np.abs(du - dv) > w


@dataclass(frozen=True)
class RoundState:
    """Everything carried between rounds. Never mutated after creation.

    ``trees`` lists one tree per completed round. Identical trees are stored
    once (``distinct``) with a multiplicity; importances only depend on the
    multiset.
    """

    round: int = 0
    trees: tuple = ()
    spanner: Spanner | None = None
    big_q_trace: tuple = ()
    log_q_trace: tuple = ()
    distinct: tuple = ()
    multiplicity: tuple = ()
    sample_sizes: tuple = ()
    last_digest: bytes | None = None

    @cached_property
    def dist_stack(self) -> np.ndarray:
        if not self.distinct:
            return np.zeros((0, 0))
        return np.vstack([t.dist for t in self.distinct])

    @cached_property
    def mult_array(self) -> np.ndarray:
        return np.asarray(self.multiplicity, dtype=np.int64)

    def fail_counts(self, u, v, w) -> np.ndarray:
        """Number of stored trees violated by each edge (vectorized)."""
        u = np.asarray(u)
        if not self.distinct or len(u) == 0:
            return np.zeros(len(u), dtype=np.int64)
        viol = _violation_matrix(self.dist_stack, u, np.asarray(v),
                                 np.asarray(w, dtype=np.float64))
        return self.mult_array @ viol.astype(np.int64)


def importance(u: int, v: int, w, state: RoundState, n: int, k: int) -> float:
    """(1 + n^(1/k)) ** (number of stored trees the edge violates)."""
    f = sum(1 for t in state.trees if violates(t, u, v, w))
    return (1.0 + n ** (1.0 / k)) ** f


def sampling_prob(q: float, Q: float, n: int, k: int, eps: float,
                  coef_scale: float = 1.0) -> float:
    if Q <= 0:
        raise ValueError("total importance Q must be positive")
    return min(1.0, coef_scale * sampling_coefficient(n, k, eps) * q / Q)


def _hist_log_total(hist: np.ndarray, lb: float) -> float:
    """log of sum_f hist[f] * exp(f * lb), computed stably."""
    f = np.flatnonzero(hist)
    if len(f) == 0:
        return -math.inf
    c = hist[f].astype(np.float64)
    if np.any(c < 0):
        raise ValueError("negative net importance mass")
    top = f.max()
    return math.log(float(np.sum(c * np.exp((f - top) * lb)))) + top * lb


def _hist_total(hist: np.ndarray, base: float) -> float:
    f = np.flatnonzero(hist)
    if len(f) == 0:
        return 0.0
    with np.errstate(over="ignore"):
        return float(np.sum(hist[f].astype(np.float64) * base ** f.astype(np.float64)))


def _add_hist(hist: np.ndarray, f: np.ndarray, weights=None) -> np.ndarray:
    if len(f) == 0:
        return hist
    b = np.bincount(f, weights=weights, minlength=len(hist)).astype(np.int64)
    if len(b) > len(hist):
        hist = np.concatenate([hist, np.zeros(len(b) - len(hist), dtype=np.int64)])
    hist[:len(b)] += b
    return hist


def stream_scan(stream: EdgeStream) -> Scan:
    """One metered pass per call, yielding (u, v, w) chunk arrays."""
    def scan():
        with stream.begin_pass_chunks() as chunks:
            for ch in chunks:
                yield ch.u, ch.v, ch.weight
    return scan


def graph_scan(g: Graph) -> Scan:
    """Unmetered stand-in for a pass over an in-memory graph."""
    def scan():
        yield g.u, g.v, g.w
    return scan


def _accumulate_q(scan: Scan, state: RoundState, ledger) -> np.ndarray:
    hist = np.zeros(1, dtype=np.int64)
    for u, v, w in scan():
        hist = _add_hist(hist, state.fail_counts(u, v, w))
    if ledger is not None:
        ledger.charge(len(hist), "q_total")
        ledger.release(len(hist), "q_total")
    return hist


def _sample_edges(scan: Scan, n: int, state: RoundState, cfg: Config,
                  log_q: float, ledger):
    lb = log_growth(n, cfg.k)
    log_coef = math.log(cfg.coef_scale * sampling_coefficient(n, cfg.k, cfg.eps))
    key = mix_key(cfg.seed, state.round + 1, 0x5A)
    digest = hashlib.blake2b(digest_size=16)
    fu, fv, fw = [], [], []
    taken_total = 0
    for u, v, w in scan():
        f = state.fail_counts(u, v, w)
        log_p = log_coef + f * lb - log_q
        sure = log_p >= 0.0
        take = sure.copy()
        maybe = np.flatnonzero(~sure)
        if len(maybe):
            keys = pair_keys(n, u[maybe], v[maybe])
            take[maybe] = uniform01(key, keys) < np.exp(log_p[maybe])
        sel = np.flatnonzero(take)
        if len(sel):
            fu.append(u[sel])
            fv.append(v[sel])
            fw.append(w[sel])
            digest.update(pair_keys(n, u[sel], v[sel]).tobytes())
            taken_total += len(sel)
            if ledger is not None:
                ledger.charge(EDGE_WORDS * len(sel), "sample")
    if fu:
        arrays = (np.concatenate(fu), np.concatenate(fv), np.concatenate(fw))
    else:
        arrays = (np.zeros(0, np.int64),) * 3
    return arrays, digest.digest(), taken_total


def _store_tree(state: RoundState, tree: ShortestPathTree, log_q: float, q: float,
                digest, sample_size: int, ledger, n: int) -> RoundState:
    distinct = list(state.distinct)
    mult = list(state.multiplicity)
    fp = tree.parent.tobytes() + tree.dist.tobytes()
    for i, t in enumerate(distinct):
        if t is tree or (t.parent.tobytes() + t.dist.tobytes()) == fp:
            mult[i] += 1
            tree = t
            new = False
            break
    else:
        distinct.append(tree)
        mult.append(1)
        new = True
        if ledger is not None:
            ledger.charge(2 * n + 1, "trees")
    out = RoundState(round=state.round + 1, trees=state.trees + (tree,),
                     spanner=state.spanner,
                     big_q_trace=state.big_q_trace + (q,),
                     log_q_trace=state.log_q_trace + (log_q,),
                     distinct=tuple(distinct), multiplicity=tuple(mult),
                     sample_sizes=state.sample_sizes + (sample_size,),
                     last_digest=digest)
    if not new:
        # the distance stack is unchanged; share it instead of rebuilding
        if "dist_stack" in state.__dict__:
            out.__dict__["dist_stack"] = state.__dict__["dist_stack"]
    return out


def _advance(scan: Scan, n: int, state: RoundState, cfg: Config,
             ledger: SpaceLedger | None) -> RoundState:
    """One round: pass 1 totals Q, pass 2 samples F, then a local SPT."""
    if state.spanner is None:
        raise ValueError("round state has no spanner")
    lb = log_growth(n, cfg.k)
    hist = _accumulate_q(scan, state, ledger)
    log_q = _hist_log_total(hist, lb)
    q = _hist_total(hist, math.exp(lb))
    (fu, fv, fw), digest, size = _sample_edges(scan, n, state, cfg, log_q, ledger)
    if state.trees and digest == state.last_digest:
        tree = state.trees[-1]
    else:
        h = state.spanner.subgraph
        tree = spt_arrays(n, np.concatenate([h.u, fu]), np.concatenate([h.v, fv]),
                          np.concatenate([h.w, fw]), cfg.source)
        if ledger is not None:
            ledger.charge(2 * n, "tree_build")
            ledger.release(2 * n, "tree_build")
    if ledger is not None:
        ledger.release(EDGE_WORDS * size, "sample")
    return _store_tree(state, tree, log_q, q, digest, size, ledger, n)


def run_round(stream: EdgeStream, state: RoundState, cfg: Config,
              ledger: SpaceLedger | None = None) -> RoundState:
    """Execute one round against ``stream`` (exactly two passes)."""
    if state.round >= cfg.R:
        raise ValueError("all rounds already completed")
    return _advance(stream_scan(stream), stream.n, state, cfg, ledger)


def final_tree(state: RoundState, n: int, source: int,
               ledger: SpaceLedger | None = None) -> ShortestPathTree:
    """Shortest-path tree of the union of all stored trees (no passes)."""
    if not state.distinct:
        raise ValueError("no stored trees")
    h_star = union([t.to_graph() for t in state.distinct])
    if ledger is not None:
        ledger.charge(EDGE_WORDS * h_star.m + 2 * n, "final")
    tree = spt_arrays(n, h_star.u, h_star.v, h_star.w, source, simple=True)
    if ledger is not None:
        ledger.release(EDGE_WORDS * h_star.m, "final")
    return tree


@dataclass
class Metrics:
    run_id: str = ""
    n: int = 0
    m: int = 0
    k: int = 0
    eps: float = 0.0
    R: int = 0
    passes: int = 0
    spanner_passes: int = 0
    round_passes: int = 0
    peak_words: int = 0
    max_ratio: float | None = None
    rounds_violating_potential: int = 0
    max_fail_count: int = 0
    q_trace: list = field(default_factory=list)
    log_q_trace: list = field(default_factory=list)
    fail_counts: np.ndarray | None = None
    spanner_edges: int = 0
    distinct_trees: int = 0
    reference_only: bool = False
    mode: str = "ins"
    state: RoundState | None = field(default=None, repr=False)

    def row(self) -> dict:
        out = {c: getattr(self, c) for c in METRIC_COLUMNS}
        if out["max_ratio"] is None:
            out["max_ratio"] = ""
        return out


def metrics_csv(rows, include_header: bool = True) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=METRIC_COLUMNS, lineterminator="\n")
    if include_header:
        wr.writeheader()
    for r in rows:
        wr.writerow(r.row() if isinstance(r, Metrics) else r)
    return buf.getvalue()


def check_potential_growth(trace, cfg: Config) -> bool:
    """Q^(r+1) <= (1 + eps/(10k)) Q^(r) for every consecutive pair."""
    return count_potential_violations(trace, cfg) == 0


def count_potential_violations(trace, cfg: Config, log_domain: bool = False) -> int:
    """Number of consecutive pairs breaking the growth bound."""
    vals = [float(x) for x in trace]
    step = math.log1p(cfg.eps / (10 * cfg.k))
    bad = 0
    for a, b in zip(vals, vals[1:]):
        if log_domain:
            ok = b - a <= step + _REL_TOL * max(1.0, abs(a))
        else:
            ok = b <= a * (1 + cfg.eps / (10 * cfg.k)) * (1 + _REL_TOL)
        bad += not ok
    return bad


def fail_bound(cfg: Config) -> float:
    return cfg.eps * cfg.R / (2 * cfg.k)


def check_fail_counts(metrics: Metrics, cfg: Config) -> bool:
    """Every edge failed at most eps R / (2k) times."""
    fc = metrics.fail_counts
    if fc is None or len(fc) == 0:
        return True
    return bool(np.max(fc) <= fail_bound(cfg))


def _audit(state: RoundState, g: Graph, n: int, cfg: Config):
    """Unmetered post-run instrumentation: final fail counts and Q^(R+1)."""
    fails = state.fail_counts(g.u, g.v, g.w)
    hist = _add_hist(np.zeros(1, dtype=np.int64), fails)
    lb = log_growth(n, cfg.k)
    return fails, _hist_log_total(hist, lb), _hist_total(hist, math.exp(lb))


def _finish(state: RoundState, g: Graph, n: int, cfg: Config, ledger,
            metrics: Metrics) -> ShortestPathTree:
    tree = final_tree(state, n, cfg.source, ledger)
    fails, log_q_next, q_next = _audit(state, g, n, cfg)
    metrics.q_trace = list(state.big_q_trace) + [q_next]
    metrics.log_q_trace = list(state.log_q_trace) + [log_q_next]
    metrics.rounds_violating_potential = count_potential_violations(
        metrics.log_q_trace, cfg, log_domain=True)
    metrics.fail_counts = fails
    metrics.max_fail_count = int(fails.max()) if len(fails) else 0
    metrics.distinct_trees = len(state.distinct)
    metrics.state = state
    metrics.m = g.m
    if ledger is not None:
        metrics.peak_words = ledger.peak_words
    return tree


def approx_sssp(stream: EdgeStream, cfg: Config, ledger: SpaceLedger | None = None,
                run_id: str = "") -> tuple[ShortestPathTree, Metrics]:
    """Run the full pipeline over ``stream``.

    Insertion-only streams use the one-pass spanner and two passes per
    round. Dynamic streams are routed to :func:`stream_sssp.dynamic.dynamic_sssp`.
    """
    if stream.mode is StreamMode.DYNAMIC:
        from .dynamic import dynamic_sssp
        return dynamic_sssp(stream, cfg, ledger=ledger, run_id=run_id)
    n = stream.n
    cfg.validate(n)
    ledger = ledger if ledger is not None else SpaceLedger()
    start = stream.pass_count
    sp = streaming_spanner(stream, cfg.k, cfg.eps, ledger)
    spanner_passes = stream.pass_count - start
    state = RoundState(spanner=sp)
    scan = stream_scan(stream)
    for _ in range(cfg.R):
        state = _advance(scan, n, state, cfg, ledger)
    metrics = Metrics(run_id=run_id, n=n, k=cfg.k, eps=cfg.eps, R=cfg.R,
                      spanner_passes=spanner_passes, spanner_edges=sp.m)
    metrics.passes = stream.pass_count - start
    metrics.round_passes = metrics.passes - spanner_passes
    g = _final_graph_unmetered(stream)
    tree = _finish(state, g, n, cfg, ledger, metrics)
    return tree, metrics


def _final_graph_unmetered(stream: EdgeStream) -> Graph:
    u, v, w, _ = stream.raw_arrays()
    return Graph(stream.n, u, v, w)


def explicit_sssp(g: Graph, cfg: Config, spanner: Spanner | None = None,
                  ledger: SpaceLedger | None = None,
                  run_id: str = "") -> tuple[ShortestPathTree, Metrics]:
    """Same algorithm on an in-memory graph, without a pass meter.

    With the same seed and spanner it returns a tree identical to
    :func:`approx_sssp`; by default the spanner is built over the edges in
    canonical order, which is what a stream from ``EdgeStream.from_graph``
    presents.
    """
    cfg.validate(g.n)
    ledger = ledger if ledger is not None else SpaceLedger()
    sp = spanner if spanner is not None else spanner_from_graph(g, cfg.k, cfg.eps)
    state = RoundState(spanner=sp)
    scan = graph_scan(g)
    for _ in range(cfg.R):
        state = _advance(scan, g.n, state, cfg, ledger)
    metrics = Metrics(run_id=run_id, n=g.n, k=cfg.k, eps=cfg.eps, R=cfg.R,
                      spanner_edges=sp.m, mode="explicit")
    tree = _finish(state, g, g.n, cfg, ledger, metrics)
    return tree, metrics


def approximation_ratio(tree: ShortestPathTree, g: Graph) -> float:
    """max over reachable targets of dist_tree / dist_exact (oracle: Dijkstra).

    Returns inf if the tree misses a reachable vertex or reports a finite
    distance for an unreachable one.
    """
    exact = distances_from(g, tree.root)
    got = np.asarray(tree.dist, dtype=np.float64)
    fin = np.isfinite(exact)
    if np.any(np.isfinite(got) != fin):
        return math.inf
    pos = fin & (exact > 0)
    if np.any(fin & (exact == 0) & (got > 0)):
        return math.inf
    if not pos.any():
        return 1.0
    return float(np.max(got[pos] / exact[pos]))


def telescoping_excess(state: RoundState, g: Graph, source: int) -> float:
    """max over shortest-path edges of mean_r |dist_r(u) - dist_r(v)| / w(u, v).

    Only edges tight in the exact distance labeling (on some shortest path)
    with positive weight are considered. The accepted bound is 1 + eps.
    """
    exact = distances_from(g, source)
    u, v, w = g.u, g.v, g.w.astype(np.float64)
    fin = np.isfinite(exact[u]) & np.isfinite(exact[v])
    tight = fin & (w > 0) & ((exact[u] + w == exact[v]) | (exact[v] + w == exact[u]))
    if not tight.any() or not state.distinct:
        return 0.0
    u, v, w = u[tight], v[tight], w[tight]
    D = state.dist_stack
    with np.errstate(invalid="ignore"):
        gap = np.abs(D[:, u] - D[:, v])
    gap = np.where(np.isnan(gap), 0.0, gap)
    mean = (state.mult_array @ gap) / state.mult_array.sum()
    return float(np.max(mean / w))


def with_seed(cfg: Config, seed: int) -> Config:
    return replace(cfg, seed=seed)
