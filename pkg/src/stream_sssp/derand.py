"""Smoothness sparsifiers and the merge-and-reduce pipeline.

A sparsifier of a graph with edge importances ``q`` is a reweighted subgraph
``(H, q~)`` such that

1. ``sum q~ <= (1 + eps) * sum q``, and
2. for every acyclic ``T`` inside the parent, the ``q~``-mass of the edges
   of ``H`` that are *bad* for ``T`` is at least the ``q``-mass of all bad
   edges minus ``eps * sum q``.

An edge is bad for ``T`` when ``T``'s tree distances from the source violate
the triangle inequality across it. Verification enumerates every forest of
the parent, so it only runs on graphs with a handful of edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._hashing import mix_key, uniform01
from .graph import Graph, pair_keys, spt_arrays, union
from .spanner import EDGE_WORDS, streaming_spanner
from .stream_core import EdgeStream, SpaceLedger, StreamError, StreamMode

VERIFY_MAX_EDGES = 14
ENUM_MAX_EDGES = 10
_TOL = 1e-9


class SparsifierError(ValueError):
    pass


class SparsifierNotFound(SparsifierError):
    """The deterministic search exhausted every candidate."""


@dataclass
class WeightedImportanceGraph:
    """A graph with one positive importance per edge (aligned with ``graph.u``)."""

    graph: Graph
    importances: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.importances, dtype=np.float64).reshape(-1)
        if len(q) != self.graph.m:
            raise SparsifierError("need exactly one importance per edge")
        if np.any(~(q > 0)):
            raise SparsifierError("importances must be positive")
        self.importances = q

    @classmethod
    def uniform(cls, g: Graph, value: float = 1.0) -> "WeightedImportanceGraph":
        return cls(g, np.full(g.m, float(value)))

    @property
    def total(self) -> float:
        return float(self.importances.sum())

    def importance_map(self) -> dict:
        return {(a, b): q for (a, b, _), q in zip(self.graph.edges(), self.importances.tolist())}


@dataclass
class SmoothnessSparsifier:
    subgraph: Graph
    importances: np.ndarray
    eps: float
    parent: WeightedImportanceGraph | None = field(default=None, repr=False)
    note: str = ""

    def __post_init__(self):
        q = np.asarray(self.importances, dtype=np.float64).reshape(-1)
        if len(q) != self.subgraph.m:
            raise SparsifierError("need exactly one importance per sparsifier edge")
        if np.any(~(q > 0)):
            raise SparsifierError("sparsifier importances must be positive")
        self.importances = q
        if self.parent is not None and not self.subgraph.is_subgraph_of(self.parent.graph):
            raise SparsifierError("sparsifier edges are not a subset of the parent's")

    @property
    def total(self) -> float:
        return float(self.importances.sum())

    def as_parent(self) -> WeightedImportanceGraph:
        """View this sparsifier as a weighted graph (for composing)."""
        return WeightedImportanceGraph(self.subgraph, self.importances)

    @classmethod
    def identity(cls, parent: WeightedImportanceGraph, eps: float = 0.0) -> "SmoothnessSparsifier":
        return cls(parent.graph, parent.importances.copy(), eps, parent, note="identity")


def _is_acyclic(n: int, edges) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, *_ in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def _bad_mask(g: Graph, tree_dist: np.ndarray) -> np.ndarray:
    du, dv = tree_dist[g.u], tree_dist[g.v]
    with np.errstate(invalid="ignore"):
        return np.abs(du - dv) > g.w


def forest_distances(n: int, edges, s: int) -> np.ndarray:
    """Distances from ``s`` inside an acyclic edge set (inf off its component)."""
    if not edges:
        d = np.full(n, math.inf)
        d[s] = 0.0
        return d
    u, v, w = (np.array(c, dtype=np.int64) for c in zip(*edges))
    return np.asarray(spt_arrays(n, u, v, w, s).dist, dtype=np.float64)


def bad_edges(g: WeightedImportanceGraph, t: Graph, s: int) -> set:
    """Edges (u, v, w) of ``g`` whose endpoints' ``t``-distances differ by more than w."""
    if t.n != g.graph.n:
        raise SparsifierError("tree and graph have different vertex counts")
    if not _is_acyclic(t.n, t.edges()):
        raise SparsifierError("t is not acyclic")
    if not t.is_subgraph_of(g.graph):
        raise SparsifierError("t is not a subgraph of g")
    mask = _bad_mask(g.graph, forest_distances(t.n, t.edges(), s))
    return {e for e, b in zip(g.graph.edges(), mask.tolist()) if b}


def _graph_key(g: Graph) -> tuple:
    return (g.n, g.u.tobytes(), g.v.tobytes(), g.w.tobytes())


@lru_cache(maxsize=256)
def _bad_matrix_cached(key: tuple, s: int) -> np.ndarray:
    n, ub, vb, wb = key
    g = Graph(n, np.frombuffer(ub, dtype=np.int64), np.frombuffer(vb, dtype=np.int64),
              np.frombuffer(wb, dtype=np.int64))
    edges = g.edges()
    rows = []
    for mask in range(1 << g.m):
        sub = [edges[i] for i in range(g.m) if mask >> i & 1]
        if not _is_acyclic(n, sub):
            continue
        rows.append(_bad_mask(g, forest_distances(n, sub, s)))
    out = np.array(rows, dtype=bool).reshape(len(rows), g.m)
    out.setflags(write=False)
    return out


def bad_matrix(g: Graph, s: int) -> np.ndarray:
    """Boolean (forests x edges) table: row T marks the edges bad for forest T."""
    if g.m > VERIFY_MAX_EDGES:
        raise SparsifierError(f"exhaustive check limited to {VERIFY_MAX_EDGES} edges, got {g.m}")
    return _bad_matrix_cached(_graph_key(g), int(s))


def _aligned(parent: Graph, sub: Graph, q_sub: np.ndarray) -> np.ndarray:
    """Sparsifier importances laid out along the parent's edges (0 where absent)."""
    out = np.zeros(parent.m)
    if sub.m == 0:
        return out
    pos = np.searchsorted(parent.keys, pair_keys(parent.n, sub.u, sub.v))
    out[pos] = q_sub
    return out


def verify_sparsifier(parent: WeightedImportanceGraph, cand: SmoothnessSparsifier,
                      s: int, eps: float | None = None) -> bool:
    """Exhaustive check of both sparsifier conditions (``eps`` defaults to cand.eps)."""
    eps = cand.eps if eps is None else eps
    g = parent.graph
    if not cand.subgraph.is_subgraph_of(g):
        return False
    total = parent.total
    slack = _TOL * max(total, 1.0)
    if cand.total > (1 + eps) * total + slack:
        return False
    bad = bad_matrix(g, s).astype(np.float64)
    need = bad @ parent.importances - eps * total
    have = bad @ _aligned(g, cand.subgraph, cand.importances)
    return bool(np.all(have >= need - slack))


def sampling_scale(n: int, eps: float) -> float:
    """10 eps^-2 n log2 n."""
    return 10.0 / eps ** 2 * n * math.log2(max(n, 2))


def size_threshold(n: int, eps: float) -> int:
    """Edge budget of a sparsifier: twice the expected sample size."""
    return math.ceil(2 * sampling_scale(n, eps))


def sample_sparsifier(parent: WeightedImportanceGraph, eps: float, seed: int) -> SmoothnessSparsifier:
    """Keep each edge with probability min(1, p_e), reweighting kept edges by 1/min(1, p_e)."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    g = parent.graph
    if g.m == 0:
        return SmoothnessSparsifier(g, np.zeros(0), eps, parent)
    q = parent.importances
    p = np.minimum(1.0, sampling_scale(g.n, eps) * q / q.sum())
    draw = uniform01(mix_key(seed, 0x5A5), pair_keys(g.n, g.u, g.v))
    keep = draw < p
    sub = Graph(g.n, g.u[keep], g.v[keep], g.w[keep])
    return SmoothnessSparsifier(sub, q[keep] / p[keep], eps, parent, note="sampled")


def merge(a: SmoothnessSparsifier, b: SmoothnessSparsifier) -> SmoothnessSparsifier:
    """Union of sparsifiers of edge-disjoint parents."""
    if not math.isclose(a.eps, b.eps, rel_tol=1e-12, abs_tol=1e-15):
        raise SparsifierError("merging sparsifiers with different eps")
    if a.parent is None or b.parent is None:
        raise SparsifierError("merge needs both parents to check disjointness")
    pa, pb = a.parent.graph, b.parent.graph
    if np.intersect1d(pa.keys, pb.keys).size:
        raise SparsifierError("parent edge sets overlap")
    parent = _join(a.parent, b.parent)
    sub = union([a.subgraph, b.subgraph]) if (a.subgraph.m or b.subgraph.m) else a.subgraph
    q = np.concatenate([a.importances, b.importances])
    keys = np.concatenate([a.subgraph.keys, b.subgraph.keys])
    q = q[np.argsort(keys, kind="stable")]
    return SmoothnessSparsifier(sub, q, a.eps, parent, note="merged")


def _join(a: WeightedImportanceGraph, b: WeightedImportanceGraph) -> WeightedImportanceGraph:
    g = union([a.graph, b.graph])
    q = np.concatenate([a.importances, b.importances])
    keys = np.concatenate([a.graph.keys, b.graph.keys])
    return WeightedImportanceGraph(g, q[np.argsort(keys, kind="stable")])


def compose_eps(e1: float, e2: float) -> float:
    if e1 < 0 or e2 < 0:
        raise ValueError("eps values must be non-negative")
    return e1 + e2 + e1 * e2


def uniform_candidate_importance(parent: WeightedImportanceGraph, eps: float) -> float:
    """eps^2 / (10 n log2 n) * sum q, the fixed importance of every candidate edge."""
    n = parent.graph.n
    return eps ** 2 / (10 * n * math.log2(max(n, 2))) * parent.total


def candidate_table(parent: WeightedImportanceGraph, eps: float, s: int) -> np.ndarray:
    """Pass/fail of every uniform-importance candidate, indexed by edge bitmask."""
    g = parent.graph
    m = g.m
    c = uniform_candidate_importance(parent, eps)
    masks = np.arange(1 << m, dtype=np.int64)
    member = ((masks[:, None] >> np.arange(m)[None, :]) & 1).astype(np.float64)
    size = member.sum(axis=1)
    total = parent.total
    slack = _TOL * max(total, 1.0)
    ok = (c * size <= (1 + eps) * total + slack) & (size <= size_threshold(g.n, eps))
    bad = bad_matrix(g, s).astype(np.float64)
    need = bad @ parent.importances - eps * total
    have = c * (bad @ member.T)
    ok &= np.all(have >= need[:, None] - slack, axis=0)
    return ok


def deterministic_enumerate(parent: WeightedImportanceGraph, eps: float,
                            s: int = 0) -> SmoothnessSparsifier:
    """Deterministic search over subgraphs with one uniform importance.

    Order: the full graph first, then every edge subset by ascending
    bitmask. If no uniform candidate passes but the parent is already
    within the size budget, the parent itself (with its own importances) is
    returned; otherwise :class:`SparsifierNotFound` is raised.
    """
    g = parent.graph
    if g.m > ENUM_MAX_EDGES:
        raise SparsifierError(f"enumeration limited to {ENUM_MAX_EDGES} edges, got {g.m}")
    if g.m == 0:
        return SmoothnessSparsifier(g, np.zeros(0), eps, parent, note="empty")
    ok = candidate_table(parent, eps, s)
    c = uniform_candidate_importance(parent, eps)
    full = (1 << g.m) - 1
    hits = np.flatnonzero(ok)
    if ok[full]:
        mask = full
    elif len(hits):
        mask = int(hits[0])
    elif g.m <= size_threshold(g.n, eps):
        return SmoothnessSparsifier.identity(parent, eps)
    else:
        raise SparsifierNotFound("no uniform-importance candidate qualifies")
    keep = ((mask >> np.arange(g.m)) & 1).astype(bool)
    sub = Graph(g.n, g.u[keep], g.v[keep], g.w[keep])
    return SmoothnessSparsifier(sub, np.full(sub.m, c), eps, parent, note=f"mask={mask}")


@dataclass
class MergeReduceResult:
    sparsifier: SmoothnessSparsifier
    segments: int
    merges: int
    reductions: int
    max_held: int
    eps_level: float
    peak_words: int = 0


def level_eps(eps: float, segments_bound: int) -> float:
    """Per-reduction eps so that log2(segments) compositions stay within eps."""
    depth = max(1, math.ceil(math.log2(max(segments_bound, 2))))
    return eps / (10 * depth)


def merge_reduce_stream(stream: EdgeStream, eps: float, seed: int = 0, *, source: int = 0,
                        segment_size: int | None = None, importances=None,
                        reducer: str = "sample", ledger: SpaceLedger | None = None,
                        ) -> MergeReduceResult:
    """One-pass merge-and-reduce construction.

    The stream is cut into segments of ``segment_size`` edges. Equal-level
    sparsifiers are merged and reduced (sparsified again at a smaller eps)
    like a binary counter; at the end the survivors are merged without a
    final reduction. ``importances(u, v, w)`` supplies edge importances
    (default: all 1). ``reducer`` is ``"sample"`` or ``"deterministic"``.
    """
    if stream.mode is not StreamMode.INSERTION:
        raise StreamError("merge_reduce_stream needs an insertion-only stream")
    n = stream.n
    if segment_size is None:
        segment_size = size_threshold(n, eps)
    if segment_size < 1:
        raise ValueError("segment_size must be positive")
    bound = max(1, math.ceil((n * (n - 1) // 2) / segment_size))
    eps_new = level_eps(eps, bound)
    ledger = ledger if ledger is not None else SpaceLedger()
    stack: list[tuple[int, SmoothnessSparsifier]] = []
    stats = {"segments": 0, "merges": 0, "reductions": 0, "max_held": 0}
    buf: list[tuple] = []

    def words(sp: SmoothnessSparsifier) -> int:
        return (EDGE_WORDS + 1) * sp.subgraph.m

    def reduce(sp: SmoothnessSparsifier, level: int) -> SmoothnessSparsifier:
        stats["reductions"] += 1
        src = sp.as_parent()
        if reducer == "sample":
            out = sample_sparsifier(src, eps_new, mix_key(seed, level, stats["reductions"]))
        elif reducer == "deterministic":
            out = deterministic_enumerate(src, eps_new, source)
        else:
            raise ValueError(f"unknown reducer {reducer!r}")
        # bookkeeping: the result is a sparsifier of the original edges at the
        # composed eps; keep the original union as its parent
        return SmoothnessSparsifier(out.subgraph, out.importances,
                                    compose_eps(sp.eps, eps_new), sp.parent, note="reduced")

    def flush():
        if not buf:
            return
        a, b, c, q = zip(*buf)
        g = Graph(n, a, b, c)
        qa = np.asarray(q, dtype=np.float64)[np.lexsort((np.array(c), pair_keys(n, np.array(a), np.array(b))))]
        parent = WeightedImportanceGraph(g, qa)
        ledger.release((EDGE_WORDS + 1) * len(buf), "segment")
        buf.clear()
        item = SmoothnessSparsifier.identity(parent, 0.0)
        stats["segments"] += 1
        stack.append((0, item))
        ledger.charge(words(item), "held")
        stats["max_held"] = max(stats["max_held"], len(stack))
        while len(stack) >= 2 and stack[-1][0] == stack[-2][0]:
            (lvl, right), (_, left) = stack.pop(), stack.pop()
            ledger.release(words(right) + words(left), "held")
            merged = _merge_any(left, right)
            stats["merges"] += 1
            out = reduce(merged, lvl + 1)
            stack.append((lvl + 1, out))
            ledger.charge(words(out), "held")

    with stream.begin_pass_chunks() as chunks:
        for ch in chunks:
            q = (np.ones(len(ch.u)) if importances is None
                 else np.asarray(importances(ch.u, ch.v, ch.weight), dtype=np.float64))
            for row in zip(ch.u.tolist(), ch.v.tolist(), ch.weight.tolist(), q.tolist()):
                buf.append(row)
                ledger.charge(EDGE_WORDS + 1, "segment")
                if len(buf) == segment_size:
                    flush()
    flush()
    if not stack:
        empty = Graph(n, [], [], [])
        result = SmoothnessSparsifier(empty, np.zeros(0), 0.0,
                                      WeightedImportanceGraph(empty, np.zeros(0)), note="empty")
    else:
        result = stack[0][1]
        for _, item in stack[1:]:
            result = _merge_any(result, item)
            stats["merges"] += 1
    return MergeReduceResult(result, stats["segments"], stats["merges"], stats["reductions"],
                             stats["max_held"], eps_new, ledger.peak_words)


def _merge_any(a: SmoothnessSparsifier, b: SmoothnessSparsifier) -> SmoothnessSparsifier:
    """Merge sparsifiers with possibly different eps (the larger one holds for both)."""
    e = max(a.eps, b.eps)
    a2 = SmoothnessSparsifier(a.subgraph, a.importances, e, a.parent, a.note)
    b2 = SmoothnessSparsifier(b.subgraph, b.importances, e, b.parent, b.note)
    return merge(a2, b2)


def derandomized_sssp(stream: EdgeStream, cfg, segment_size: int = 5,
                      ledger: SpaceLedger | None = None, run_id: str = ""):
    """The algorithm with sampling replaced by a deterministic sparsifier.

    Each round runs one merge-and-reduce pass with the deterministic
    reducer at eps / (10 k n^(1/k)), with importances taken from the stored
    trees, and builds the round's tree on the spanner plus the sparsifier.
    Micro scale only: every reduction enumerates subgraphs exhaustively.
    """
    from . import sssp as core

    n = stream.n
    cfg.validate(n)
    ledger = ledger if ledger is not None else SpaceLedger()
    start = stream.pass_count
    sp = streaming_spanner(stream, cfg.k, cfg.eps, ledger)
    spanner_passes = stream.pass_count - start
    state = core.RoundState(spanner=sp)
    lb = core.log_growth(n, cfg.k)
    eps_round = cfg.eps / (10 * cfg.k * n ** (1 / cfg.k))
    for _ in range(cfg.R):
        def imp(u, v, w, state=state):
            return np.exp(state.fail_counts(u, v, w) * lb)

        res = merge_reduce_stream(stream, eps_round, source=cfg.source,
                                  segment_size=segment_size, importances=imp,
                                  reducer="deterministic")
        f = res.sparsifier.subgraph
        h = sp.subgraph
        tree = spt_arrays(n, np.concatenate([h.u, f.u]), np.concatenate([h.v, f.v]),
                          np.concatenate([h.w, f.w]), cfg.source)
        q = res.sparsifier.parent.total if res.sparsifier.parent is not None else 0.0
        state = core._store_tree(state, tree, math.log(q) if q > 0 else -math.inf, q,
                                 None, f.m, ledger, n)
    metrics = core.Metrics(run_id=run_id, n=n, k=cfg.k, eps=cfg.eps, R=cfg.R,
                           spanner_passes=spanner_passes, spanner_edges=sp.m, mode="derand")
    metrics.passes = stream.pass_count - start
    metrics.round_passes = metrics.passes - spanner_passes
    g = core._final_graph_unmetered(stream)
    tree = core._finish(state, g, n, cfg, ledger, metrics)
    return tree, metrics
