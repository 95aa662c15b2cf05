"""One-pass (2k-1+eps)-spanner for weighted insertion-only streams.

Edges are routed to geometric weight buckets with base ``1 + eps/(2k)``.
Inside each bucket the classic greedy rule runs on hop counts: an edge is
kept unless its endpoints are already within ``2k-1`` hops in that bucket's
spanner. Zero-weight edges go to a spanning forest kept by union-find.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, distances_from
from .stream_core import EdgeStream, SpaceLedger, StreamError, StreamMode

EDGE_WORDS = 2  # endpoint pair + weight


@dataclass
class Spanner:
    subgraph: Graph
    k: int
    eps: float
    buckets: int = 0
    passes: int = 1
    reference_only: bool = False
    bucket_sizes: dict = field(default_factory=dict)

    @property
    def stretch_bound(self) -> float:
        return 2 * self.k - 1 + self.eps

    @property
    def m(self) -> int:
        return self.subgraph.m


def bucket_base(k: int, eps: float) -> float:
    return 1.0 + eps / (2 * k)


def bucket_of(weight: int, base: float) -> int:
    """Largest j with base**j <= weight (weight >= 1)."""
    j = int(math.floor(math.log(weight) / math.log(base)))
    while base ** j > weight:
        j -= 1
    while base ** (j + 1) <= weight:
        j += 1
    return j


def _within_hops(adj: dict, a: int, b: int, limit: int) -> bool:
    """Bidirectional BFS: is there an a-b path with at most ``limit`` edges?"""
    if a == b:
        return True
    if a not in adj or b not in adj:
        return False
    seen_a, seen_b = {a}, {b}
    front_a, front_b = [a], [b]
    depth = 0
    while front_a and front_b and depth < limit:
        if len(front_a) > len(front_b):
            front_a, front_b = front_b, front_a
            seen_a, seen_b = seen_b, seen_a
        nxt = []
        for x in front_a:
            for y in adj[x]:
                if y in seen_b:
                    return True
                if y not in seen_a:
                    seen_a.add(y)
                    nxt.append(y)
        front_a = nxt
        depth += 1
    return False


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def streaming_spanner(stream: EdgeStream, k: int, eps: float,
                      ledger: SpaceLedger | None = None) -> Spanner:
    """Build a (2k-1+eps)-spanner of an insertion-only stream in one pass."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if stream.mode is not StreamMode.INSERTION:
        raise StreamError("streaming_spanner needs an insertion-only stream; "
                          "use spanner_from_graph on the final graph instead")
    base = bucket_base(k, eps)
    limit = 2 * k - 1
    buckets: dict[int, dict[int, set]] = {}
    forest = None
    ku, kv, kw = [], [], []
    sizes: dict[int | str, int] = {}
    with stream.begin_pass_chunks() as chunks:
        for ch in chunks:
            for a, b, c in zip(ch.u.tolist(), ch.v.tolist(), ch.weight.tolist()):
                if c == 0:
                    if forest is None:
                        forest = _UnionFind(stream.n)
                        if ledger is not None:
                            ledger.charge(stream.n, "spanner")
                    if not forest.union(a, b):
                        continue
                    tag = "zero"
                else:
                    tag = bucket_of(c, base)
                    adj = buckets.setdefault(tag, {})
                    if _within_hops(adj, a, b, limit):
                        continue
                    adj.setdefault(a, set()).add(b)
                    adj.setdefault(b, set()).add(a)
                ku.append(a)
                kv.append(b)
                kw.append(c)
                sizes[tag] = sizes.get(tag, 0) + 1
                if ledger is not None:
                    ledger.charge(EDGE_WORDS, "spanner")
    h = Graph(stream.n, np.array(ku, dtype=np.int64), np.array(kv, dtype=np.int64),
              np.array(kw, dtype=np.int64))
    return Spanner(h, k, eps, buckets=len(sizes), bucket_sizes=sizes)


def spanner_from_graph(g: Graph, k: int, eps: float) -> Spanner:
    """Non-streaming reference construction over a materialized graph."""
    sp = streaming_spanner(EdgeStream.from_graph(g), k, eps)
    sp.passes = 0
    sp.reference_only = True
    return sp


def max_stretch(g: Graph, h: Graph) -> float:
    """Largest dist_h / dist_g over connected pairs with dist_g > 0."""
    dg = distances_from(g)
    dh = distances_from(h)
    reach = np.isfinite(dg)
    if np.any(~np.isfinite(dh[reach])):
        return math.inf
    pos = reach & (dg > 0)
    if np.any((dg == 0) & (dh > 0)):
        return math.inf
    if not pos.any():
        return 1.0
    return float(np.max(dh[pos] / dg[pos]))


def verify_stretch(g: Graph, h: Graph, bound: float) -> bool:
    """True iff every pairwise h-distance is within ``bound`` times the g-distance."""
    dg = distances_from(g)
    dh = distances_from(h)
    reach = np.isfinite(dg)
    if np.any(~np.isfinite(dh[reach])):
        return False
    tol = 1e-9 * np.maximum(dg[reach], 1.0)
    return bool(np.all(dh[reach] <= bound * dg[reach] + tol))


def size_bound(n: int, k: int, eps: float) -> float:
    """eps^-1 * n^(1+1/k) * log2 n, the size scale of the construction."""
    return n ** (1 + 1 / k) * math.log2(max(n, 2)) / eps
