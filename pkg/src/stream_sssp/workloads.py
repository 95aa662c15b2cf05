"""Seeded random graphs and streams used by the benchmarks and the CLI."""

from __future__ import annotations

import math

import numpy as np

from .graph import Graph
from .stream_core import EdgeStream, StreamMode


def _random_pairs(rng, n: int, count: int, taken: set) -> list[tuple[int, int]]:
    out = []
    total = n * (n - 1) // 2
    count = min(count, total - len(taken))
    if count > total // 2:
        # dense regime: enumerate the complement and draw without replacement
        free = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in taken]
        pick = rng.choice(len(free), size=count, replace=False)
        return [free[i] for i in sorted(pick)]
    while len(out) < count:
        a, b = (int(x) for x in rng.integers(0, n, size=2))
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        if key in taken:
            continue
        taken.add(key)
        out.append(key)
    return out


def random_connected_graph(n: int, m: int, seed: int, max_weight: int = 100,
                           min_weight: int = 1) -> Graph:
    """Uniform random spanning tree skeleton plus ``m - (n-1)`` random extra edges."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    m = max(m, n - 1)
    m = min(m, n * (n - 1) // 2)
    perm = rng.permutation(n)
    taken: set = set()
    edges = []
    for i in range(1, n):
        a = int(perm[i])
        b = int(perm[rng.integers(0, i)])
        key = (a, b) if a < b else (b, a)
        taken.add(key)
        edges.append(key)
    edges += _random_pairs(rng, n, m - len(edges), taken)
    w = rng.integers(min_weight, max_weight + 1, size=len(edges))
    u = np.array([e[0] for e in edges], dtype=np.int64)
    v = np.array([e[1] for e in edges], dtype=np.int64)
    return Graph(n, u, v, w)


def budget_density(n: int, k: int, eps: float, scale: float) -> int:
    """Edge count proportional to (k/eps) n^(1+1/k) log2 n, capped at C(n, 2)."""
    m = scale * (k / eps) * n ** (1 + 1 / k) * math.log2(n)
    return int(min(n * (n - 1) // 2, max(n - 1, round(m))))


def shuffled_stream(g: Graph, seed: int) -> EdgeStream:
    """Insertion-only stream over ``g`` in a seeded random order."""
    order = np.random.default_rng(seed).permutation(g.m)
    return EdgeStream.from_graph(g, order)


def dynamic_stream(g: Graph, seed: int, delete_fraction: float = 0.2,
                   max_weight: int = 100) -> tuple[EdgeStream, Graph]:
    """A turnstile stream whose final graph is a random subgraph of ``g``.

    Every edge of ``g`` is inserted; a ``delete_fraction`` share of them is
    later deleted (with the matching weight). Deleted pairs are sometimes
    re-inserted with a fresh weight. Returns the stream and its final graph.
    """
    rng = np.random.default_rng(seed)
    ups = [(a, b, c, 1) for a, b, c in g.edges()]
    n_del = int(round(delete_fraction * g.m))
    doomed = rng.choice(g.m, size=n_del, replace=False)
    final = dict(((a, b), c) for a, b, c in g.edges())
    for i in doomed:
        a, b, c = int(g.u[i]), int(g.v[i]), int(g.w[i])
        ups.append((a, b, c, -1))
        del final[(a, b)]
        if rng.random() < 0.25:
            c2 = int(rng.integers(1, max_weight + 1))
            ups.append((a, b, c2, 1))
            final[(a, b)] = c2
    order = _causal_shuffle(rng, ups)
    stream = EdgeStream.from_updates(g.n, [ups[i] for i in order], StreamMode.DYNAMIC)
    fg = Graph.from_edges(g.n, ((a, b, c) for (a, b), c in final.items()))
    return stream, fg


def _causal_shuffle(rng, ups) -> list[int]:
    """Random interleaving keeping each pair's own updates in order."""
    by_pair: dict = {}
    for i, (a, b, _, _) in enumerate(ups):
        by_pair.setdefault((min(a, b), max(a, b)), []).append(i)
    slots = np.concatenate([np.full(len(ix), j) for j, ix in enumerate(by_pair.values())])
    rng.shuffle(slots)
    queues = [list(ix) for ix in by_pair.values()]
    pos = [0] * len(queues)
    out = []
    for j in slots.tolist():
        out.append(queues[j][pos[j]])
        pos[j] += 1
    return out
