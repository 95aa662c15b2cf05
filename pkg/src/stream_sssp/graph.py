"""Weighted undirected graphs and exact shortest-path trees.

Distances are float64 arrays with ``math.inf`` marking unreachable vertices.
Weights are integers below 2**40, so every finite path length on fewer than
2**13 vertices is represented exactly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

INF = math.inf
NONE = -1


class GraphError(ValueError):
    pass


def pair_keys(n: int, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Canonical int64 key of each unordered pair."""
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    return lo * np.int64(max(n, 1)) + hi


def pair_index(n: int, u, v) -> np.ndarray:
    """Index of pair {u, v} in the lexicographic enumeration of C(n, 2)."""
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    return lo * (2 * n - lo - 1) // 2 + (hi - lo - 1)


class Graph:
    """Immutable simple undirected graph with canonical ``u < v`` edge arrays."""

    def __init__(self, n: int, u, v, w, *, on_duplicate: str = "error"):
        self.n = int(n)
        u = np.asarray(u, dtype=np.int64).reshape(-1)
        v = np.asarray(v, dtype=np.int64).reshape(-1)
        w = np.asarray(w, dtype=np.int64).reshape(-1)
        if not (len(u) == len(v) == len(w)):
            raise GraphError("edge arrays differ in length")
        if len(u):
            if np.any(u == v):
                raise GraphError("self-loops are not allowed")
            if np.any(w < 0):
                raise GraphError("negative weights are not allowed")
            if u.min() < 0 or v.min() < 0 or max(u.max(), v.max()) >= self.n:
                raise GraphError("vertex id out of range")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        key = lo * np.int64(max(self.n, 1)) + hi
        order = np.lexsort((w, key))
        key, lo, hi, w = key[order], lo[order], hi[order], w[order]
        first = np.ones(len(key), dtype=bool)
        first[1:] = key[1:] != key[:-1]
        if not first.all():
            if on_duplicate == "error":
                raise GraphError("duplicate vertex pair")
            if on_duplicate != "min":
                raise ValueError(f"unknown duplicate policy {on_duplicate!r}")
            lo, hi, w = lo[first], hi[first], w[first]
        for a in (lo, hi, w):
            a.setflags(write=False)
        self.u, self.v, self.w = lo, hi, w

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], **kw) -> "Graph":
        rows = [tuple(e) for e in edges]
        if not rows:
            return cls(n, [], [], [], **kw)
        a, b, c = zip(*rows)
        return cls(n, a, b, c, **kw)

    @property
    def m(self) -> int:
        return len(self.u)

    def __len__(self) -> int:
        return self.m

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.u, other.u)
                and np.array_equal(self.v, other.v) and np.array_equal(self.w, other.w))

    __hash__ = None

    def edges(self) -> list[tuple[int, int, int]]:
        return list(zip(self.u.tolist(), self.v.tolist(), self.w.tolist()))

    def edge_set(self) -> set[tuple[int, int, int]]:
        return set(self.edges())

    @cached_property
    def keys(self) -> np.ndarray:
        return self.u * np.int64(max(self.n, 1)) + self.v

    @cached_property
    def weight_map(self) -> dict[tuple[int, int], int]:
        return {(a, b): c for a, b, c in self.edges()}

    def weight(self, a: int, b: int):
        key = (a, b) if a < b else (b, a)
        return self.weight_map.get(key)

    def has_edge(self, a: int, b: int) -> bool:
        return self.weight(a, b) is not None

    def is_subgraph_of(self, other: "Graph") -> bool:
        """Edge subset with identical weights."""
        if self.n != other.n:
            return False
        wm = other.weight_map
        return all(wm.get((a, b)) == c for a, b, c in self.edges())

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for a, b, c in self.edges():
            adj[a].append((b, c))
            adj[b].append((a, c))
        return adj

    def degrees(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.u, self.v]), minlength=self.n)


@dataclass(frozen=True, eq=False)
class ShortestPathTree:
    root: int
    parent: np.ndarray
    dist: np.ndarray

    @property
    def n(self) -> int:
        return len(self.parent)

    def same_as(self, other: "ShortestPathTree") -> bool:
        return (self.root == other.root and np.array_equal(self.parent, other.parent)
                and np.array_equal(self.dist, other.dist))

    def fingerprint(self) -> bytes:
        return self.parent.tobytes()

    def to_graph(self) -> Graph:
        """The tree as a graph; edge weights are the distance increments."""
        child = np.flatnonzero(self.parent != NONE)
        par = self.parent[child]
        w = (self.dist[child] - self.dist[par]).astype(np.int64)
        return Graph(self.n, par, child, w)

    def reachable(self) -> np.ndarray:
        return np.isfinite(self.dist)


def _spt_trivial(n: int, s: int) -> ShortestPathTree:
    parent = np.full(n, NONE, dtype=np.int64)
    dist = np.full(n, INF)
    dist[s] = 0.0
    return _freeze(s, parent, dist)


def _freeze(s, parent, dist) -> ShortestPathTree:
    parent.setflags(write=False)
    dist.setflags(write=False)
    return ShortestPathTree(int(s), parent, dist)


def spt_arrays(n: int, u: np.ndarray, v: np.ndarray, w: np.ndarray, s: int,
               *, simple: bool = False) -> ShortestPathTree:
    """Exact SPT rooted at ``s`` over the edge arrays (u, v, w).

    Duplicate pairs are allowed unless ``simple`` promises otherwise; only the
    lightest copy matters. Tie-breaking: each vertex takes as parent the
    smallest-id vertex settled before it whose edge is tight.
    """
    if not 0 <= s < n:
        raise GraphError(f"source {s} out of range")
    if len(u) == 0:
        return _spt_trivial(n, s)
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.asarray(w, dtype=np.int64)
    if not simple:
        key = pair_keys(n, u, v)
        order = np.lexsort((w, key))
        key = key[order]
        first = np.ones(len(key), dtype=bool)
        first[1:] = key[1:] != key[:-1]
        sel = order[first]
        u, v, w = u[sel], v[sel], w[sel]
    if np.any(w == 0):
        return _heap_spt(n, u, v, w, s)
    mat = sp.csr_matrix((w.astype(np.float64), (u, v)), shape=(n, n))
    dist = dijkstra(mat, directed=False, indices=s)
    a = np.concatenate([u, v])
    b = np.concatenate([v, u])
    ww = np.concatenate([w, w]).astype(np.float64)
    tight = np.isfinite(dist[a]) & (dist[a] + ww == dist[b])
    parent = np.full(n, n, dtype=np.int64)
    np.minimum.at(parent, b[tight], a[tight])
    parent[parent == n] = NONE
    parent[s] = NONE
    return _freeze(s, parent, dist)


def _heap_spt(n, u, v, w, s) -> ShortestPathTree:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for a, b, c in zip(u.tolist(), v.tolist(), w.tolist()):
        adj[a].append((b, c))
        adj[b].append((a, c))
    return _heap_spt_adj(n, adj, s)


def _heap_spt_adj(n, adj, s) -> ShortestPathTree:
    dist = [INF] * n
    pos = [-1] * n
    dist[s] = 0
    heap = [(0, s)]
    order = 0
    while heap:
        d, x = heapq.heappop(heap)
        if pos[x] >= 0 or d > dist[x]:
            continue
        pos[x] = order
        order += 1
        for y, c in adj[x]:
            nd = d + c
            if nd < dist[y]:
                dist[y] = nd
                heapq.heappush(heap, (nd, y))
    parent = [NONE] * n
    for y in range(n):
        if y == s or pos[y] < 0:
            continue
        best = n
        for x, c in adj[y]:
            if 0 <= pos[x] < pos[y] and dist[x] + c == dist[y] and x < best:
                best = x
        parent[y] = best
    return _freeze(s, np.array(parent, dtype=np.int64), np.array(dist, dtype=np.float64))


def shortest_path_tree(g: Graph, s: int) -> ShortestPathTree:
    """Exact shortest-path tree of ``g`` rooted at ``s``."""
    return spt_arrays(g.n, g.u, g.v, g.w, s, simple=True)


def dijkstra_reference(g: Graph, s: int) -> ShortestPathTree:
    """Pure-Python binary-heap Dijkstra; the independent oracle for tests."""
    if not 0 <= s < g.n:
        raise GraphError(f"source {s} out of range")
    return _heap_spt_adj(g.n, g.adjacency, s)


def tree_distance(t: ShortestPathTree, v: int) -> float:
    return float(t.dist[v])


def union(graphs: Sequence[Graph]) -> Graph:
    """Edge union; a pair present in several graphs keeps its minimum weight."""
    graphs = list(graphs)
    if not graphs:
        raise GraphError("union of no graphs")
    n = graphs[0].n
    if any(g.n != n for g in graphs):
        raise GraphError("graphs have different vertex counts")
    return Graph(n, np.concatenate([g.u for g in graphs]),
                 np.concatenate([g.v for g in graphs]),
                 np.concatenate([g.w for g in graphs]), on_duplicate="min")


def distances_from(g: Graph, sources=None) -> np.ndarray:
    """Exact distance rows for ``sources`` (all vertices if None)."""
    if g.m == 0:
        d = np.full((g.n, g.n), INF)
        np.fill_diagonal(d, 0.0)
        return d if sources is None else d[np.atleast_1d(sources)]
    mat = sp.csr_matrix((g.w.astype(np.float64), (g.u, g.v)), shape=(g.n, g.n))
    return dijkstra(mat, directed=False, indices=sources)
