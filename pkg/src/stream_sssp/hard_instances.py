"""Layered pointer-chasing graphs and the hard instances built from them.

Public indices are 1-based (vertex ``j`` of a layer is ``1..w``); matchings
are stored internally as 0-based permutation arrays, one row per matching.

Collection graphs number their vertices layer-major and 0-based: vertex
``(layer, j)`` gets id ``(layer - 1) * w + (j - 1)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .graph import Graph
from .stream_core import EdgeStream


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class LayeredGraph:
    """``d`` layers of width ``w``; row ``i`` of ``perms`` maps layer i+1 to layer i+2."""

    d: int
    w: int
    perms: np.ndarray  # (d-1, w), 0-based

    def __post_init__(self):
        if self.d < 2 or self.w < 1:
            raise InstanceError("need d >= 2 and w >= 1")
        p = np.asarray(self.perms, dtype=np.int64).reshape(self.d - 1, self.w)
        want = np.arange(self.w)
        for row in p:
            if not np.array_equal(np.sort(row), want):
                raise InstanceError("every matching must be a permutation of [w]")
        p.setflags(write=False)
        object.__setattr__(self, "perms", p)

    @classmethod
    def identity(cls, d: int, w: int) -> "LayeredGraph":
        return cls(d, w, np.tile(np.arange(w), (d - 1, 1)))

    @classmethod
    def from_one_based(cls, d: int, w: int, matchings) -> "LayeredGraph":
        return cls(d, w, np.asarray(matchings, dtype=np.int64) - 1)

    @classmethod
    def random(cls, d: int, w: int, rng) -> "LayeredGraph":
        return cls(d, w, np.array([rng.permutation(w) for _ in range(d - 1)]).reshape(d - 1, w))

    def endpoints(self) -> np.ndarray:
        """0-based last-layer endpoint of every first-layer vertex."""
        cur = np.arange(self.w)
        for row in self.perms:
            cur = row[cur]
        return cur

    @property
    def shape(self) -> tuple[int, int]:
        return self.d, self.w


def point(g: LayeredGraph, j: int) -> int:
    """Last-layer vertex reached from first-layer vertex ``j`` (1-based)."""
    if not 1 <= j <= g.w:
        raise InstanceError(f"index {j} outside [1, {g.w}]")
    cur = j - 1
    for row in g.perms:
        cur = int(row[cur])
    return cur + 1


def _same_shape(g1: LayeredGraph, g2: LayeredGraph) -> None:
    if g1.shape != g2.shape:
        raise InstanceError(f"shape mismatch: {g1.shape} vs {g2.shape}")


def product(g1: LayeredGraph, g2: LayeredGraph) -> LayeredGraph:
    """Width-w^2 product; pair (x, y) is index (x-1)*w + y."""
    _same_shape(g1, g2)
    w = g1.w
    x, y = np.divmod(np.arange(w * w), w)
    perms = g1.perms[:, x] * w + g2.perms[:, y]
    return LayeredGraph(g1.d, w * w, perms)


def pair_index(x: int, y: int, w: int) -> int:
    return (x - 1) * w + y


def pair_of(idx: int, w: int) -> tuple[int, int]:
    x, y = divmod(idx - 1, w)
    return x + 1, y + 1


def join(g1: LayeredGraph, g2: LayeredGraph) -> LayeredGraph:
    """Depth-2d graph: g1, an identity bridge, then g2 walked backwards."""
    _same_shape(g1, g2)
    inv = np.argsort(g2.perms, axis=1)
    rows = [*g1.perms, np.arange(g1.w), *inv[::-1]]
    return LayeredGraph(2 * g1.d, g1.w, np.array(rows))


@dataclass(frozen=True)
class PPCInstance:
    g1: LayeredGraph
    g2: LayeredGraph
    b: int

    def __post_init__(self):
        _same_shape(self.g1, self.g2)
        if self.b not in (0, 1):
            raise InstanceError("b must be 0 or 1")
        if self.b == 1 and point(self.g1, 1) != point(self.g2, 1):
            raise InstanceError("b = 1 requires equal pointers from vertex 1")

    @property
    def pointers_equal(self) -> bool:
        return point(self.g1, 1) == point(self.g2, 1)


def _ppc_from_rng(b: int, d: int, w: int, rng) -> PPCInstance:
    g1 = LayeredGraph.random(d, w, rng)
    if b == 0:
        return PPCInstance(g1, LayeredGraph.random(d, w, rng), 0)
    # first d-2 matchings uniform, the last one forced to land on g1's pointer
    head = [rng.permutation(w) for _ in range(d - 2)]
    cur = 0
    for row in head:
        cur = int(row[cur])
    target = point(g1, 1) - 1
    last = rng.permutation(w)
    j = int(np.flatnonzero(last == target)[0])
    last[[cur, j]] = last[[j, cur]]
    g2 = LayeredGraph(d, w, np.array(head + [last]).reshape(d - 1, w))
    return PPCInstance(g1, g2, 1)


def sample_ppc(b: int, d: int, w: int, seed) -> PPCInstance:
    """One paired pointer-chasing instance.

    ``b = 0``: every matching uniform and independent. ``b = 1``: uniform
    conditioned on both graphs sending vertex 1 to the same endpoint.
    """
    if b not in (0, 1):
        raise InstanceError("b must be 0 or 1")
    if d < 2 or w < 2:
        raise InstanceError("need d, w >= 2")
    return _ppc_from_rng(b, d, w, np.random.default_rng(seed))


class OrPPC(list):
    """``t`` PPC instances plus the generator's metadata.

    ``i_star`` is the 1-based slot holding the equal-pointer instance when
    ``b = 1`` and ``None`` otherwise.
    """

    def __init__(self, items, b: int, i_star, seed, d: int, w: int):
        super().__init__(items)
        self.b, self.i_star, self.seed, self.d, self.w = b, i_star, seed, d, w

    @property
    def t(self) -> int:
        return len(self)

    def metadata(self) -> dict:
        return {"b": self.b, "t": self.t, "d": self.d, "w": self.w,
                "i_star": self.i_star, "seed": self.seed}


def sample_or_ppc(b: int, t: int, d: int, w: int, seed) -> OrPPC:
    """t-fold OR: all slots from the b=0 law, except one random slot when b = 1."""
    if t < 1:
        raise InstanceError("t must be at least 1")
    if b not in (0, 1):
        raise InstanceError("b must be 0 or 1")
    if d < 2 or w < 2:
        raise InstanceError("need d, w >= 2")
    i_star = int(np.random.default_rng([int(seed), 1]).integers(1, t + 1)) if b else None
    rng = np.random.default_rng(seed)
    items = [_ppc_from_rng(1 if i == i_star else 0, d, w, rng) for i in range(1, t + 1)]
    return OrPPC(items, b, i_star, seed, d, w)


def vertex_id(layer: int, j: int, w: int) -> int:
    """0-based id of (layer, j) in a collection graph, both 1-based."""
    return (layer - 1) * w + (j - 1)


def collection_graph(instances) -> Graph:
    """Unit-weight edge union of the join graphs of all instances."""
    instances = list(instances)
    if not instances:
        raise InstanceError("need at least one instance")
    d, w = instances[0].g1.shape
    for inst in instances:
        if inst.g1.shape != (d, w):
            raise InstanceError("instances disagree on (d, w)")
    us, vs = [], []
    base = np.arange(w)
    for inst in instances:
        jg = join(inst.g1, inst.g2)
        for i, row in enumerate(jg.perms):
            us.append(i * w + base)
            vs.append((i + 1) * w + row)
    u = np.concatenate(us)
    v = np.concatenate(vs)
    n = 2 * d * w
    keys = np.unique(u * n + v)
    u, v = np.divmod(keys, n)
    return Graph(n, u, v, np.ones(len(u), dtype=np.int64))


def layer_distance(g: Graph, d: int, w: int) -> float:
    """BFS distance between vertex 1 of the first layer and vertex 1 of layer 2d."""
    a = csr_matrix((np.ones(g.m), (g.u, g.v)), shape=(g.n, g.n))
    dist = shortest_path(a, directed=False, unweighted=True, indices=0)
    return float(dist[vertex_id(2 * d, 1, w)])


def short_path_bound(t: int, d: int, w: int, alpha: float) -> float:
    """(2t)^(2 alpha d) / w."""
    return (2 * t) ** (2 * alpha * d) / w


@dataclass(frozen=True)
class LemmaParams:
    t: int
    d: int
    w: int
    t_exact: float
    w_exact: float

    @property
    def rounding(self) -> str:
        return "t and w rounded down, d exact"


def lemma_params(n: int, p: int, alpha: float) -> LemmaParams:
    """t = n^(1/(4 alpha (p+2))), d = p + 2, w = n / (2 (p+2))."""
    if n < 2 or p < 0 or alpha < 1:
        raise InstanceError("need n >= 2, p >= 0 and alpha >= 1")
    limit = math.log2(n) / (4 * alpha) - 2
    if p > limit + 1e-12:
        raise InstanceError(f"p={p} exceeds log2(n)/(4 alpha) - 2 = {limit:.4g}")
    d = p + 2
    t_exact = n ** (1 / (4 * alpha * d))
    w_exact = n / (2 * d)
    t = max(1, math.floor(t_exact + 1e-9))
    return LemmaParams(t, d, max(1, math.floor(w_exact + 1e-9)), t_exact, w_exact)


def to_stream(g: Graph, seed=None) -> EdgeStream:
    """Insertion stream over a graph, canonical order or shuffled by ``seed``."""
    order = None if seed is None else np.random.default_rng(seed).permutation(g.m)
    return EdgeStream.from_graph(g, order)


# ---- rook sets -------------------------------------------------------------

def is_rook_set(P) -> bool:
    rows, cols = set(), set()
    for x, y in P:
        if x in rows or y in cols:
            return False
        rows.add(x)
        cols.add(y)
    return True


def hopcroft_karp(adj: list, n_right: int) -> list:
    """Maximum bipartite matching; returns ``match_left`` (-1 when unmatched)."""
    n_left = len(adj)
    ml = [-1] * n_left
    mr = [-1] * n_right
    inf = n_left + 1
    while True:
        dist = [inf] * n_left
        q = deque()
        for a in range(n_left):
            if ml[a] == -1:
                dist[a] = 0
                q.append(a)
        found = False
        while q:
            a = q.popleft()
            for b in adj[a]:
                c = mr[b]
                if c == -1:
                    found = True
                elif dist[c] == inf:
                    dist[c] = dist[a] + 1
                    q.append(c)
        if not found:
            return ml

        def augment(root):
            # iterative DFS along the BFS layering; via[i] is the right vertex
            # taken out of stack[i]
            stack, via = [root], []
            its = {root: iter(adj[root])}
            while stack:
                x = stack[-1]
                for b in its[x]:
                    c = mr[b]
                    if c == -1:
                        via.append(b)
                        for xx, bb in zip(stack, via):
                            ml[xx] = bb
                            mr[bb] = xx
                        return True
                    if dist[c] == dist[x] + 1:
                        via.append(b)
                        stack.append(c)
                        its[c] = iter(adj[c])
                        break
                else:
                    dist[x] = inf
                    stack.pop()
                    if via:
                        via.pop()
            return False

        for a in range(n_left):
            if ml[a] == -1:
                augment(a)


def max_matching(edges, n_left: int, n_right: int) -> list[tuple[int, int]]:
    """Maximum matching of a bipartite edge list (0-based), as a list of pairs."""
    adj = [[] for _ in range(n_left)]
    for a, b in edges:
        adj[a].append(b)
    ml = hopcroft_karp(adj, n_right)
    return [(a, b) for a, b in enumerate(ml) if b != -1]


def find_rook_subset(T) -> set:
    """A largest rook subset of ``T`` (a maximum matching of rows to columns)."""
    T = set(T)
    if not T:
        return set()
    rows = sorted({x for x, _ in T})
    cols = sorted({y for _, y in T})
    ri = {x: i for i, x in enumerate(rows)}
    ci = {y: i for i, y in enumerate(cols)}
    m = max_matching(sorted((ri[x], ci[y]) for x, y in T), len(rows), len(cols))
    return {(rows[a], cols[b]) for a, b in m}


def extend_with_diagonal(T_rook, w: int, target: int) -> set:
    """Add ``target`` diagonal pairs (i, i) that clash with no row or column of ``T_rook``.

    Diagonal slots are taken in increasing order of ``i``.
    """
    T_rook = set(T_rook)
    if not is_rook_set(T_rook):
        raise InstanceError("input is not a rook set")
    if target < 0:
        raise InstanceError("target must be non-negative")
    blocked = {x for x, _ in T_rook} | {y for _, y in T_rook}
    free = [i for i in range(1, w + 1) if i not in blocked]
    if len(free) < target:
        raise InstanceError(f"only {len(free)} diagonal slots survive, need {target}")
    return T_rook | {(i, i) for i in free[:target]}


def random_offdiagonal_pairs(k: int, count: int, rng) -> list[tuple[int, int]]:
    """``count`` distinct uniform pairs from [k] x [k] minus the diagonal (1-based)."""
    total = k * (k - 1)
    if count > total:
        raise InstanceError("not enough off-diagonal pairs")
    idx = rng.choice(total, size=count, replace=False)
    x, r = np.divmod(idx, k - 1)
    y = r + (r >= x)
    return [(int(a) + 1, int(b) + 1) for a, b in zip(x, y)]


def random_matching_size(k: int, rng) -> int:
    """Maximum matching size of a random bipartite graph with k off-diagonal edges."""
    pairs = random_offdiagonal_pairs(k, k, rng)
    return len(max_matching([(a - 1, b - 1) for a, b in pairs], k, k))
