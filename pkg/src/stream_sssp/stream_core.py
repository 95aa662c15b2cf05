"""Replayable edge streams, pass metering and word-level space accounting.

A stream is an immutable sequence of edge updates. Algorithms may only read
it through :meth:`EdgeStream.begin_pass` / :meth:`EdgeStream.begin_pass_chunks`,
each of which increments the pass counter. Only one pass may be active at a
time.

File format (UTF-8 text)::

    n=<int> mode=<ins|dyn>
    <u> <v> <w>          # insertion-only
    <u> <v> <w> <+|->    # dynamic

Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import enum
import os
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

MAX_WEIGHT = 1 << 40
DEFAULT_CHUNK = 8192


class StreamError(ValueError):
    """Invalid stream contents or misuse of the pass protocol."""


class StreamParseError(StreamError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class StreamMode(str, enum.Enum):
    INSERTION = "ins"
    DYNAMIC = "dyn"

    @classmethod
    def parse(cls, value) -> "StreamMode":
        if isinstance(value, cls):
            return value
        aliases = {"ins": cls.INSERTION, "insertion": cls.INSERTION,
                   "insertion-only": cls.INSERTION, "dyn": cls.DYNAMIC,
                   "dynamic": cls.DYNAMIC}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise StreamError(f"unknown stream mode {value!r}") from None


class EdgeUpdate(NamedTuple):
    u: int
    v: int
    weight: int
    sign: int = 1


class UpdateChunk(NamedTuple):
    """A contiguous block of updates; ``index`` holds stream positions."""

    index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    weight: np.ndarray
    sign: np.ndarray


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class EdgeStream:
    """In-memory replayable edge-update sequence with a pass meter.

    The update arrays stand in for the read-only input tape; they are not
    charged to any :class:`SpaceLedger`.
    """

    def __init__(self, n: int, u, v, weight, sign=None,
                 mode: StreamMode | str = StreamMode.INSERTION):
        self.n = int(n)
        self.mode = StreamMode.parse(mode)
        if self.n < 0:
            raise StreamError("vertex count must be non-negative")
        u = np.asarray(u, dtype=np.int64).reshape(-1)
        v = np.asarray(v, dtype=np.int64).reshape(-1)
        w = np.asarray(weight, dtype=np.int64).reshape(-1)
        if sign is None:
            s = np.ones(len(u), dtype=np.int8)
        else:
            s = np.asarray(sign, dtype=np.int8).reshape(-1)
        if not (len(u) == len(v) == len(w) == len(s)):
            raise StreamError("update arrays differ in length")
        _validate_updates(self.n, u, v, w, s, self.mode)
        if self.mode is StreamMode.INSERTION and len(u):
            u, v, w, s = _drop_duplicate_insertions(u, v, w, s)
        self._u = _readonly(u)
        self._v = _readonly(v)
        self._w = _readonly(w)
        self._s = _readonly(s)
        self._passes = 0
        self._active = False

    @classmethod
    def from_updates(cls, n: int, updates: Iterable, mode=StreamMode.INSERTION):
        rows = [tuple(x) for x in updates]
        if not rows:
            return cls(n, [], [], [], [], mode)
        cols = list(zip(*rows))
        sign = cols[3] if len(cols) > 3 else None
        return cls(n, cols[0], cols[1], cols[2], sign, mode)

    @classmethod
    def from_graph(cls, graph, order=None):
        """Insertion-only stream over ``graph``'s edges (canonical order unless given)."""
        u, v, w = graph.u, graph.v, graph.w
        if order is not None:
            order = np.asarray(order)
            u, v, w = u[order], v[order], w[order]
        return cls(graph.n, u, v, w, None, StreamMode.INSERTION)

    def __len__(self) -> int:
        return len(self._u)

    def __repr__(self) -> str:
        return (f"EdgeStream(n={self.n}, updates={len(self)}, "
                f"mode={self.mode.value}, passes={self._passes})")

    @property
    def pass_count(self) -> int:
        return self._passes

    def _open(self) -> None:
        if self._active:
            raise StreamError("a pass is already active on this stream")
        self._active = True
        self._passes += 1

    def _close(self) -> None:
        self._active = False

    def begin_pass(self) -> "_Pass":
        """Start a pass yielding :class:`EdgeUpdate` tuples in stream order."""
        self._open()
        return _Pass(self, self._iter_updates())

    def begin_pass_chunks(self, chunk_size: int = DEFAULT_CHUNK) -> "_Pass":
        """Start a pass yielding :class:`UpdateChunk` blocks of ``chunk_size``."""
        if chunk_size < 1:
            raise StreamError("chunk_size must be positive")
        self._open()
        return _Pass(self, self._iter_chunks(chunk_size))

    def _iter_updates(self) -> Iterator[EdgeUpdate]:
        for a, b, c, d in zip(self._u.tolist(), self._v.tolist(),
                              self._w.tolist(), self._s.tolist()):
            yield EdgeUpdate(a, b, c, d)

    def _iter_chunks(self, size: int) -> Iterator[UpdateChunk]:
        total = len(self)
        for lo in range(0, total, size):
            hi = min(total, lo + size)
            yield UpdateChunk(np.arange(lo, hi, dtype=np.int64), self._u[lo:hi],
                              self._v[lo:hi], self._w[lo:hi], self._s[lo:hi])

    def raw_arrays(self):
        """Unmetered access to the update arrays, for oracles and audits only."""
        return self._u, self._v, self._w, self._s


class _Pass:
    """Iterator wrapper that releases the stream's single-pass lock."""

    def __init__(self, stream: EdgeStream, it: Iterator):
        self._stream = stream
        self._it = it
        self._done = False

    def __iter__(self):
        return self

    def __next__(self):
        if self._done:
            raise StopIteration
        try:
            return next(self._it)
        except StopIteration:
            self.close()
            raise

    def close(self) -> None:
        if not self._done:
            self._done = True
            self._stream._close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    def __del__(self):
        self.close()


def _validate_updates(n, u, v, w, s, mode) -> None:
    if len(u) == 0:
        return
    bad = np.flatnonzero((u < 0) | (u >= n) | (v < 0) | (v >= n))
    if len(bad):
        raise StreamError(f"update {bad[0]}: vertex id out of range [0, {n})")
    bad = np.flatnonzero(u == v)
    if len(bad):
        raise StreamError(f"update {bad[0]}: self-loop on vertex {u[bad[0]]}")
    bad = np.flatnonzero(w < 0)
    if len(bad):
        raise StreamError(f"update {bad[0]}: negative weight {w[bad[0]]}")
    bad = np.flatnonzero(w > MAX_WEIGHT)
    if len(bad):
        raise StreamError(f"update {bad[0]}: weight exceeds 2^40")
    bad = np.flatnonzero((s != 1) & (s != -1))
    if len(bad):
        raise StreamError(f"update {bad[0]}: sign must be +1 or -1")
    if mode is StreamMode.INSERTION and np.any(s != 1):
        raise StreamError("deletions are not allowed in insertion-only mode")


def _drop_duplicate_insertions(u, v, w, s):
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    key = lo * (int(hi.max()) + 1) + hi
    _, first = np.unique(key, return_index=True)
    if len(first) == len(u):
        return u, v, w, s
    keep = np.sort(first)
    warnings.warn(f"dropped {len(u) - len(keep)} duplicate insertion(s); "
                  "keeping first occurrences", stacklevel=3)
    return u[keep], v[keep], w[keep], s[keep]


def parse_stream(lines: Iterable[str], mode=None) -> EdgeStream:
    header = None
    rows: list[tuple[int, int, int, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            header = _parse_header(line, lineno)
            if mode is not None and StreamMode.parse(mode) is not header[1]:
                raise StreamParseError(lineno, f"header declares mode "
                                       f"{header[1].value!r}, expected "
                                       f"{StreamMode.parse(mode).value!r}")
            continue
        rows.append(_parse_update(line, lineno, header))
    if header is None:
        raise StreamParseError(0, "missing header line 'n=<int> mode=<ins|dyn>'")
    n, smode = header
    if not rows:
        return EdgeStream(n, [], [], [], [], smode)
    u, v, w, s = (np.array(c, dtype=np.int64) for c in zip(*rows))
    return EdgeStream(n, u, v, w, s, smode)


def _parse_header(line: str, lineno: int):
    fields = {}
    for tok in line.split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise StreamParseError(lineno, f"malformed header token {tok!r}")
        fields[key] = val
    if "n" not in fields:
        raise StreamParseError(lineno, "header lacks n=<int>")
    try:
        n = int(fields["n"])
    except ValueError:
        raise StreamParseError(lineno, f"bad vertex count {fields['n']!r}") from None
    if n < 0:
        raise StreamParseError(lineno, "vertex count must be non-negative")
    try:
        mode = StreamMode.parse(fields.get("mode", "ins"))
    except StreamError as exc:
        raise StreamParseError(lineno, str(exc)) from None
    return n, mode


def _parse_update(line: str, lineno: int, header):
    n, mode = header
    tok = line.split()
    want = 3 if mode is StreamMode.INSERTION else 4
    if len(tok) != want:
        raise StreamParseError(lineno, f"expected {want} fields, got {len(tok)}")
    try:
        u, v, w = int(tok[0]), int(tok[1]), int(tok[2])
    except ValueError:
        raise StreamParseError(lineno, "endpoints and weight must be integers") from None
    if mode is StreamMode.DYNAMIC:
        if tok[3] not in ("+", "-"):
            raise StreamParseError(lineno, f"sign must be '+' or '-', got {tok[3]!r}")
        sign = 1 if tok[3] == "+" else -1
    else:
        sign = 1
    if u == v:
        raise StreamParseError(lineno, f"self-loop on vertex {u}")
    if w < 0:
        raise StreamParseError(lineno, f"negative weight {w}")
    if w > MAX_WEIGHT:
        raise StreamParseError(lineno, "weight exceeds 2^40")
    if not (0 <= u < n and 0 <= v < n):
        raise StreamParseError(lineno, f"vertex id out of range [0, {n})")
    return u, v, w, sign


def open_stream(path: str | os.PathLike, mode=None) -> EdgeStream:
    """Parse a stream file; ``mode`` (if given) must match the header."""
    with open(path, encoding="utf-8") as fh:
        return parse_stream(fh, mode)


def format_stream(stream: EdgeStream) -> str:
    u, v, w, s = stream.raw_arrays()
    out = [f"n={stream.n} mode={stream.mode.value}"]
    if stream.mode is StreamMode.INSERTION:
        out.extend(f"{a} {b} {c}" for a, b, c in zip(u.tolist(), v.tolist(), w.tolist()))
    else:
        out.extend(f"{a} {b} {c} {'+' if d > 0 else '-'}"
                   for a, b, c, d in zip(u.tolist(), v.tolist(), w.tolist(), s.tolist()))
    return "\n".join(out) + "\n"


def write_stream(path: str | os.PathLike, stream: EdgeStream) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_stream(stream))


def final_edge_weights(stream: EdgeStream) -> dict[tuple[int, int], int]:
    """Surviving pairs of a stream with their weights (unmetered).

    Per pair, the multiset of live weights must end with either nothing or a
    single copy; the surviving copy supplies the weight.
    """
    u, v, w, s = stream.raw_arrays()
    live: dict[tuple[int, int], Counter] = defaultdict(Counter)
    for a, b, c, d in zip(u.tolist(), v.tolist(), w.tolist(), s.tolist()):
        key = (a, b) if a < b else (b, a)
        live[key][c] += d
    result = {}
    for key, ctr in live.items():
        net = sum(ctr.values())
        if net not in (0, 1):
            raise StreamError(f"pair {key}: net update count {net} not in {{0, 1}}")
        if any(c < 0 for c in ctr.values()) or (net == 0 and any(ctr.values())):
            raise StreamError(f"pair {key}: deletions do not match inserted weights")
        if net == 1:
            (weight,) = [k for k, c in ctr.items() if c == 1]
            result[key] = weight
    return result


def materialize_final_graph(stream: EdgeStream):
    """Reconstruct the final graph of a stream; a testing oracle, not metered."""
    from .graph import Graph

    edges = final_edge_weights(stream)
    return Graph.from_edges(stream.n, ((a, b, c) for (a, b), c in edges.items()))


@dataclass
class SpaceLedger:
    """Word-level space accounting with per-tag peaks.

    One word holds one vertex id, one weight, or one counter cell.
    """

    current_words: int = 0
    peak_words: int = 0
    by_tag: dict[str, int] = field(default_factory=dict)

    def charge(self, words: int, tag: str = "misc") -> None:
        words = int(words)
        if words < 0:
            raise ValueError("cannot charge a negative amount")
        self.current_words += words
        self.by_tag[tag] = self.by_tag.get(tag, 0) + words
        if self.current_words > self.peak_words:
            self.peak_words = self.current_words

    def release(self, words: int, tag: str = "misc") -> None:
        words = int(words)
        if words < 0:
            raise ValueError("cannot release a negative amount")
        held = self.by_tag.get(tag, 0)
        if words > held:
            raise ValueError(f"releasing {words} words from tag {tag!r} holding {held}")
        self.by_tag[tag] = held - words
        self.current_words -= words
