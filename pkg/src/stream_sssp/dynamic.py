"""Linear l1 samplers for turnstile vectors and the dynamic-stream round.

Each sampler is a linear sketch made of two parts:

* an exact sparse-recovery table (three hashed rows of cells holding
  ``sum x``, ``sum i*x`` and a fingerprint ``sum x*g(i) mod p`` with
  ``g`` a per-sampler random hash),
  decoded by peeling. When it decodes, the sampler runs an exponential race
  ``argmax |x_i| / E_i`` over the recovered entries, which picks ``i`` with
  probability exactly ``|x_i| / ||x||_1``.
* when the vector is too dense to peel, a count-sketch of the race values
  ``z_i = x_i * round(c / E_i)``; the sampler reports the coordinate with
  the largest estimate if it beats the runner-up by a relative gap, and
  FAIL otherwise.

The exponentials ``E_i`` are hash-derived per (sampler, coordinate), so the
sketch stays linear in ``x``. Values enter as fixed point with 20 fractional
bits and every cell is an int64; the bank refuses updates that could
overflow a cell.

A :class:`SamplerBank` runs many independent samplers over the same vector
in lockstep, vectorized across lanes.
"""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict

import numpy as np

from ._hashing import mix_key, splitmix64
from .graph import pair_index, spt_arrays
from .spanner import EDGE_WORDS, spanner_from_graph
from .stream_core import (EdgeStream, SpaceLedger, StreamError, StreamMode,
                          materialize_final_graph)

FRAC_BITS = 20
PRIME = (1 << 31) - 1
RACE_NUM = float(1 << 10)
RACE_CAP = 1 << 26
_U64 = np.uint64


class _Fail:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "FAIL"

    def __bool__(self):
        return False


FAIL = _Fail()


class SketchOverflow(OverflowError):
    """An update would push a sketch cell past the int64 range."""


def to_fixed(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) >= 2.0 ** 42):
        raise SketchOverflow("value too large for the fixed-point encoding")
    return np.rint(x * (1 << FRAC_BITS)).astype(np.int64)


def _next_pow2(x: int) -> int:
    return 1 << max(1, math.ceil(math.log2(max(2, x))))


def default_sparsity(dim: int, eps: float) -> int:
    s = math.ceil(2.0 / eps * math.log2(2.0 / eps))
    return max(1, min(dim, s))


class SamplerBank:
    """``lanes`` independent l1 samplers over one shared vector of length ``dim``.

    With ``track_weight`` every recovery cell also carries ``sum x_i * w_i``
    for a per-update payload ``w`` (an edge weight), so a recovered
    coordinate reports its payload without another pass.
    """

    ROWS = 3

    def __init__(self, dim: int, eps: float = 0.1, delta: float = 0.1, lanes: int = 1,
                 seed: int = 0, *, track_weight: bool = False, sparsity: int | None = None,
                 cs_rows: int | None = None, cs_width: int | None = None):
        if dim < 1:
            raise ValueError("dim must be positive")
        if not 0 < eps < 1 or not 0 < delta < 1:
            raise ValueError("eps and delta must lie in (0, 1)")
        self.dim, self.eps, self.delta = int(dim), eps, delta
        self.lanes = int(lanes)
        self.seed = seed
        self.track_weight = track_weight
        self.sparsity = sparsity if sparsity is not None else default_sparsity(dim, eps)
        # When the table may hold every coordinate, one unhashed row is an
        # exact (and always decodable) recovery structure.
        self.direct = self.sparsity >= self.dim
        if self.direct:
            self.rows, self.width = 1, self.dim
            self.shift = _U64(0)
        else:
            self.rows = self.ROWS
            self.width = _next_pow2(math.ceil(0.5 * self.sparsity) + 1)
            self.shift = _U64(64 - int(math.log2(self.width)))
        self.gap = eps / 2
        self.use_cs = self.sparsity < self.dim
        if self.use_cs:
            r = cs_rows or 2 * math.ceil(math.log2(1 / delta) / 2) + 1
            self.cs_rows = r
            self.cs_width = cs_width or _next_pow2(math.ceil(4.0 / eps ** 2))
            self.cs_shift = _U64(64 - int(math.log2(self.cs_width)))
        else:
            self.cs_rows = self.cs_width = 0
        base = mix_key(seed, dim, 0x11)
        lane_keys = splitmix64(np.arange(self.lanes, dtype=np.uint64) + _U64(base))
        self._lane_keys = lane_keys
        rows = np.arange(self.rows, dtype=np.uint64)
        self._a = self._derive(lane_keys[:, None], rows[None, :] + _U64(1)) | _U64(1)
        self._b = self._derive(lane_keys[:, None], rows[None, :] + _U64(101))
        self._fkey = self._derive(lane_keys, _U64(7))
        shape = (self.lanes, self.rows, self.width)
        self.count = np.zeros(shape, dtype=np.int64)
        # a direct table is the vector itself and needs no decoding aids
        self.isum = None if self.direct else np.zeros(shape, dtype=np.int64)
        self.fp = None if self.direct else np.zeros(shape, dtype=np.int64)
        self.wsum = np.zeros(shape, dtype=np.int64) if track_weight else None
        if self.use_cs:
            cr = np.arange(self.cs_rows, dtype=np.uint64)
            self._ca = self._derive(lane_keys[:, None], cr[None, :] + _U64(201)) | _U64(1)
            self._cb = self._derive(lane_keys[:, None], cr[None, :] + _U64(301))
            self.cs = np.zeros((self.lanes, self.cs_rows, self.cs_width), dtype=np.int64)
        else:
            self.cs = None
        self.mass = 0
        self._limit = (2 ** 63 - 1) // max(self.dim, RACE_CAP, 1 << 23 if track_weight else 1)

    @staticmethod
    def _derive(keys, salt) -> np.ndarray:
        with np.errstate(over="ignore"):
            return splitmix64(keys ^ splitmix64(np.asarray(salt, dtype=np.uint64)))

    @property
    def words_per_lane(self) -> int:
        per_cell = (1 if self.direct else 3) + (1 if self.track_weight else 0)
        cells = self.rows * self.width * per_cell
        return cells + self.cs_rows * self.cs_width + 2 * self.rows + 2 * self.cs_rows + 2

    @property
    def words(self) -> int:
        return self.lanes * self.words_per_lane

    # -- hashing -------------------------------------------------------

    def _cells(self, idx: np.ndarray) -> np.ndarray:
        """Recovery-table column of each index: shape (lanes, rows, len(idx))."""
        if self.direct:
            return np.broadcast_to(idx.astype(np.int64)[None, None, :],
                                   (self.lanes, 1, len(idx)))
        i = idx.astype(np.uint64)[None, None, :]
        with np.errstate(over="ignore"):
            h = (self._a[:, :, None] * i + self._b[:, :, None]) >> self.shift
        return h.astype(np.int64)

    def _cell_of(self, lane, row, i) -> np.ndarray:
        """Column of index ``i[j]`` in row ``row[j]`` of lane ``lane[j]``."""
        if self.direct:
            return np.asarray(i, dtype=np.int64)
        with np.errstate(over="ignore"):
            h = (self._a[lane, row] * np.asarray(i).astype(np.uint64)
                 + self._b[lane, row]) >> self.shift
        return h.astype(np.int64)

    def _fingerprint(self, lane, i) -> np.ndarray:
        """Per-sampler hash g(i) in [1, p); ``lane`` and ``i`` broadcast."""
        h = self._derive(self._fkey[lane], np.asarray(i).astype(np.uint64) + _U64(0xF0000000))
        return (1 + h % _U64(PRIME - 1)).astype(np.int64)

    def _exponentials(self, lanes_sel, idx: np.ndarray) -> np.ndarray:
        keys = self._lane_keys[lanes_sel][:, None]
        h = self._derive(keys, idx.astype(np.uint64)[None, :] + _U64(0xE0000000))
        u = 1.0 - (h >> _U64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return -np.log(u)

    def _race_mult(self, lanes_sel, idx: np.ndarray) -> np.ndarray:
        e = self._exponentials(lanes_sel, idx)
        return np.minimum(RACE_NUM / e, float(RACE_CAP)).round().astype(np.int64)

    def _cs_cells(self, lanes_sel, idx: np.ndarray):
        i = idx.astype(np.uint64)[None, None, :]
        with np.errstate(over="ignore"):
            prod = self._ca[lanes_sel][:, :, None] * i + self._cb[lanes_sel][:, :, None]
        # top bits pick the bucket, the next bit picks the sign
        h = (prod >> self.cs_shift).astype(np.int64)
        s = ((prod >> (self.cs_shift - _U64(1))) & _U64(1)).astype(np.int64)
        return h, 1 - 2 * s

    # -- updates -------------------------------------------------------

    def update(self, idx, delta, payload=None) -> None:
        """Add real-valued ``delta`` to coordinates ``idx`` (arrays or scalars)."""
        self.update_fixed(idx, to_fixed(delta), payload)

    def update_fixed(self, idx, delta, payload=None) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        delta = np.broadcast_to(np.asarray(delta, dtype=np.int64), idx.shape)
        if len(idx) == 0:
            return
        if idx.min() < 0 or idx.max() >= self.dim:
            raise IndexError(f"coordinate out of range [0, {self.dim})")
        if self.track_weight:
            if payload is None:
                raise ValueError("this bank tracks payloads; pass payload=")
            payload = np.broadcast_to(np.asarray(payload, dtype=np.int64), idx.shape)
        # aggregate repeated coordinates (exact integer sums)
        if self.track_weight:
            key = idx * (1 << 41) + payload
            uk, inv = np.unique(key, return_inverse=True)
            agg = np.zeros(len(uk), dtype=np.int64)
            np.add.at(agg, inv, delta)
            idx, payload, delta = uk >> 41, uk & ((1 << 41) - 1), agg
        else:
            idx, inv = np.unique(idx, return_inverse=True)
            agg = np.zeros(len(idx), dtype=np.int64)
            np.add.at(agg, inv, delta)
            delta = agg
        nz = delta != 0
        idx, delta = idx[nz], delta[nz]
        if self.track_weight:
            payload = payload[nz]
        if len(idx) == 0:
            return
        added = int(np.abs(delta).astype(object).sum())
        if self.mass + added > self._limit:
            raise SketchOverflow("update would overflow a sketch cell; run aborted")
        self.mass += added
        L, R, W = self.lanes, self.rows, self.width
        base = (np.arange(L)[:, None, None] * R + np.arange(R)[None, :, None]) * W
        flat = (base + self._cells(idx)).ravel()
        c = len(idx)
        d = np.broadcast_to(delta, (L, R, c)).ravel()
        np.add.at(self.count.reshape(-1), flat, d)
        if not self.direct:
            np.add.at(self.isum.reshape(-1), flat,
                      np.broadcast_to(delta * idx, (L, R, c)).ravel())
            fpv = (np.mod(delta, PRIME)[None, :]
                   * self._fingerprint(np.arange(L)[:, None], idx[None, :]) % PRIME)
            np.add.at(self.fp.reshape(-1), flat,
                      np.broadcast_to(fpv[:, None, :], (L, R, c)).ravel())
            np.mod(self.fp, PRIME, out=self.fp)
        if self.track_weight:
            with np.errstate(over="ignore"):
                np.add.at(self.wsum.reshape(-1), flat,
                          np.broadcast_to(delta * payload, (L, R, c)).ravel())
        if self.use_cs:
            lanes = np.arange(L)
            cells, sign = self._cs_cells(lanes, idx)
            z = self._race_mult(lanes, idx) * delta[None, :]
            cbase = (np.arange(L)[:, None, None] * self.cs_rows
                     + np.arange(self.cs_rows)[None, :, None]) * self.cs_width
            np.add.at(self.cs.reshape(-1), (cbase + cells).ravel(),
                      (sign * z[:, None, :]).ravel())

    def state_bytes(self) -> bytes:
        parts = [self.count] + ([] if self.direct else [self.isum, self.fp])
        if self.wsum is not None:
            parts.append(self.wsum)
        if self.cs is not None:
            parts.append(self.cs)
        return b"".join(p.tobytes() for p in parts)

    # -- queries -------------------------------------------------------

    def _peel(self):
        """Vectorized peeling across lanes.

        Returns a per-lane ``decoded`` mask and the recovered entries as flat
        arrays (lane, index, fixed-point value, payload sum).
        """
        if self.direct:
            lane, _, col = np.nonzero(self.count)
            val = self.count[lane, 0, col]
            pay = self.wsum[lane, 0, col] if self.track_weight else np.zeros_like(val)
            return np.ones(self.lanes, dtype=bool), [lane, col, val, pay]
        count, isum, fp = self.count.copy(), self.isum.copy(), self.fp.copy()
        wsum = self.wsum.copy() if self.track_weight else None
        L, R, W = count.shape
        found = []
        for _ in range(4 * self.sparsity + 8):
            lane, row, col = np.nonzero(count)
            if len(lane) == 0:
                break
            c = count[lane, row, col]
            s = isum[lane, row, col]
            ok = (s % c) == 0
            i = s // c
            ok &= (i >= 0) & (i < self.dim)
            lane, row, col, c, i = lane[ok], row[ok], col[ok], c[ok], i[ok]
            fpx = np.mod(c, PRIME) * self._fingerprint(lane, i) % PRIME
            ok = (fpx == fp[lane, row, col]) & (self._cell_of(lane, row, i) == col)
            lane, row, col, c, i = lane[ok], row[ok], col[ok], c[ok], i[ok]
            if len(lane) == 0:
                break
            _, first = np.unique(lane * self.dim + i, return_index=True)
            lane, row, col, c, i = lane[first], row[first], col[first], c[first], i[first]
            pay = wsum[lane, row, col] if wsum is not None else np.zeros_like(c)
            found.append((lane, i, c, pay))
            # remove the recovered entries from every row
            ln = np.repeat(lane, R)
            rw = np.tile(np.arange(R), len(lane))
            cl = self._cell_of(ln, rw, np.repeat(i, R))
            np.subtract.at(count, (ln, rw, cl), np.repeat(c, R))
            np.subtract.at(isum, (ln, rw, cl), np.repeat(c * i, R))
            fpv = np.mod(c, PRIME) * self._fingerprint(lane, i) % PRIME
            np.subtract.at(fp, (ln, rw, cl), np.repeat(fpv, R))
            np.mod(fp, PRIME, out=fp)
            if wsum is not None:
                with np.errstate(over="ignore"):
                    np.subtract.at(wsum, (ln, rw, cl), np.repeat(pay, R))
        decoded = ~(count.any(axis=(1, 2)) | isum.any(axis=(1, 2)) | fp.any(axis=(1, 2)))
        if found:
            cols = [np.concatenate(x) for x in zip(*found)]
        else:
            cols = [np.zeros(0, dtype=np.int64)] * 4
        return decoded, cols

    def query(self):
        """One draw per lane: (index array with -1 for FAIL, payload array).

        Payloads are -1 unless the bank tracks them and the draw came from
        exact recovery.
        """
        out = np.full(self.lanes, -1, dtype=np.int64)
        pay = np.full(self.lanes, -1, dtype=np.int64)
        decoded, (lane, idx, val, wsum) = self._peel()
        keep = decoded[lane] & (val != 0)
        lane, idx, val, wsum = lane[keep], idx[keep], val[keep], wsum[keep]
        if len(lane):
            keys = self._lane_keys[lane]
            h = self._derive(keys, idx.astype(np.uint64) + _U64(0xE0000000))
            e = -np.log(1.0 - (h >> _U64(11)).astype(np.float64) * (1.0 / (1 << 53)))
            race = np.abs(val).astype(np.float64) / e
            best = np.full(self.lanes, -1.0)
            np.maximum.at(best, lane, race)
            win = np.flatnonzero(race == best[lane])
            # ties (probability zero) resolve to the smallest index
            win = win[np.lexsort((idx[win], lane[win]))]
            first = np.ones(len(win), dtype=bool)
            first[1:] = lane[win][1:] != lane[win][:-1]
            win = win[first]
            out[lane[win]] = idx[win]
            if self.track_weight:
                x, y = val[win], wsum[win]
                exact = (y % x) == 0
                pay[lane[win]] = np.where(exact, y // x, -1)
        if self.use_cs:
            rest = np.flatnonzero(~decoded)
            if len(rest):
                out[rest] = self._cs_query(rest)
        return out, pay

    def _cs_query(self, lanes_sel: np.ndarray) -> np.ndarray:
        res = np.full(len(lanes_sel), -1, dtype=np.int64)
        coords = np.arange(self.dim, dtype=np.int64)
        batch = max(1, 4_000_000 // (self.dim * self.cs_rows))
        for lo in range(0, len(lanes_sel), batch):
            sel = lanes_sel[lo:lo + batch]
            cells, sign = self._cs_cells(sel, coords)
            vals = np.take_along_axis(self.cs[sel], cells, axis=2) * sign
            est = np.abs(np.median(vals, axis=1))
            top2 = np.partition(est, -2, axis=1)[:, -2:] if self.dim > 1 else np.c_[np.zeros(len(sel)), est[:, 0]]
            first = np.argmax(est, axis=1)
            ok = (top2[:, 1] > 0) & (top2[:, 1] >= (1 + self.gap) * top2[:, 0])
            res[lo:lo + len(sel)] = np.where(ok, first, -1)
        return res


class L1Sampler:
    """A single linear l1 sampler (one lane of a :class:`SamplerBank`)."""

    def __init__(self, dim: int, eps: float = 0.1, delta: float = 0.1, seed: int = 0, **kw):
        self._bank = SamplerBank(dim, eps, delta, lanes=1, seed=seed, **kw)
        self.dim, self.eps, self.delta, self.seed = dim, eps, delta, seed

    @property
    def words(self) -> int:
        return self._bank.words

    def update(self, i: int, delta) -> None:
        self._bank.update(np.array([i]), np.array([delta]))

    def query(self):
        idx, _ = self._bank.query()
        return FAIL if idx[0] < 0 else int(idx[0])

    def state_bytes(self) -> bytes:
        return self._bank.state_bytes()


def sampler_update(s: L1Sampler, i: int, delta) -> None:
    if not 0 <= i < s.dim:
        raise IndexError(f"coordinate {i} out of range [0, {s.dim})")
    s.update(i, delta)


def sampler_query(s: L1Sampler):
    return s.query()


def sampler_words_shape(dim: int, eps: float, delta: float) -> float:
    """eps^-1 log(1/eps) log^2(dim) log(1/delta), the reference space scale."""
    return (1 / eps) * math.log2(1 / eps) * math.log2(max(dim, 2)) ** 2 * math.log2(1 / delta)


def bank_size(n: int, k: int, eps: float) -> int:
    """ceil(20/eps * k * n^(1+1/k) * log2 n) samplers per round."""
    return math.ceil(20.0 / eps * k * n ** (1 + 1 / k) * math.log2(max(n, 2)))


# -- the dynamic round -------------------------------------------------------


def dynamic_sample_round(stream: EdgeStream, importance_oracle, cfg, round_index: int = 1,
                         lanes: int | None = None, ledger: SpaceLedger | None = None,
                         on_chunk=None, with_counts: bool = False):
    """Sample an edge set with importance-proportional l1 samplers (one pass).

    ``importance_oracle(u, v, w)`` maps update arrays to non-negative reals
    in [0, 1]; deletions carry the same weight as the insertion they cancel,
    so each live pair's coordinate ends at its importance. Returns a dict
    ``{(u, v): weight}`` of sampled edges (failed samplers contribute
    nothing). ``on_chunk`` sees every update chunk of the same pass. With
    ``with_counts`` a second dict gives how many samplers returned each edge.
    """
    if stream.mode is not StreamMode.DYNAMIC:
        raise StreamError("dynamic_sample_round needs a dynamic stream")
    n = stream.n
    dim = max(1, n * (n - 1) // 2)
    lam = lanes if lanes is not None else bank_size(n, cfg.k, cfg.eps)
    bank = SamplerBank(dim, cfg.eps / 10, cfg.eps / 10, lanes=lam,
                       seed=mix_key(cfg.seed, round_index, 0xD1), track_weight=True)
    if ledger is not None:
        ledger.charge(bank.words, "samplers")
    with stream.begin_pass_chunks() as chunks:
        for ch in chunks:
            if on_chunk is not None:
                on_chunk(ch)
            x = to_fixed(importance_oracle(ch.u, ch.v, ch.weight))
            bank.update_fixed(pair_index(n, ch.u, ch.v), x * ch.sign.astype(np.int64),
                              payload=ch.weight)
    picked, weight = bank.query()
    ok = (picked >= 0) & (weight >= 0)
    coords, first, mult = np.unique(picked[ok], return_index=True, return_counts=True)
    lo, hi = pairs_from_indices(n, coords)
    keys = list(zip(lo.tolist(), hi.tolist()))
    sampled = dict(zip(keys, weight[ok][first].tolist()))
    if ledger is not None:
        ledger.charge(EDGE_WORDS * len(sampled), "sample")
        ledger.release(bank.words, "samplers")
    if with_counts:
        return sampled, dict(zip(keys, mult.tolist()))
    return sampled


def pairs_from_indices(n: int, idx) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse of :func:`stream_sssp.graph.pair_index`."""
    idx = np.asarray(idx, dtype=np.int64)
    lo, hi = np.triu_indices(n, 1)
    return lo[idx].astype(np.int64), hi[idx].astype(np.int64)


def pair_from_index(n: int, i: int) -> tuple[int, int]:
    """Inverse of :func:`stream_sssp.graph.pair_index`."""
    lo = 0
    row = n - 1
    while i >= row:
        i -= row
        lo += 1
        row -= 1
    return lo, lo + 1 + i


def dynamic_sssp(stream: EdgeStream, cfg, ledger: SpaceLedger | None = None,
                 run_id: str = "", lanes: int | None = None):
    """The full algorithm on a dynamic stream.

    Sampling runs through a fresh sampler bank each round; that single pass
    also totals Q. The spanner is not streamed: it is built from the
    materialized final graph and the metrics are flagged ``reference_only``.
    """
    from . import sssp as core

    if stream.mode is not StreamMode.DYNAMIC:
        raise StreamError("dynamic_sssp needs a dynamic stream")
    n = stream.n
    cfg.validate(n)
    ledger = ledger if ledger is not None else SpaceLedger()
    final = materialize_final_graph(stream)
    sp = spanner_from_graph(final, cfg.k, cfg.eps)
    ledger.charge(EDGE_WORDS * sp.m, "spanner")
    state = core.RoundState(spanner=sp)
    lb = core.log_growth(n, cfg.k)
    start = stream.pass_count
    top_prev = 0
    for r in range(cfg.R):
        # Importances are scaled into (0, 1]. The previous pass's signed
        # histogram gives the largest fail count among live edges (deleted
        # copies cancel), and one more tree adds at most one failure.
        scale = top_prev + 1 if r > 0 else 0
        hist = np.zeros(1, dtype=np.int64)

        def tally(ch, state=state):
            nonlocal hist
            f = state.fail_counts(ch.u, ch.v, ch.weight)
            hist = core._add_hist(hist, f, ch.sign.astype(np.float64))

        def oracle(u, v, w, state=state, scale=scale):
            # only cancelled copies can exceed the scale; clipping keeps
            # insertion and deletion values equal, so they still cancel
            return np.exp(np.minimum(state.fail_counts(u, v, w) - scale, 0) * lb)

        sampled = dynamic_sample_round(stream, oracle, cfg, r + 1, lanes, ledger, tally)
        live = np.flatnonzero(hist > 0)
        top_prev = int(live.max()) if len(live) else 0
        log_q = core._hist_log_total(hist, lb)
        q = core._hist_total(hist, math.exp(lb))
        fu = np.array([e[0] for e in sampled], dtype=np.int64)
        fv = np.array([e[1] for e in sampled], dtype=np.int64)
        fw = np.array(list(sampled.values()), dtype=np.int64)
        digest = hashlib.blake2b(fu.tobytes() + fv.tobytes() + fw.tobytes(),
                                 digest_size=16).digest()
        if state.trees and digest == state.last_digest:
            tree = state.trees[-1]
        else:
            h = sp.subgraph
            tree = spt_arrays(n, np.concatenate([h.u, fu]), np.concatenate([h.v, fv]),
                              np.concatenate([h.w, fw]), cfg.source)
        ledger.release(EDGE_WORDS * len(sampled), "sample")
        state = core._store_tree(state, tree, log_q, q, digest, len(sampled), ledger, n)
    metrics = core.Metrics(run_id=run_id, n=n, k=cfg.k, eps=cfg.eps, R=cfg.R,
                           spanner_passes=0, spanner_edges=sp.m, reference_only=True,
                           mode="dyn")
    metrics.passes = stream.pass_count - start
    metrics.round_passes = metrics.passes
    tree = core._finish(state, final, n, cfg, ledger, metrics)
    return tree, metrics
