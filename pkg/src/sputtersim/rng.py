"""Counter-based random number streams.

Every stream is identified by a (seed, stream id) pair and every draw is a
pure function of (seed, stream id, counter).  This makes particle loops
order-independent: work can be chunked across any number of workers and each
particle still sees exactly the same sample sequence, which is what makes
pipeline outputs byte-identical at 1 or 8 workers.

The generator is a SplitMix64-style counter hash (Steele/Lea finalizer over a
Weyl sequence).  numpy's bit generators are counter-based too, but their API
cannot draw "one value from each of N distinct streams" in a single
vectorized call, which the per-particle-stream design needs.
"""

from __future__ import annotations

import numpy as np

_U64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def _mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 arrays (wraps mod 2**64)."""
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
        return x ^ (x >> np.uint64(31))


def _base_for(seed: int, stream_ids: np.ndarray) -> np.ndarray:
    s = np.uint64(seed & _U64)
    t = np.asarray(stream_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(s ^ _mix64(t + _GOLDEN) * _M1)


def _raw(base: np.ndarray, counters: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return _mix64(base + (counters + np.uint64(1)) * _GOLDEN)


def _to_unit(raw: np.ndarray) -> np.ndarray:
    return (raw >> np.uint64(11)).astype(np.float64) * _INV_2_53


def uniforms_at(seed: int, stream_ids: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """One uniform(0,1) draw per (stream id, counter) pair, vectorized.

    Shares the sample space with RngStream: uniforms_at(seed, s, k) equals
    the (k+1)-th uniform drawn from RngStream(seed, s).
    """
    c = np.asarray(counters, dtype=np.uint64)
    return _to_unit(_raw(_base_for(seed, stream_ids), c))


def child_stream_ids(seed: int, stream_ids: np.ndarray, event_index: np.ndarray) -> np.ndarray:
    """Deterministic stream ids for particles spawned by existing streams.

    Order-independent: depends only on the parent stream and its event count,
    never on global allocation order.
    """
    base = _base_for(seed, stream_ids)
    ev = np.asarray(event_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(np.asarray(stream_ids, dtype=np.uint64) ^ _raw(base ^ _M2, ev))


class RngStream:
    """Independent reproducible random stream.

    Identical (seed, stream id) pairs reproduce the identical sample
    sequence; distinct pairs give statistically independent sequences.
    """

    __slots__ = ("seed", "stream_id", "_base", "_counter")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id) & _U64
        self._base = _base_for(self.seed, np.asarray([self.stream_id]))[0]
        self._counter = 0

    def child(self, index: int) -> "RngStream":
        """Derived stream for a spawned particle; deterministic in (self, index)."""
        sub = child_stream_ids(self.seed, np.asarray([self.stream_id]), np.asarray([index]))[0]
        return RngStream(self.seed, int(sub))

    def _next_raw(self, n: int) -> np.ndarray:
        counters = np.arange(self._counter, self._counter + n, dtype=np.uint64)
        self._counter += n
        return _raw(self._base, counters)

    def uniform(self, size: int | None = None):
        """Uniform(0, 1) samples (53-bit mantissa)."""
        n = 1 if size is None else int(size)
        u = _to_unit(self._next_raw(n))
        return float(u[0]) if size is None else u

    def normal(self, size: int | None = None):
        """Standard normal via Box-Muller (consumes uniforms pairwise)."""
        n = 1 if size is None else int(size)
        m = (n + 1) // 2
        u1 = np.clip(np.atleast_1d(self.uniform(m)), _INV_2_53, None)
        u2 = np.atleast_1d(self.uniform(m))
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])[:n]
        return float(out[0]) if size is None else out

    def exponential(self, mean: float = 1.0, size: int | None = None):
        """Exponential samples with the given mean."""
        u = np.atleast_1d(self.uniform(size if size is not None else 1))
        out = -mean * np.log1p(-u)
        return float(out[0]) if size is None else out

    def integers(self, high: int, size: int | None = None):
        """Uniform integers in [0, high)."""
        n = 1 if size is None else int(size)
        v = (self._next_raw(n) % np.uint64(high)).astype(np.int64)
        return int(v[0]) if size is None else v
