"""Counter-based hashing used for every random decision in the package.

All draws are pure functions of integer keys, so a run is reproducible
regardless of iteration order, chunk size, or execution mode.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x):
    """Vectorized splitmix64 finalizer over uint64 arrays (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def mix_key(*parts: int) -> int:
    """Fold several integers into one 64-bit key."""
    h = np.zeros(1, dtype=np.uint64)
    for p in parts:
        h = splitmix64(h ^ np.uint64(int(p) & _MASK))
    return int(h[0])


def hash64(key: int, index) -> np.ndarray:
    """64-bit hash of ``index`` (array-like of non-negative ints) under ``key``."""
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return splitmix64(splitmix64(idx ^ np.uint64(key)) + np.uint64(key))


def uniform01(key: int, index) -> np.ndarray:
    """Uniform doubles in [0, 1) from the top 53 bits of ``hash64``."""
    return (hash64(key, index) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def uniform_open(key: int, index) -> np.ndarray:
    """Uniform doubles in (0, 1]."""
    return 1.0 - uniform01(key, index)
