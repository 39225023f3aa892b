"""Counter-based random numbers that are stable across platforms.

Every draw is a pure function of ``(seed, stream, counter)``::

    mix(z)   = SplitMix64 finaliser of z + 0x9E3779B97F4A7C15 (mod 2**64)
    word     = mix(mix(mix(seed) ^ stream) ^ counter)
    uniform  = ((word >> 11) + 0.5) / 2**53          # open interval (0, 1)
    normal_k = sqrt(-2 ln u(2k)) * cos(2 pi u(2k+1))  # Box-Muller, cosine branch

The 64-bit words are bit-exact everywhere. Normal draws also depend on the
platform ``log``/``cos``, which agree to the last ulp on IEEE machines in
practice.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _u64(v) -> np.ndarray:
    if np.isscalar(v):
        return np.asarray(int(v) & _MASK, dtype=np.uint64)
    arr = np.asarray(v)
    if arr.dtype.kind == "i":
        return arr.astype(np.int64).view(np.uint64)
    return arr.astype(np.uint64)


def words(seed: int, stream: int, counters) -> np.ndarray:
    key = _mix(_mix(_u64(seed)) ^ _u64(stream))
    return _mix(key ^ _u64(counters))


def uniforms(seed: int, stream: int, counters) -> np.ndarray:
    w = words(seed, stream, counters)
    return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seed: int, stream: int, index) -> np.ndarray:
    """Standard normal draws for ``index`` (scalar or array) of ``stream``."""
    index = np.asarray(index, dtype=np.int64)
    u1 = uniforms(seed, stream, 2 * index)
    u2 = uniforms(seed, stream, 2 * index + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
