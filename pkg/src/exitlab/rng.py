"""Counter-based random streams (Philox4x64-10).

A draw is a pure function of ``(key, counter)``: the key is
``(master_seed, stream_id)`` and the counter is ``(path_index, draw_index,
slot, 0)``. A path's random numbers therefore do not depend on how paths
are batched or ordered, which is what makes every simulation reproducible
bit for bit. The block function matches ``numpy.random.Philox``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numba as nb
import numpy as np

__all__ = ["philox4x64", "u01", "Stream", "stream_id", "uniform_block"]

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S12 = np.uint64(12)
_INV52 = 1.0 / 4503599627370496.0
_MASK64 = (1 << 64) - 1


@nb.njit(inline="always", cache=True)
def _mulhilo(a, b):
    lo = a * b
    a0 = a & _LO32
    a1 = a >> _S32
    b0 = b & _LO32
    b1 = b >> _S32
    t = a1 * b0 + ((a0 * b0) >> _S32)
    w1 = (t & _LO32) + a0 * b1
    hi = a1 * b1 + (t >> _S32) + (w1 >> _S32)
    return hi, lo


@nb.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 256-bit counter under a 128-bit key."""
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


@nb.njit(inline="always", cache=True)
def u01(x):
    """Map 64 random bits to a double in the open interval (0, 1)."""
    return (np.float64(x >> _S12) + 0.5) * _INV52


def stream_id(*labels) -> int:
    """Stable 64-bit identifier for a tuple of labels (ints or strings)."""
    text = "\x1f".join(str(x) for x in labels).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class Stream:
    """Key of a family of per-path streams."""

    seed: int
    stream: int = 0

    @property
    def key(self) -> tuple[np.uint64, np.uint64]:
        return np.uint64(self.seed & _MASK64), np.uint64(self.stream & _MASK64)

    def child(self, *labels) -> "Stream":
        return Stream(self.seed, stream_id(self.stream, *labels))


@nb.njit(cache=True)
def _uniform_block(k0, k1, path, slot, n):
    out = np.empty((n, 4))
    for j in range(n):
        a, b, c, d = philox4x64(np.uint64(path), np.uint64(j), np.uint64(slot), np.uint64(0), k0, k1)
        out[j, 0] = u01(a)
        out[j, 1] = u01(b)
        out[j, 2] = u01(c)
        out[j, 3] = u01(d)
    return out


def uniform_block(stream: Stream, path_index: int, n: int, slot: int = 0) -> np.ndarray:
    """``(n, 4)`` uniforms of one path's stream: row ``j`` is draw ``j``."""
    k0, k1 = stream.key
    return _uniform_block(k0, k1, path_index, slot, n)
