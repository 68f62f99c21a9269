"""Seeded random streams and checked dense arithmetic.

Every stochastic step in the package draws from an :class:`Rng`. Streams are
derived from a root seed plus a path of keys (``rng.child("noise", 3)``), so a
consumer can be added or removed without shifting the numbers any other
consumer sees.
"""
from __future__ import annotations

import math
import zlib

import numpy as np

__all__ = ["Rng", "matmul", "uniform", "categorical", "stable_key"]


def stable_key(key) -> int:
    """Map an int or str key to a platform-independent 32-bit integer."""
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    raise TypeError(f"stream key must be int or str, not {type(key).__name__}")


class Rng:
    """A PCG64 stream identified by ``(seed, *path)``.

    Two ``Rng`` objects built from the same seed and path produce identical
    output on every platform numpy supports.
    """

    def __init__(self, seed: int, path: tuple = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = int(seed)
        self.path = tuple(stable_key(k) for k in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys) -> "Rng":
        """Independent sub-stream; does not consume from this stream."""
        return Rng(self.seed, self.path + tuple(stable_key(k) for k in keys))

    def random(self, size=None) -> np.ndarray:
        return self.gen.random(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def choice(self, seq):
        """Uniformly pick one element of a non-empty sequence."""
        if len(seq) == 0:
            raise ValueError("cannot choose from an empty sequence")
        return seq[int(self.gen.integers(len(seq)))]

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self.path})"


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("matmul produced non-finite values")
    return out


def uniform(rng: Rng, lo: float, hi: float, log_scale: bool = False) -> float:
    """One draw from [lo, hi), or from exp(U(ln lo, ln hi)) when ``log_scale``."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValueError(f"invalid interval [{lo}, {hi})")
    u = float(rng.random())
    if log_scale:
        if lo <= 0:
            raise ValueError(f"log-uniform needs lo > 0, got {lo}")
        llo, lhi = math.log(lo), math.log(hi)
        return min(math.exp(llo + u * (lhi - llo)), math.nextafter(hi, lo))
    return lo + u * (hi - lo)


def categorical(rng: Rng, probs) -> int:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a non-empty vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probs is not on the simplex: {p}")
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, p.size - 1)
