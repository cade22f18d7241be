"""Seeded 64-bit hash functions used by every table in the hierarchy.

Scalar and numpy paths compute identical values; the numpy path exists so
that bulk rebuilds and dummy-probe generation stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def mix64_vec(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def prf(seed: int, x: int) -> int:
    """Keyed pseudorandom 64-bit value of the (possibly negative) integer ``x``."""
    z = mix64((x & MASK64) ^ seed)
    return mix64((z + _GOLDEN + seed) & MASK64)


def prf_vec(seed: int, xs) -> np.ndarray:
    x = np.asarray(xs, dtype=np.int64).view(np.uint64)
    with np.errstate(over="ignore"):
        z = mix64_vec(x ^ np.uint64(seed))
        return mix64_vec(z + np.uint64((_GOLDEN + seed) & MASK64))


def derive_seed(master: int, *labels: int) -> int:
    """Deterministically derive a child seed from ``master`` and integer labels."""
    z = mix64(master ^ _GOLDEN)
    for lab in labels:
        z = mix64(z ^ (lab & MASK64) ^ _M1)
    return z


@dataclass(frozen=True)
class HashPair:
    """Two independent seeded functions mapping keys into ``[0, range_m)``."""

    seed1: int
    seed2: int
    range_m: int

    def __post_init__(self):
        if self.range_m < 1:
            raise ValueError("range_m must be positive")

    def h1(self, x: int) -> int:
        return prf(self.seed1, x) % self.range_m

    def h2(self, x: int) -> int:
        return prf(self.seed2, x) % self.range_m

    def both(self, x: int) -> tuple[int, int]:
        return self.h1(x), self.h2(x)

    def h1_vec(self, xs) -> np.ndarray:
        return (prf_vec(self.seed1, xs) % np.uint64(self.range_m)).astype(np.int64)

    def h2_vec(self, xs) -> np.ndarray:
        return (prf_vec(self.seed2, xs) % np.uint64(self.range_m)).astype(np.int64)

    @classmethod
    def from_master(cls, master: int, range_m: int, *labels: int) -> "HashPair":
        return cls(derive_seed(master, 1, *labels), derive_seed(master, 2, *labels), range_m)
