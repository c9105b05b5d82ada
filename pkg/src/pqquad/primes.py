"""Segmented sieve with O(log n) prime counting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["PrimeTable", "sieve_primes"]


def _simple_sieve(limit: int) -> np.ndarray:
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags)


@dataclass(frozen=True)
class PrimeTable:
    limit: int
    primes: np.ndarray  # ascending int64

    def pi(self, x: int) -> int:
        """Number of primes <= x (x may not exceed the sieve limit)."""
        if x > self.limit:
            raise ValueError(f"pi({x}) is beyond the sieve limit {self.limit}")
        return int(np.searchsorted(self.primes, x, side="right"))

    def count_between(self, lo: int, hi: int) -> int:
        """Primes in the closed interval [lo, hi]."""
        if hi < lo:
            return 0
        return self.pi(hi) - self.pi(lo - 1) if lo > 0 else self.pi(hi)

    def residue_class(self, r: int, m: int) -> np.ndarray:
        return self.primes[self.primes % m == r]


def sieve_primes(limit: int, segment: int = 1 << 18) -> PrimeTable:
    """All primes <= limit, sieving [sqrt(limit), limit] in fixed-size segments."""
    if limit < 2:
        raise ValueError("limit must be at least 2")
    root = math.isqrt(limit)
    base = _simple_sieve(max(root, 2))
    chunks = [base[base <= limit]]
    lo = root + 1
    while lo <= limit:
        hi = min(lo + segment, limit + 1)
        flags = np.ones(hi - lo, dtype=bool)
        for p in base:
            p = int(p)
            if p * p >= hi:
                break
            start = max(p * p, -(-lo // p) * p)
            flags[start - lo :: p] = False
        chunks.append(lo + np.flatnonzero(flags))
        lo = hi
    return PrimeTable(limit, np.concatenate(chunks).astype(np.int64))
