"""Wieferich profiles of prime pairs.

u_p = v_p(q^(p-1) - 1) and u_q = v_q(p^(q-1) - 1). A pair is an (ordinary,
double) Wieferich pair when both are at least 2, and extreme when in addition
u_p >= log q / log p.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .ntcore import PrimePair, lifted_valuation, multiplicative_order

__all__ = ["WieferichProfile", "profile", "valuations", "p_square_divides", "p_square_divides_batch"]


@dataclass(frozen=True)
class WieferichProfile:
    pair: PrimePair
    u_p: int
    u_q: int
    ord_p_of_q: int
    ord_q_of_p: int
    ordinary: bool
    extreme: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("pair")
        return {"p": self.pair.p, "q": self.pair.q, **d}


def valuations(pair: PrimePair) -> tuple[int, int]:
    """(u_p, u_q)."""
    p, q = pair.p, pair.q
    return lifted_valuation(q, p - 1, p), lifted_valuation(p, q - 1, q)


def profile(pair: PrimePair) -> WieferichProfile:
    p, q = pair.p, pair.q
    u_p, u_q = valuations(pair)
    ordinary = u_p >= 2 and u_q >= 2
    # u_p >= log q / log p  <=>  p**u_p >= q, decided exactly
    extreme = u_q >= 2 and u_p >= 2 and p**u_p >= q
    return WieferichProfile(
        pair=pair,
        u_p=u_p,
        u_q=u_q,
        ord_p_of_q=multiplicative_order(q, p),
        ord_q_of_p=multiplicative_order(p, q),
        ordinary=ordinary,
        extreme=extreme,
    )


def p_square_divides(pair: PrimePair) -> bool:
    """p^2 | q^(p-1) - 1."""
    p = pair.p
    return pow(pair.q, p - 1, p * p) == 1


# -- vectorised filter -----------------------------------------------------

_TWO_52 = float(2**52)


def _mulmod(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """a*b mod m for uint64 arrays with a, b < m < 2**42.

    The quotient is estimated in double precision (off by at most one) and
    the remainder recovered in wrapping 64-bit arithmetic.
    """
    mm = np.uint64(m)
    quot = np.floor(a.astype(np.float64) * b.astype(np.float64) / float(m)).astype(np.uint64)
    r = (a * b - quot * mm).view(np.int64)
    r = np.where(r < 0, r + np.int64(m), r)
    r = np.where(r >= np.int64(m), r - np.int64(m), r)
    return r.view(np.uint64)


def _powmod(base: np.ndarray, e: int, m: int) -> np.ndarray:
    if m < 1 << 32:
        mm = np.uint64(m)
        mul = lambda x, y: x * y % mm
    else:
        mul = lambda x, y: _mulmod(x, y, m)
    result = np.ones_like(base)
    b = base % np.uint64(m)
    while e:
        if e & 1:
            result = mul(result, b)
        e >>= 1
        if e:
            b = mul(b, b)
    return result


def p_square_divides_batch(p: int, qs: np.ndarray) -> np.ndarray:
    """Boolean mask of q in `qs` with p^2 | q^(p-1) - 1; requires p < 2**21."""
    if p >= 1 << 21:
        return np.array([pow(int(q), p - 1, p * p) == 1 for q in qs], dtype=bool)
    qs = np.asarray(qs, dtype=np.uint64)
    return _powmod(qs, p - 1, p * p) == 1
