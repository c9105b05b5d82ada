"""Exact and certified arithmetic primitives.

Valuations, multiplicative orders, S-unit splitting, factoring, certified
natural logarithms and continued-fraction convergents of log q / log p.
"""

from __future__ import annotations

import math
import random
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional

import mpmath
from mpmath import iv

__all__ = [
    "PrimePair",
    "SUnit",
    "HPReal",
    "Convergent",
    "is_prime",
    "factorint",
    "divisors",
    "padic_valuation",
    "multiplicative_order",
    "lifted_valuation",
    "split_s_unit",
    "as_s_unit",
    "hp_log",
    "log_interval",
    "iv_precision",
    "convergents_of_log_ratio",
]

# Deterministic Miller-Rabin witnesses, valid for n < 3.3e24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_SMALL_PRIMES = tuple(p for p in range(2, 1000) if all(p % d for d in range(2, int(p**0.5) + 1)))
_PROBABILISTIC_ROUNDS = 64


def _mr_composite(a: int, d: int, s: int, n: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return False
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return False
    return True


def is_prime(n: int) -> bool:
    """Miller-Rabin; deterministic below 2**64, 64 random rounds above."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    if n < 1_000_000:
        return True
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if n < 1 << 64:
        bases: Iterator[int] = iter(_MR_BASES)
    else:
        rng = random.Random(n)
        bases = (rng.randrange(2, n - 1) for _ in range(_PROBABILISTIC_ROUNDS))
    return not any(_mr_composite(a, d, s, n) for a in bases)


@dataclass(frozen=True, order=True)
class PrimePair:
    """The set S = {p, q} of two primes with p < q."""

    p: int
    q: int

    def __post_init__(self) -> None:
        if not (isinstance(self.p, int) and isinstance(self.q, int)):
            raise TypeError("p and q must be integers")
        if self.p >= self.q:
            raise ValueError(f"expected p < q, got p={self.p}, q={self.q}")
        if not is_prime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        if not is_prime(self.q):
            raise ValueError(f"q={self.q} is not prime")

    def __iter__(self):
        return iter((self.p, self.q))


@dataclass(frozen=True)
class SUnit:
    value: int
    alpha: int
    beta: int


@dataclass(frozen=True)
class Convergent:
    P: int
    Q: int


def padic_valuation(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    n = abs(n)
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


# -- factoring -------------------------------------------------------------

def _brent_rho(n: int, seed: int) -> int:
    """Return a nontrivial factor of the odd composite n (Brent's cycle detection)."""
    rng = random.Random(seed)
    while True:
        y = rng.randrange(1, n)
        c = rng.randrange(1, n)
        m = 128
        g = r = q = 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g


def factorint(n: int) -> dict[int, int]:
    """Prime factorization {prime: exponent} of n >= 1."""
    if n < 1:
        raise ValueError("factorint requires n >= 1")
    out: dict[int, int] = {}
    for p in _SMALL_PRIMES:
        if p * p > n:
            break
        if n % p == 0:
            k = 0
            while n % p == 0:
                n //= p
                k += 1
            out[p] = k
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if is_prime(m):
            out[m] = out.get(m, 0) + 1
            continue
        r = math.isqrt(m)
        if r * r == m:
            stack += [r, r]
            continue
        f = _brent_rho(m, seed=m)
        stack += [f, m // f]
    return dict(sorted(out.items()))


def divisors(n: int) -> list[int]:
    if n < 1:
        raise ValueError("divisors requires n >= 1")
    divs = [1]
    for p, k in factorint(n).items():
        divs = [d * p**i for d in divs for i in range(k + 1)]
    return sorted(divs)


def multiplicative_order(a: int, m: int) -> int:
    if m < 2:
        raise ValueError("modulus must be >= 2")
    if math.gcd(a, m) != 1:
        raise ValueError(f"gcd({a}, {m}) != 1")
    phi = 1
    for p, k in factorint(m).items():
        phi *= (p - 1) * p ** (k - 1)
    order = phi
    a %= m
    for p in factorint(phi):
        while order % p == 0 and pow(a, order // p, m) == 1:
            order //= p
    return order


def lifted_valuation(b: int, e: int, p: int, sign: int = 1) -> int:
    """v_p(b**e - sign) by modular exponentiation with an escalating p-power cap."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if b % p == 0:
        raise ValueError(f"{p} divides base {b}")
    if e < 1:
        raise ValueError("exponent must be positive")
    cap = 8
    while True:
        mod = p**cap
        r = (pow(b, e, mod) - sign) % mod
        if r:
            return padic_valuation(r, p)
        cap *= 2


# -- S-units ---------------------------------------------------------------

def split_s_unit(n: int, p: int, q: int) -> Optional[tuple[int, int]]:
    """Exponents (alpha, beta) with n = p**alpha * q**beta, or None."""
    a = 0
    while n % p == 0:
        n //= p
        a += 1
    b = 0
    while n % q == 0:
        n //= q
        b += 1
    return (a, b) if n == 1 else None


def as_s_unit(n: int, pair: PrimePair) -> Optional[SUnit]:
    if n < 1:
        raise ValueError("S-units are positive")
    ab = split_s_unit(n, pair.p, pair.q)
    return None if ab is None else SUnit(n, ab[0], ab[1])


# -- certified logarithms --------------------------------------------------

def _endpoints(x) -> tuple[mpmath.mpf, mpmath.mpf]:
    # exact endpoints of an interval value
    a, b = x._mpi_
    return mpmath.mp.make_mpf(a), mpmath.mp.make_mpf(b)


@dataclass(frozen=True)
class HPReal:
    """A real number known to lie in [lo, hi]; endpoints are exact binary floats."""

    lo: mpmath.mpf
    hi: mpmath.mpf

    @property
    def value(self) -> mpmath.mpf:
        return mpmath.ldexp(mpmath.fadd(self.lo, self.hi, exact=True), -1)

    @property
    def error_bound(self) -> mpmath.mpf:
        return mpmath.ldexp(mpmath.fsub(self.hi, self.lo, exact=True), -1)

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def as_interval(self):
        return iv.mpf([self.lo, self.hi])

    def as_fractions(self) -> tuple[Fraction, Fraction]:
        return _to_fraction(self.lo), _to_fraction(self.hi)


def _to_fraction(x: mpmath.mpf) -> Fraction:
    sign, man, exp, _ = x._mpf_
    man = int(man)
    if exp >= 0:
        v = Fraction(man << exp)
    else:
        v = Fraction(man, 1 << -exp)
    return -v if sign else v


@contextmanager
def iv_precision(prec: int):
    """Temporarily set the working precision of the interval context."""
    saved = iv.prec
    iv.prec = prec
    try:
        yield
    finally:
        iv.prec = saved


@lru_cache(maxsize=65536)
def log_interval(n: int, prec: int) -> HPReal:
    """Rigorous enclosure of log(n) at `prec` bits."""
    with iv_precision(prec):
        x = iv.log(iv.mpf(n))
    return HPReal(*_endpoints(x))


def hp_log(n: int, target_error: float) -> HPReal:
    """log(n) with certified absolute error <= target_error."""
    if n < 2:
        raise ValueError("hp_log requires n >= 2")
    if not target_error > 0:
        raise ValueError("target_error must be positive")
    prec = max(53, int(-math.log2(target_error)) + 16)
    while True:
        x = log_interval(n, prec)
        if x.error_bound <= target_error:
            return x
        prec *= 2


# -- continued fractions ---------------------------------------------------

def _cf_digits(x: Fraction) -> Iterator[int]:
    num, den = x.numerator, x.denominator
    while den:
        a, r = divmod(num, den)
        yield a
        num, den = den, r


def _certified_partial_quotients(lo: Fraction, hi: Fraction) -> list[int]:
    """Partial quotients shared by every real in [lo, hi]."""
    common = []
    for a, b in zip(_cf_digits(lo), _cf_digits(hi)):
        if a != b:
            break
        common.append(a)
    # the last agreed digit of a finite expansion may be ambiguous
    return common[:-1]


def convergents_of_log_ratio(
    pair: PrimePair, Q_max: int, P_max: int, prec: int = 128
) -> list[Convergent]:
    """All convergents P/Q of log q / log p with Q < Q_max and P < P_max.

    Partial quotients are certified against interval enclosures of the logs;
    precision is doubled until the certified prefix provably covers the box.
    """
    if Q_max < 1 or P_max < 1:
        raise ValueError("Q_max and P_max must be positive")
    prec = max(prec, 64 + 2 * max(Q_max, P_max).bit_length())
    while True:
        lp_lo, lp_hi = log_interval(pair.p, prec).as_fractions()
        lq_lo, lq_hi = log_interval(pair.q, prec).as_fractions()
        digits = _certified_partial_quotients(lq_lo / lp_hi, lq_hi / lp_lo)
        out: list[Convergent] = []
        P0, Q0, P1, Q1 = 1, 0, 0, 1  # (P_{k-1}, Q_{k-1}), (P_{k-2}, Q_{k-2})
        complete = False
        for a in digits:
            P0, Q0, P1, Q1 = a * P0 + P1, a * Q0 + Q1, P0, Q0
            if P0 >= P_max or Q0 >= Q_max:
                complete = True
                break
            out.append(Convergent(P0, Q0))
        if not complete and digits:
            # every later partial quotient is >= 1
            complete = P0 + P1 >= P_max or Q0 + Q1 >= Q_max
        if complete:
            return out
        prec *= 2
