"""Exhaustive search for {p,q}-Diophantine quadruples of one prime pair.

Pipeline: initial bound C0 on log d, continued-fraction reduction to (C, C1),
triples (a, b, c) from gcd(s1 - 1, s2 - 1) with s1, s2 in the C1 box, then
extension by every S-unit s6 = cd + 1 compatible with d < e^C.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import mpmath

from .bounds import DEFAULT_PRECISION, BoundState, initial_log_d_bound, reduce_fixpoint
from .ntcore import PrimePair, divisors, iv_precision, log_interval, split_s_unit
from .tuples import STuple, verify_tuple
from .wieferich import valuations

__all__ = [
    "ConstantInapplicable",
    "SearchReport",
    "MAX_RETAINED_TRIPLES",
    "exponent_limit",
    "enumerate_triples",
    "extend_quadruples",
    "search_pair",
]

MAX_RETAINED_TRIPLES = 10_000


class ConstantInapplicable(ValueError):
    pass


@dataclass
class SearchReport:
    pair: PrimePair
    u_p: int
    u_q: int
    bound_state: BoundState
    triples_count: int
    triples: Optional[list[tuple[int, int, int]]]
    quadruples: list[STuple]
    exponent_ranges: dict[str, int]
    wall_time: float = 0.0
    notes: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        bs = self.bound_state
        delta = float(bs.delta)
        return {
            "p": self.pair.p,
            "q": self.pair.q,
            "u_p": self.u_p,
            "u_q": self.u_q,
            "triples_count": self.triples_count,
            "quadruples": [list(t.entries) for t in self.quadruples],
            "c0": float(bs.C0),
            "c_final": float(bs.C),
            "c1": float(bs.C1),
            "delta": delta if math.isfinite(delta) else None,
            "millis": round(self.wall_time * 1000, 3),
        }

    def to_dict(self) -> dict:
        d = self.to_record()
        d["iterations"] = self.bound_state.iterations
        d["exponent_ranges"] = dict(self.exponent_ranges)
        d["triples"] = None if self.triples is None else [list(t) for t in self.triples]
        d["trace"] = [vars(s) for s in self.bound_state.trace]
        return d


def exponent_limit(bound, prime: int, prec: int = DEFAULT_PRECISION) -> int:
    """floor of an upper enclosure of bound / log(prime); never too small."""
    with iv_precision(prec):
        x = mpmath.iv.mpf(bound) / log_interval(prime, prec).as_interval()
        return int(mpmath.floor(mpmath.mp.make_mpf(x._mpi_[1])))


def _box_units(p: int, q: int, alpha_max: int, beta_max: int) -> list[int]:
    out = []
    pa = 1
    for _ in range(alpha_max + 1):
        u = pa
        for _ in range(beta_max + 1):
            out.append(u)
            u *= q
        pa *= p
    return sorted(out)


@lru_cache(maxsize=4096)
def _divisors(n: int) -> tuple[int, ...]:
    return tuple(divisors(n))


def enumerate_triples(
    pair: PrimePair, C1, prec: int = DEFAULT_PRECISION
) -> list[tuple[int, int, int]]:
    """Triples (a, b, c) with ab+1 = s1 and ac+1 = s2 S-units inside the C1 box."""
    p, q = pair.p, pair.q
    units = [s for s in _box_units(p, q, exponent_limit(C1, p, prec), exponent_limit(C1, q, prec)) if s >= 2]
    found = set()
    for i, s1 in enumerate(units):
        m1 = s1 - 1
        for s2 in units[i + 1:]:
            m2 = s2 - 1
            g = math.gcd(m1, m2)
            for a in _divisors(g):
                if a * a >= m1:
                    break
                b, c = m1 // a, m2 // a
                if split_s_unit(b * c + 1, p, q) is not None:
                    found.add((a, b, c))
    return sorted(found)


def extend_quadruples(
    pair: PrimePair, C, triples: list[tuple[int, int, int]], prec: int = DEFAULT_PRECISION
) -> list[STuple]:
    """Quadruples (a, b, c, d) from S-units s6 = cd + 1 with d < e^C.

    For each triple the exponent box covers log s6 <= C + log c, which
    contains both every s6 = cd + 1 with d < e^C and the plain C box.
    """
    p, q = pair.p, pair.q
    quads = set()
    unit_cache: dict[tuple[int, int], list[int]] = {}
    for a, b, c in triples:
        with iv_precision(prec):
            bound = mpmath.iv.mpf(C)
            if c > 1:
                bound += log_interval(c, prec).as_interval()
        key = (exponent_limit(bound, p, prec), exponent_limit(bound, q, prec))
        if key not in unit_cache:
            unit_cache[key] = _box_units(p, q, *key)
        for s6 in unit_cache[key]:
            m6 = s6 - 1
            if m6 % c:
                continue
            d = m6 // c
            if d <= c:
                continue
            if split_s_unit(a * d + 1, p, q) is None or split_s_unit(b * d + 1, p, q) is None:
                continue
            quads.add((a, b, c, d))
    return [verify_tuple(t, pair) for t in sorted(quads)]


def search_pair(
    pair: PrimePair,
    c0_override=None,
    prec: int = DEFAULT_PRECISION,
    u: Optional[tuple[int, int]] = None,
) -> SearchReport:
    """Run the full search for one pair and return its report.

    The initial bound 104076 log p log q is only justified when p or q is
    not 1 mod 4; other pairs need an explicit `c0_override`.
    """
    start = time.perf_counter()
    if c0_override is None and pair.p % 4 == 1 and pair.q % 4 == 1:
        raise ConstantInapplicable(
            f"the initial bound needs a prime not 1 mod 4 in ({pair.p}, {pair.q}); "
            "supply an explicit C0 (--override-c0 on the command line)"
        )
    u_p, u_q = valuations(pair) if u is None else u
    C0 = initial_log_d_bound(pair, prec) if c0_override is None else c0_override
    state = reduce_fixpoint(pair, u_p, u_q, prec=prec, C0=C0)
    triples = enumerate_triples(pair, state.C1, prec)
    quads = extend_quadruples(pair, state.C, triples, prec)
    ranges = {
        "alpha12_max": exponent_limit(state.C1, pair.p, prec),
        "beta12_max": exponent_limit(state.C1, pair.q, prec),
        "alpha6_max": exponent_limit(state.C, pair.p, prec),
        "beta6_max": exponent_limit(state.C, pair.q, prec),
    }
    return SearchReport(
        pair=pair,
        u_p=u_p,
        u_q=u_q,
        bound_state=state,
        triples_count=len(triples),
        triples=triples if len(triples) <= MAX_RETAINED_TRIPLES else None,
        quadruples=quads,
        exponent_ranges=ranges,
        wall_time=time.perf_counter() - start,
    )
