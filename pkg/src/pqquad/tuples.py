"""S-Diophantine tuples: verification, structural checks and a brute-force oracle.

For a quadruple a < b < c < d the six S-units are indexed

    s1 = ab+1, s2 = ac+1, s3 = ad+1, s4 = bc+1, s5 = bd+1, s6 = cd+1

and the structural checks below are total functions on exponent data, so
they serve both as test oracles and as cheap rejection filters.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

from .ntcore import PrimePair, split_s_unit

__all__ = [
    "STuple",
    "ExponentMatrix",
    "TupleError",
    "VerificationFailure",
    "PRODUCT_INDEX",
    "verify_tuple",
    "check_nondivisibility",
    "check_min_coincide",
    "check_divisor_bounds",
    "check_mod4_pattern",
    "classify_table_case",
    "s_units_below",
    "brute_force_search",
]

# (i, j) entry positions of s1..s6
PRODUCT_INDEX = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


class TupleError(ValueError):
    pass


class VerificationFailure(Exception):
    """Raised when some a_i a_j + 1 is not an S-unit."""

    def __init__(self, i: int, j: int, value: int):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"a[{i}]*a[{j}] + 1 = {value} is not an S-unit")


@dataclass(frozen=True)
class ExponentMatrix:
    alphas: tuple[int, ...]
    betas: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.alphas) != 6 or len(self.betas) != 6:
            raise TupleError("an exponent matrix has six alphas and six betas")
        if min(self.alphas + self.betas) < 0:
            raise TupleError("exponents are nonnegative")

    def units(self, pair: PrimePair) -> tuple[int, ...]:
        return tuple(pair.p**a * pair.q**b for a, b in zip(self.alphas, self.betas))

    def check_order(self, pair: PrimePair) -> bool:
        """Orderings forced by a<b<c<d, plus the exclusions implied by non-divisibility."""
        s1, s2, s3, s4, s5, s6 = self.units(pair)
        if not (s1 < s2 < s3 < s5 < s6 and s2 < s4 < s5):
            return False
        al, be = self.alphas, self.betas
        for i, j in ((2, 4), (3, 5), (3, 6), (5, 6)):
            if al[i - 1] == al[j - 1] and be[i - 1] == be[j - 1]:
                return False
        return True


@dataclass(frozen=True)
class STuple:
    entries: tuple[int, ...]
    pair: PrimePair
    exponents: tuple[tuple[int, int], ...]  # (alpha, beta) per pair i<j, lexicographic

    @property
    def matrix(self) -> ExponentMatrix:
        if len(self.entries) != 4:
            raise TupleError("exponent matrices are defined for quadruples only")
        return ExponentMatrix(
            tuple(e[0] for e in self.exponents), tuple(e[1] for e in self.exponents)
        )

    def to_dict(self) -> dict:
        return {
            "entries": list(self.entries),
            "p": self.pair.p,
            "q": self.pair.q,
            "exponents": [list(e) for e in self.exponents],
        }


def verify_tuple(entries: Sequence[int], pair: PrimePair) -> STuple:
    """Certify that every pairwise product plus one is an S-unit.

    Raises VerificationFailure naming the first offending product.
    """
    entries = tuple(int(x) for x in entries)
    if not 2 <= len(entries) <= 4:
        raise TupleError("tuples have between 2 and 4 entries")
    if entries[0] < 1 or any(x >= y for x, y in zip(entries, entries[1:])):
        raise TupleError("entries must be distinct, positive and ascending")
    exps = []
    for i, j in combinations(range(len(entries)), 2):
        v = entries[i] * entries[j] + 1
        ab = split_s_unit(v, pair.p, pair.q)
        if ab is None:
            raise VerificationFailure(i, j, v)
        exps.append(ab)
    return STuple(entries, pair, tuple(exps))


def check_nondivisibility(triple) -> bool:
    """True iff (ac+1) does not divide (bc+1); accepts an STuple or raw (a, b, c)."""
    a, b, c = getattr(triple, "entries", triple)
    return (b * c + 1) % (a * c + 1) != 0


def _two_smallest_equal(values: Sequence[int]) -> bool:
    x = sorted(values)
    return x[0] == x[1]


_MIN_GROUPS = ((2, 3, 4, 5), (1, 2, 5, 6), (1, 3, 4, 6))


def check_min_coincide(matrix: ExponentMatrix) -> bool:
    """The two smallest exponents coincide in each of the three index groups (alphas and betas)."""
    for row in (matrix.alphas, matrix.betas):
        for group in _MIN_GROUPS:
            if not _two_smallest_equal([row[i - 1] for i in group]):
                return False
    return True


def _reduced_diff(x: int, y: int) -> int:
    return abs(x - y) // math.gcd(x, y)


def check_divisor_bounds(quadruple, units: Optional[Sequence[int]] = None) -> bool:
    """Divisibility and gcd-product constraints every quadruple satisfies.

    `quadruple` is an STuple, or raw entries together with explicit units
    s1..s6 (useful on unverified candidates and synthetic data).
    """
    if units is None:
        units = [x * y + 1 for x, y in combinations(quadruple.entries, 2)]
        quadruple = quadruple.entries
    a, b, c, d = quadruple
    s = (None,) + tuple(units)
    divs = (
        (a, (2, 1), (3, 1), (3, 2)),
        (b, (4, 1), (5, 1), (5, 4)),
        (c, (4, 2), (6, 2), (6, 4)),
        (d, (5, 3), (6, 3), (6, 5)),
    )
    for x, *idx in divs:
        g = 0
        for i, j in idx:
            g = math.gcd(g, _reduced_diff(s[i], s[j]))
        if g % x:
            return False
    for top, i, j in ((4, 2, 1), (5, 3, 1), (6, 3, 2), (6, 5, 4)):
        if math.gcd(s[top], s[i]) * math.gcd(s[top], s[j]) >= s[top]:
            return False
    return True


def _require_applicable(pair: PrimePair) -> int:
    if pair.p == 2:
        return 1
    if pair.p % 4 == 3:
        return 0
    raise ValueError(f"exponent patterns need p = 2 or p = 3 mod 4, got p={pair.p}")


def check_mod4_pattern(matrix: ExponentMatrix, pair: PrimePair) -> Optional[str]:
    """Which of a1=a6, a2=a5, a3=a4 pins to the forced value (0, or 1 when p = 2)."""
    v = _require_applicable(pair)
    word = "one" if v else "zero"
    al = matrix.alphas
    for i, j in ((1, 6), (2, 5), (3, 4)):
        if al[i - 1] == al[j - 1] == v:
            return f"{i}{j}-{word}"
    return None


def _chain(values: Sequence[int], ops: Sequence[str]) -> bool:
    # ops[k] relates values[k] and values[k+1]: '=', '<' or '<='
    for (x, y), op in zip(zip(values, values[1:]), ops):
        if op == "=" and x != y or op == "<" and not x < y or op == "<=" and not x <= y:
            return False
    return True


def _table_rows(al: Sequence[int], be: Sequence[int], v: int) -> dict[str, bool]:
    a1, a2, a3, a4, a5, a6 = al
    b1, b2, b3, b4, b5, b6 = be
    return {
        "I": _chain((v, a1, a6, a4, a5, a2, a3), ("=", "=", "<", "=", "<", "<"))
        and _chain((b1, b2, b3, b4, b5, b6), ("=", "=", "<", "<", "<")),
        "II": _chain((v, a1, a6, a2, a5), ("=", "=", "<", "="))
        and a5 < a3 and a5 < a4
        and _chain((b3, b4, b1, b2, b5, b6), ("=", "<", "=", "<", "<")),
        "III": _chain((v, a2, a5, a1, a3, a4, a6), ("=", "=", "<", "=", "<=", "<"))
        and _chain((b1, b6, b3, b4, b2, b5), ("=", "<", "=", "<", "<")),
        "IV": _chain((v, a3, a4, a1, a2, a5, a6), ("=", "=", "<", "=", "<", "<"))
        and _chain((b1, b6, b2, b5), ("=", "<", "="))
        and b5 < b3 and b5 < b4,
    }


def classify_table_case(matrix: ExponentMatrix, pair: PrimePair) -> Optional[str]:
    """Match the exponents against the four admissible patterns (I-IV)."""
    v = _require_applicable(pair)
    for case, ok in _table_rows(matrix.alphas, matrix.betas, v).items():
        if ok:
            return case
    return None


# -- brute force oracle ----------------------------------------------------

def s_units_below(limit: int, p: int, q: int) -> list[int]:
    """Sorted S-units u with 1 <= u <= limit."""
    out = []
    pa = 1
    while pa <= limit:
        u = pa
        while u <= limit:
            out.append(u)
            u *= q
        pa *= p
    return sorted(out)


def brute_force_search(pair: PrimePair, max_entry: int) -> tuple[list[tuple], list[tuple]]:
    """All triples and quadruples with entries <= max_entry, by direct enumeration.

    For each a, the admissible partners x > a are exactly (u - 1)/a for
    S-units u; the search grows tuples only through such partners.
    """
    if max_entry < 3:
        raise ValueError("max_entry must be at least 3")
    p, q = pair.p, pair.q
    units = s_units_below(max_entry * max_entry + 1, p, q)
    unit_set = set(units)

    def partners(a: int) -> list[int]:
        hi = bisect.bisect_right(units, a * max_entry + 1)
        out = []
        for u in units[:hi]:
            if (u - 1) % a == 0:
                x = (u - 1) // a
                if a < x <= max_entry:
                    out.append(x)
        return out

    triples: list[tuple] = []
    quads: list[tuple] = []
    for a in range(1, max_entry + 1):
        pa = partners(a)
        if len(pa) < 2:
            continue
        pa_set = set(pa)
        for b in pa:
            for c in partners(b):
                if c not in pa_set:
                    continue
                triples.append((a, b, c))
                for d in partners(c):
                    if d in pa_set and b * d + 1 in unit_set:
                        quads.append((a, b, c, d))
    return sorted(triples), sorted(quads)
