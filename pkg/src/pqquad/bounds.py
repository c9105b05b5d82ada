"""Upper bounds for log d and their continued-fraction reduction.

All quantities that feed the nonexistence verdict are computed in interval
arithmetic; upper bounds take the upper endpoint and the gap delta takes the
lower endpoint, so every reported number errs on the safe side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
from mpmath import iv

from .ntcore import PrimePair, convergents_of_log_ratio, iv_precision, log_interval

__all__ = [
    "LOG_D_CONSTANT",
    "EXPONENT_CONSTANT",
    "DEFAULT_PRECISION",
    "MAX_ITERATIONS",
    "BoundState",
    "BoundStep",
    "ReductionError",
    "initial_log_d_bound",
    "laurent_lower_bound",
    "solve_square_log",
    "find_delta",
    "reduce_once",
    "reduce_fixpoint",
]

EXPONENT_CONSTANT = 52038
LOG_D_CONSTANT = 2 * EXPONENT_CONSTANT  # log d < log(p^A q^B) < 104076 log p log q
DEFAULT_PRECISION = 128
MAX_ITERATIONS = 64
IMPROVEMENT_THRESHOLD = 0.1


class ReductionError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundStep:
    iteration: int
    C: float
    C1: float
    delta: float


@dataclass
class BoundState:
    C0: mpmath.mpf
    C: mpmath.mpf
    C1: mpmath.mpf
    delta: mpmath.mpf
    iterations: int
    trace: list[BoundStep] = field(default_factory=list)


def _ivlogs(pair: PrimePair, prec: int):
    lp = log_interval(pair.p, prec).as_interval()
    lq = log_interval(pair.q, prec).as_interval()
    return lp, lq


def _upper(x) -> mpmath.mpf:
    return mpmath.mp.make_mpf(x._mpi_[1])


def _lower(x) -> mpmath.mpf:
    return mpmath.mp.make_mpf(x._mpi_[0])


def initial_log_d_bound(pair: PrimePair, prec: int = DEFAULT_PRECISION) -> mpmath.mpf:
    """C0 = 104076 log p log q, rounded up."""
    with iv_precision(prec):
        lp, lq = _ivlogs(pair, prec)
        return _upper(LOG_D_CONSTANT * lp * lq)


def laurent_lower_bound(log_a1: float, log_a2: float, b1: int, b2: int, D: int = 1) -> float:
    """Exponent of Laurent's lower bound for |b2 log g2 - b1 log g1| (two logarithms, m = 12)."""
    if min(log_a1, log_a2) <= 0 or min(b1, b2) <= 0 or D <= 0:
        raise ValueError("all inputs must be positive")
    if min(log_a1, log_a2) < 1 / D:
        raise ValueError("log a_i must be at least 1/D")
    b_prime = b1 / (D * log_a2) + b2 / (D * log_a1)
    log_b = max(math.log(b_prime) + 0.38, 12 / D, 1.0)
    return -23.4 * D**4 * log_b**2 * log_a1 * log_a2


def solve_square_log(K: float, rel_tol: float = 1e-9) -> float:
    """Largest root of x = K (log x)^2; beyond it x > K (log x)^2 holds."""
    if not K > math.e:
        raise ValueError("K must exceed e")
    f = lambda x: x - K * math.log(x) ** 2
    # x / log(x)^2 is increasing beyond e^2, so the largest root lies above it
    lo = math.e**2
    hi = 2 * lo
    while f(hi) <= 0:
        hi *= 2
        if hi > 1e300:
            raise ValueError(f"no root bracket found for K={K}")
    if f(lo) >= 0:
        raise ValueError(f"no root bracket found for K={K}")
    while hi - lo > rel_tol * lo:
        mid = (lo + hi) / 2
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def find_delta(
    pair: PrimePair, C, u_p: int = 1, u_q: int = 1, prec: int = DEFAULT_PRECISION
) -> mpmath.mpf:
    """Certified lower bound for |P log p - Q log q| over convergents in the box.

    The box is Q < 2C/log q and P < 2C/log p, enlarged to the next integer so
    rounding can only add convergents. An empty box returns +inf.
    u_p and u_q do not enter the gap; they are accepted for call symmetry
    with reduce_once.
    """
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    with iv_precision(prec):
        lp, lq = _ivlogs(pair, prec)
        C = iv.mpf(C)
        Q_max = int(mpmath.floor(_upper(2 * C / lq))) + 1
        P_max = int(mpmath.floor(_upper(2 * C / lp))) + 1
        convs = convergents_of_log_ratio(pair, Q_max, P_max, prec=prec)
        if not convs:
            return mpmath.inf
        delta = min(_lower(abs(c.P * lp - c.Q * lq)) for c in convs)
    if not delta > 0:
        # precision too low to separate the gap from zero
        return find_delta(pair, C, u_p, u_q, prec=2 * prec)
    return delta


def reduce_once(pair: PrimePair, C, u_p: int, u_q: int, prec: int = DEFAULT_PRECISION):
    """One application of the continued-fraction reduction; returns (C_new, C1, delta).

    C1 is never reported below log p (see the comment in the body).
    """
    delta = find_delta(pair, C, u_p, u_q, prec=prec)
    with iv_precision(prec):
        lp, lq = _ivlogs(pair, prec)
        C_iv = iv.mpf(C)
        branch = iv.log(8 * C_iv / (lp * lq))
        if delta != mpmath.inf:
            gap_branch = iv.log(2 / iv.mpf(delta))
            C1 = max(_upper(branch), _upper(gap_branch))
        else:
            C1 = _upper(branch)
        # ab + 1 is an S-unit above 1, hence at least p, and log(ab + 1) < C1.
        # A C1 below log p therefore rules out every triple; raising it to
        # log p keeps the bound valid (C_new increases with C1) and stops the
        # log term below from driving C_new negative.
        C1 = max(C1, _upper(lp))
        C1_iv = iv.mpf(C1)
        C_new = 2 * C1_iv + u_q * lq + u_p * lp + iv.log(2 * C1_iv**2 / (lp * lq))
        return _upper(C_new), C1, delta


def reduce_fixpoint(
    pair: PrimePair, u_p: int, u_q: int, prec: int = DEFAULT_PRECISION, C0=None
) -> BoundState:
    """Iterate reduce_once from C0 until the bound improves by less than 0.1.

    The returned C is the smaller of the last input and last output bound;
    both bound log d.
    """
    C_init = initial_log_d_bound(pair, prec) if C0 is None else mpmath.mpf(C0)
    current = C_init
    trace: list[BoundStep] = []
    for it in range(1, MAX_ITERATIONS + 1):
        C_new, C1, delta = reduce_once(pair, current, u_p, u_q, prec=prec)
        trace.append(BoundStep(it, float(C_new), float(C1), float(delta)))
        if C_new < current - IMPROVEMENT_THRESHOLD:
            current = C_new
            continue
        return BoundState(
            C0=C_init,
            C=min(current, C_new),
            C1=C1,
            delta=delta,
            iterations=it,
            trace=trace,
        )
    raise ReductionError(f"no fixpoint after {MAX_ITERATIONS} iterations for {pair}")
