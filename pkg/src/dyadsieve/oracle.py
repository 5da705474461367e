"""Brute-force ground truth for desk-size instances.

Enumerates every exclusion interval [(a - delta(n))/t_n,
(a + delta(n))/t_n] for n <= N explicitly and subtracts it from [0,1]
with exact rational arithmetic, yielding the set of points that clear
every threshold.  The sieve's survivor sets must always be contained
in this union; the oracle is deliberately restricted to exactly
representable sequences so its output is beyond doubt.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Callable, List, Optional, Tuple

import numpy as np

from .enclosure import Enclosure
from .errors import BudgetExceeded, ParameterError
from .runset import RunSet
from .sequences import SequenceSpec, exact_term

_BUDGET = 20_000_000
_NP_LIMIT = 1 << 62


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted, disjoint, positive-length closed intervals in [0,1]."""

    intervals: Tuple[Tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        prev = None
        for lo, hi in self.intervals:
            if lo >= hi:
                raise ParameterError("intervals must have positive length")
            if prev is not None and lo < prev:
                raise ParameterError("intervals must be sorted and disjoint")
            prev = hi

    @property
    def measure(self) -> Fraction:
        return sum((hi - lo for lo, hi in self.intervals), Fraction(0))

    def covers(self, lo: Fraction, hi: Fraction) -> bool:
        """True when [lo, hi] sits inside a single member interval."""
        i = bisect.bisect_right(self.intervals, lo, key=lambda iv: iv[0]) - 1
        if i < 0:
            return False
        a, b = self.intervals[i]
        return a <= lo and hi <= b

    def to_json(self):
        return {
            "measure": str(self.measure),
            "intervals": [[str(lo), str(hi)] for lo, hi in self.intervals],
        }


def _delta_value(delta: Callable, n: int) -> Fraction:
    """Exact rational radius from a delta function, rejecting slack."""
    v = delta(n)
    if isinstance(v, Enclosure):
        if not v.is_exact:
            raise ParameterError(
                f"oracle needs exact delta values, got an enclosure of width "
                f"{v.width} at n={n}"
            )
        v = v.lo
    v = Fraction(v)
    if v <= 0:
        raise ParameterError(f"delta({n}) = {v} must be positive")
    return v


def exact_bad_set(spec: SequenceSpec, delta: Callable, N: int) -> IntervalUnion:
    """{x in [0,1] : ||t_n x|| > delta(n) for every n <= N}, exactly.

    delta is called as delta(n) and must yield exact positive
    rationals.  All endpoints are put over one common denominator so
    the subtraction sweep is pure integer work.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    if not spec.is_exact:
        raise ParameterError("oracle accepts exactly representable sequences only")

    terms = [exact_term(spec, n) for n in range(1, N + 1)]
    deltas = [_delta_value(delta, n) for n in range(1, N + 1)]

    budget = sum(int(t) + 2 for t in terms)
    if budget > _BUDGET:
        raise BudgetExceeded(
            f"instance needs ~{budget} exclusion intervals, budget is {_BUDGET}"
        )

    D = 1
    for t, d in zip(terms, deltas):
        D = lcm(D, d.denominator * t.numerator)

    los: List[int] = []
    his: List[int] = []
    for t, d in zip(terms, deltas):
        p, q = t.numerator, t.denominator
        c, dd = d.numerator, d.denominator
        s = D // (dd * p)
        a_max = int(t + d)
        width = c * q * s
        if D < _NP_LIMIT and (a_max * dd + c) * q * s < _NP_LIMIT:
            a = np.arange(0, a_max + 1, dtype=np.int64)
            centers = a * (dd * q * s)
            lo = centers - width
            hi = centers + width
            np.clip(lo, 0, D, out=lo)
            np.clip(hi, 0, D, out=hi)
            los.extend(int(x) for x in lo)
            his.extend(int(x) for x in hi)
        else:
            step = dd * q * s
            for a in range(a_max + 1):
                center = a * step
                los.append(max(0, center - width))
                his.append(min(D, center + width))

    pairs = sorted(zip(los, his))
    bad: List[Tuple[Fraction, Fraction]] = []
    cursor = 0
    for lo, hi in pairs:
        if lo > cursor:
            bad.append((Fraction(cursor, D), Fraction(lo, D)))
            cursor = hi
        elif hi > cursor:
            cursor = hi
    if cursor < D:
        bad.append((Fraction(cursor, D), Fraction(1)))
    return IntervalUnion(tuple(bad))


@dataclass
class OracleComparison:
    contained: bool
    exact_measure: Fraction
    sieve_measure: Fraction
    slack: Fraction
    violation: Optional[dict] = None

    def to_json(self):
        out = {
            "contained": self.contained,
            "exact_measure": str(self.exact_measure),
            "sieve_measure": str(self.sieve_measure),
            "slack": str(self.slack),
        }
        if self.violation is not None:
            out["violation"] = {
                k: (str(v) if v is not None else None)
                for k, v in self.violation.items()
            }
        return out


def _first_uncovered_cell(
    exact: IntervalUnion, run: Tuple[int, int], lvl: int
) -> int:
    scale = 1 << lvl
    for b in range(run[0], run[1] + 1):
        if not exact.covers(Fraction(b, scale), Fraction(b + 1, scale)):
            return b
    return run[0]


def _offending_exclusion(
    x: Fraction, spec: SequenceSpec, delta: Callable, N: int
) -> Tuple[Optional[int], Optional[int]]:
    """Find (n, a) whose exclusion interval contains the point x."""
    for n in range(1, N + 1):
        t = exact_term(spec, n)
        d = _delta_value(delta, n)
        a = int(x * t + Fraction(1, 2))
        if abs(x - Fraction(a) / t) * t <= d:
            return n, a
    return None, None


def compare_with_sieve(
    exact: IntervalUnion,
    survivors: RunSet,
    spec: Optional[SequenceSpec] = None,
    delta: Optional[Callable] = None,
    N: Optional[int] = None,
) -> OracleComparison:
    """Check every survivor cell lies inside the exact bad set.

    On failure reports the first violating cell; when the instance
    (spec, delta, N) is supplied, also names an exclusion (n, a) that
    the cell meets.
    """
    scale = 1 << survivors.level
    for run in survivors.runs:
        lo = Fraction(run[0], scale)
        hi = Fraction(run[1] + 1, scale)
        if not exact.covers(lo, hi):
            b = _first_uncovered_cell(exact, run, survivors.level)
            mid = Fraction(2 * b + 1, 2 * scale)
            n, a = (None, None)
            if spec is not None and delta is not None and N is not None:
                n, a = _offending_exclusion(mid, spec, delta, N)
            return OracleComparison(
                contained=False,
                exact_measure=exact.measure,
                sieve_measure=survivors.measure(),
                slack=exact.measure - survivors.measure(),
                violation={
                    "cell": b,
                    "level": survivors.level,
                    "n": n,
                    "a": a,
                },
            )
    em = exact.measure
    sm = survivors.measure()
    return OracleComparison(
        contained=True, exact_measure=em, sieve_measure=sm, slack=em - sm
    )
