"""Exact sets of dyadic grid cells, stored as sorted maximal runs.

A RunSet at level l represents a finite union of closed cells
[b/2^l, (b+1)/2^l] with 0 <= b < 2^l, as a sorted list of disjoint,
non-adjacent inclusive index runs (start, end).  Cell indices are plain
Python integers, so levels far beyond machine words are fine.  Measure
is exact: count * 2^-l as a Fraction.

Refinement, subtraction and intersection are linear sweeps over runs.
When every index fits comfortably in int64 the sweeps are delegated to
a vectorized numpy backend; the pure-Python backend is the reference
implementation and the two are cross-checked in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, List, Tuple

import numpy as np

from .errors import ParameterError

Run = Tuple[int, int]

# stay safely below 2^63-1 including the +1 sentinel on run ends
_NP_LIMIT = 1 << 62


def _normalize(runs: Iterable[Run]) -> List[Run]:
    runs = sorted((int(a), int(b)) for a, b in runs)
    out: List[Run] = []
    for a, b in runs:
        if b < a:
            raise ParameterError(f"inverted run ({a}, {b})")
        if out and a <= out[-1][1] + 1:
            if b > out[-1][1]:
                out[-1] = (out[-1][0], b)
        else:
            out.append((a, b))
    return out


@dataclass(frozen=True)
class RunSet:
    """Sorted maximal runs of cell indices at one dyadic level."""

    level: int
    runs: Tuple[Run, ...]
    _count: int = field(default=-1, repr=False, compare=False)

    def __post_init__(self):
        if self.level < 0:
            raise ParameterError("negative dyadic level")
        if self._count < 0:
            object.__setattr__(
                self, "_count", sum(b - a + 1 for a, b in self.runs)
            )

    # -- constructors --------------------------------------------------

    @staticmethod
    def make(level: int, runs: Iterable[Run]) -> "RunSet":
        norm = _normalize(runs)
        if norm:
            hi = 1 << level
            if norm[0][0] < 0 or norm[-1][1] >= hi:
                raise ParameterError("run indices outside [0, 2^level)")
        return RunSet(level, tuple(norm))

    @staticmethod
    def full(level: int) -> "RunSet":
        return RunSet(level, ((0, (1 << level) - 1),))

    @staticmethod
    def empty(level: int) -> "RunSet":
        return RunSet(level, ())

    # -- queries --------------------------------------------------------

    @property
    def count(self) -> int:
        return self._count

    @property
    def is_empty(self) -> bool:
        return not self.runs

    def measure(self) -> Fraction:
        return Fraction(self._count, 1 << self.level)

    def cells(self) -> Iterator[int]:
        for a, b in self.runs:
            yield from range(a, b + 1)

    def cell_at(self, index: int) -> int:
        """The index-th smallest cell (0-based), without materializing."""
        if not 0 <= index < self._count:
            raise ParameterError("cell index out of range")
        for a, b in self.runs:
            n = b - a + 1
            if index < n:
                return a + index
            index -= n
        raise AssertionError("unreachable")

    def span_of_cell(self, b: int) -> Tuple[Fraction, Fraction]:
        w = Fraction(1, 1 << self.level)
        return b * w, (b + 1) * w

    # -- algebra ---------------------------------------------------------

    def refine(self, new_level: int) -> "RunSet":
        """Re-express at a finer level; the underlying point set is unchanged."""
        if new_level < self.level:
            raise ParameterError("refine cannot coarsen")
        d = new_level - self.level
        if d == 0:
            return self
        runs = tuple((a << d, ((b + 1) << d) - 1) for a, b in self.runs)
        return RunSet(new_level, runs, self._count << d)

    def _use_numpy(self, other: "RunSet") -> bool:
        top = 1 << self.level
        return top < _NP_LIMIT

    def subtract(self, other: "RunSet") -> "RunSet":
        """Cells of self not in other (levels must match)."""
        if other.level != self.level:
            raise ParameterError("level mismatch in subtract")
        if not self.runs or not other.runs:
            return self
        if self._use_numpy(other):
            runs, count = _np_combine(self.runs, other.runs, keep=1)
        else:
            runs, count = _py_subtract(self.runs, other.runs)
        return RunSet(self.level, runs, count)

    def intersect(self, other: "RunSet") -> "RunSet":
        if other.level != self.level:
            raise ParameterError("level mismatch in intersect")
        if not self.runs or not other.runs:
            return RunSet.empty(self.level)
        if self._use_numpy(other):
            runs, count = _np_combine(self.runs, other.runs, keep=2)
        else:
            runs, count = _py_intersect(self.runs, other.runs)
        return RunSet(self.level, runs, count)

    def union(self, other: "RunSet") -> "RunSet":
        if other.level != self.level:
            raise ParameterError("level mismatch in union")
        return RunSet.make(self.level, list(self.runs) + list(other.runs))


# -- pure-Python sweeps (reference implementation) ----------------------


def _py_subtract(a_runs, b_runs):
    out = []
    count = 0
    j = 0
    nb = len(b_runs)
    for a, b in a_runs:
        cur = a
        while j < nb and b_runs[j][1] < cur:
            j += 1
        k = j
        while k < nb and b_runs[k][0] <= b:
            c, d = b_runs[k]
            if c > cur:
                out.append((cur, c - 1))
                count += c - cur
            cur = max(cur, d + 1)
            if cur > b:
                break
            k += 1
        if cur <= b:
            out.append((cur, b))
            count += b - cur + 1
    return tuple(out), count


def _py_intersect(a_runs, b_runs):
    out = []
    count = 0
    i = j = 0
    na, nb = len(a_runs), len(b_runs)
    while i < na and j < nb:
        a, b = a_runs[i]
        c, d = b_runs[j]
        lo = a if a > c else c
        hi = b if b < d else d
        if lo <= hi:
            out.append((lo, hi))
            count += hi - lo + 1
        if b < d:
            i += 1
        else:
            j += 1
    return tuple(out), count


# -- numpy event-sweep backend ------------------------------------------


def _np_combine(a_runs, b_runs, keep: int):
    """Event sweep over run boundaries.

    keep=2 emits regions covered by both lists (intersection); keep=1
    emits regions covered by the first list only (subtraction).  Both
    inputs are sorted disjoint runs, so coverage depths are in {0,1,2}.
    """
    a = np.asarray(a_runs, dtype=np.int64)
    b = np.asarray(b_runs, dtype=np.int64)
    # weight +1 inside the first list; +2 inside the second
    pos = np.concatenate((a[:, 0], a[:, 1] + 1, b[:, 0], b[:, 1] + 1))
    wt = np.concatenate(
        (
            np.ones(len(a), dtype=np.int64),
            -np.ones(len(a), dtype=np.int64),
            np.full(len(b), 2, dtype=np.int64),
            np.full(len(b), -2, dtype=np.int64),
        )
    )
    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    wt = wt[order]
    depth = np.cumsum(wt)
    # segment between pos[i] and pos[i+1] carries depth[i]
    if keep == 2:
        mask = depth[:-1] == 3
    else:
        mask = depth[:-1] == 1
    if not mask.any():
        return (), 0
    starts = pos[:-1][mask]
    ends = pos[1:][mask] - 1
    good = ends >= starts
    starts = starts[good]
    ends = ends[good]
    if len(starts) == 0:
        return (), 0
    # merge adjacent pieces produced by coincident boundaries
    gap = starts[1:] > ends[:-1] + 1
    first = np.concatenate(([True], gap))
    last = np.concatenate((gap, [True]))
    s = starts[first]
    e = ends[last]
    count = int(np.sum(e - s + 1))
    return tuple(zip(s.tolist(), e.tolist())), count


def runs_from_interval(lo: Fraction, hi: Fraction, level: int) -> Run | None:
    """Indices of all level-`level` cells meeting the closed interval
    [lo, hi], clamped to [0,1].  A cell counts as soon as it touches
    the interval, endpoint coincidences included, so the resulting
    cover errs toward exclusion.
    """
    scale = 1 << level
    lo_num, lo_den = lo.numerator, lo.denominator
    hi_num, hi_den = hi.numerator, hi.denominator
    # smallest b with (b+1)/2^l >= lo  <=>  b >= lo*2^l - 1
    b_min = -((lo_den - lo_num * scale) // lo_den)
    # largest b with b/2^l <= hi
    b_max = (hi_num * scale) // hi_den
    if b_min < 0:
        b_min = 0
    top = scale - 1
    if b_max > top:
        b_max = top
    if b_min > b_max:
        return None
    return (b_min, b_max)
