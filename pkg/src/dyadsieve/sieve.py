"""Dyadic exclusion sieve: covers, survivor evolution, witness extraction.

Grid model: level l splits [0,1] into 2^l closed cells.  At step n the
sieve removes every cell touching one of the closed intervals
[(a - r)/t_n, (a + r)/t_n] for integer a, where r is a rational
exclusion radius with r >= delta(n).  Boundary contact counts as
touching, so any point surviving step n satisfies ||t_n x|| > r
strictly.

Two modes:

  full  keeps the whole survivor set as a RunSet and certifies exact
        measures at every checkpoint (desk scale: level grows like
        log2 t_N);
  path  tracks one parent cell per checkpoint, sieving each block
        locally inside the parent and backtracking when a branch dies,
        which scales to levels of thousands of bits.
"""

from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from .enclosure import DEFAULT_PREC, Enclosure, decide, floor_log2
from .errors import (
    ConditionViolated,
    InternalBoundBreach,
    ParameterError,
    SearchExhausted,
)
from .runset import RunSet, runs_from_interval
from .schedule import CheckpointChain, ConditionReport, Schedule, build_chain, check_conditions
from .sequences import SequenceSpec, exact_term, term

# ---------------------------------------------------------------------------
# levels and covers


def level(t: Enclosure, delta: Fraction) -> int:
    """Grid exponent floor(log2(t / 2 delta)), conservative from below.

    Uses the lower end of t's enclosure so the resulting grid is never
    finer than the true value allows; for exact t this is exact.
    """
    delta = Fraction(delta)
    if not 0 < delta <= Fraction(1, 2):
        raise ParameterError("delta must lie in (0, 1/2]")
    if t.lo < 1:
        raise ParameterError("term enclosure must sit at or above 1")
    return floor_log2(t.lo / (2 * delta))


_RADIUS_BITS = 24


def _radius(schedule: Schedule, n: int, prec: int) -> Fraction:
    """Rational exclusion radius r_n >= delta(n) used for grid work.

    Rounded up to roughly 24 significant dyadic bits when the true
    upper end has an unwieldy denominator: the grid only needs SOME
    rational at or above delta(n), and small denominators keep the
    cover arithmetic in machine-sized integers.  Margins are always
    re-verified against the true delta enclosure elsewhere.
    """
    r = schedule.delta_at(n, prec).hi
    if r.denominator.bit_length() <= _RADIUS_BITS:
        return r
    shift = _RADIUS_BITS - 1 - floor_log2(r)
    if shift <= 0:
        return r
    num = -((-r.numerator << shift) // r.denominator)  # ceil(r * 2^shift)
    return min(Fraction(num, 1 << shift), Fraction(1, 2))


_NP_COVER_LIMIT = 1 << 62


def exclusion_cover(
    spec: SequenceSpec,
    n: int,
    radius: Fraction,
    lvl: int,
    window: Optional[Tuple[int, int]] = None,
    prec: int = DEFAULT_PREC,
) -> RunSet:
    """Level-lvl cells touching some [(a - r)/t_n, (a + r)/t_n] in [0,1].

    Endpoints are rounded outward to the grid, widened further by the
    term's enclosure slack when t_n is not exactly representable.  With
    window = (b_lo, b_hi) only cells inside that index range are
    produced (used by path mode; the window is in level-lvl indices).
    """
    radius = Fraction(radius)
    t = term(spec, n, prec)
    if lvl < level(t, radius):
        raise ParameterError(f"cover level {lvl} below minimum for step {n}")

    if window is None:
        a_lo, a_hi = 0, int(t.hi) + 1
    else:
        b_lo, b_hi = window
        # only a with E(n,a) meeting [b_lo, b_hi+1] * 2^-lvl can matter
        a_lo = max(0, int((Fraction(b_lo, 1 << lvl) * t.lo)) - 1)
        a_hi = min(int(t.hi) + 1, int((Fraction(b_hi + 1, 1 << lvl) * t.hi)) + 2)

    scale = 1 << lvl

    if t.is_exact:
        if window is None and (int(t.hi) + 2) * radius.denominator * t.lo.denominator * scale < _NP_COVER_LIMIT:
            runs = _bulk_cover_runs(t.lo, radius, lvl, a_lo, a_hi)
        else:
            runs = _int_cover_runs(t.lo, radius, lvl, a_lo, a_hi)
    else:
        runs = []
        inv_t = t.inv()
        for a in range(a_lo, a_hi + 1):
            e = (Enclosure.exact(a) + Enclosure(-radius, radius)) * inv_t
            r = runs_from_interval(e.lo, e.hi, lvl)
            if r is not None:
                runs.append(r)

    cover = RunSet.make(lvl, runs)
    if window is not None:
        cover = cover.intersect(RunSet.make(lvl, [window]))
    elif radius <= Fraction(1, 2):
        cap = 16 * radius if t.lo >= 2 else 24 * radius
        if cover.measure() > cap:
            raise InternalBoundBreach(
                f"cover measure {cover.measure()} above {cap} at step {n}"
            )
    return cover


def _int_cover_runs(t: Fraction, radius: Fraction, lvl: int, a_lo: int, a_hi: int):
    """Touch-cover cell ranges by incremental big-integer arithmetic.

    Same quantities as _bulk_cover_runs without the int64 magnitude
    ceiling; the per-a endpoint numerators advance by a fixed step.
    """
    p, q = t.numerator, t.denominator
    rn, rd = radius.numerator, radius.denominator
    scale = 1 << lvl
    step = rd * q * scale
    den = rd * p
    lo_num = (a_lo * rd - rn) * q * scale
    hi_num = (a_lo * rd + rn) * q * scale
    top = scale - 1
    runs: List[Tuple[int, int]] = []
    for _ in range(a_lo, a_hi + 1):
        b0 = -((den - lo_num) // den)  # ceil(lo * 2^l - 1)
        b1 = hi_num // den
        if b0 < 0:
            b0 = 0
        if b1 > top:
            b1 = top
        if b0 <= b1:
            if runs and b0 <= runs[-1][1] + 1:
                if b1 > runs[-1][1]:
                    runs[-1] = (runs[-1][0], b1)
            else:
                runs.append((b0, b1))
        lo_num += step
        hi_num += step
    return runs


def _bulk_cover_runs(t: Fraction, radius: Fraction, lvl: int, a_lo: int, a_hi: int):
    """Vectorized cover cell ranges for exact rational t, int64-safe."""
    p, q = t.numerator, t.denominator
    rn, rd = radius.numerator, radius.denominator
    scale = 1 << lvl
    a = np.arange(a_lo, a_hi + 1, dtype=np.int64)
    # E(a) = [(a*rd - rn) q / (rd p), (a*rd + rn) q / (rd p)]
    lo_num = (a * rd - rn) * q * scale
    hi_num = (a * rd + rn) * q * scale
    den = rd * p
    # leftmost touched cell: ceil(lo * 2^l - 1); rightmost: floor(hi * 2^l)
    b_min = -((den - lo_num) // den)
    b_max = hi_num // den
    # clamp one-sided so intervals outside [0,1] drop out instead of
    # snapping onto the boundary cells
    np.clip(b_min, 0, None, out=b_min)
    np.clip(b_max, None, scale - 1, out=b_max)
    keep = b_min <= b_max
    b_min, b_max = b_min[keep], b_max[keep]
    if b_min.size == 0:
        return []
    # merge touching/overlapping consecutive ranges (endpoints are monotone)
    breaks = np.flatnonzero(b_min[1:] > b_max[:-1] + 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [b_min.size - 1]))
    return [(int(b_min[s]), int(b_max[e])) for s, e in zip(starts, ends)]


# ---------------------------------------------------------------------------
# full-set mode


@dataclass
class CheckpointRecord:
    index: int
    level: int
    count: int
    measure: Fraction
    lower_bound: Fraction
    term_low: Fraction
    radius: Fraction

    def to_json(self):
        return {
            "n": self.index,
            "level": self.level,
            "count": str(self.count),
            "measure": str(self.measure),
            "lower_bound": str(self.lower_bound),
            "term_low": str(self.term_low),
            "radius": str(self.radius),
        }


@dataclass
class StepRatio:
    index: int
    ratio: Fraction
    cap: Fraction

    def to_json(self):
        return {"n": self.index, "ratio": str(self.ratio), "cap": str(self.cap)}


@dataclass
class SieveTrace:
    chain: CheckpointChain
    eta: Fraction
    checkpoints: List[CheckpointRecord] = field(default_factory=list)
    step_ratios: List[StepRatio] = field(default_factory=list)
    final_measure: Fraction = Fraction(0)
    final_bound: Fraction = Fraction(0)
    schedule_desc: Dict[str, str] = field(default_factory=dict)

    def to_json(self):
        return {
            "chain": list(self.chain.nodes),
            "eta": str(self.eta),
            "checkpoints": [c.to_json() for c in self.checkpoints],
            "step_ratios": [s.to_json() for s in self.step_ratios],
            "final_measure": str(self.final_measure),
            "final_bound": str(self.final_bound),
            "schedule": self.schedule_desc,
        }


def run_sieve_full(
    spec: SequenceSpec,
    schedule: Schedule,
    chain: Optional[CheckpointChain] = None,
    N: Optional[int] = None,
    prec: int = DEFAULT_PREC,
    report: Optional[ConditionReport] = None,
) -> SieveTrace:
    """Evolve the whole survivor set up to the chain top, exactly.

    Requires the admissibility conditions to pass (a report may be
    supplied to skip re-checking).  Along the way asserts the internal
    bounds the conditions guarantee: single-step overlap ratio at most
    4 r_n against the survivor set frozen at n - h(n), block decay at
    most (4/eta) times the block's radius sum, and checkpoint measures
    at least eta^(k+1).  A breach raises InternalBoundBreach.
    """
    if chain is None:
        if N is None:
            raise ParameterError("need N or an explicit chain")
        chain = build_chain(schedule, N)
    N = chain.top
    if report is None:
        report = check_conditions(spec, schedule, chain=chain, mode="chain", prec=prec)
    if not report.all_pass:
        name = report.first_failure()
        v = report.verdicts[name]
        raise ConditionViolated(
            f"schedule fails {name} at n={v.first_index}: {v.lhs} vs {v.rhs}",
            report=report,
        )

    eta = schedule.eta
    radii = {n: _radius(schedule, n, prec) for n in range(1, N + 1)}
    levels: Dict[int, int] = {}
    last_l = 0
    for n in range(1, N + 1):
        l = level(term(spec, n, prec), radii[n])
        if l < last_l:
            raise InternalBoundBreach(f"level decreased at step {n}")
        levels[n] = l
        last_l = l

    hs = {n: schedule.h(n) for n in range(1, N + 1)}
    pending: Dict[int, int] = {}
    for n in range(1, N + 1):
        if n > hs[n]:
            pending[n - hs[n]] = pending.get(n - hs[n], 0) + 1

    trace = SieveTrace(chain=chain, eta=eta, schedule_desc=schedule.describe())
    snapshots: Dict[int, RunSet] = {}
    checkpoints = set(chain.nodes)
    block_of = {}
    for k, (a, b) in enumerate(zip(chain.nodes, chain.nodes[1:])):
        for v in range(a + 1, b + 1):
            block_of[v] = k

    survivors = RunSet.full(levels[1])
    block_start_measure = Fraction(1)
    block_radius_sum = Fraction(0)
    k_at = {n: i for i, n in enumerate(chain.nodes)}

    for n in range(1, N + 1):
        survivors = survivors.refine(levels[n])
        cover = exclusion_cover(spec, n, radii[n], levels[n], prec=prec)

        if n > hs[n] and (n - hs[n]) in snapshots:
            frozen = snapshots[n - hs[n]]
            fm = frozen.measure()
            if fm > 0:
                overlap = frozen.refine(levels[n]).intersect(cover).measure()
                ratio = overlap / fm
                cap = 4 * radii[n]
                trace.step_ratios.append(StepRatio(n, ratio, cap))
                if ratio > cap:
                    raise InternalBoundBreach(
                        f"step {n}: overlap ratio {ratio} above {cap}"
                    )

        survivors = survivors.subtract(cover)

        if n in pending:
            snapshots[n] = survivors
        if n > hs[n]:
            m = n - hs[n]
            pending[m] -= 1
            if pending[m] == 0:
                snapshots.pop(m, None)
                del pending[m]

        if n in block_of and n not in checkpoints:
            block_radius_sum += radii[n]

        if n in checkpoints:
            k = k_at[n]
            mu = survivors.measure()
            bound = eta ** (k + 1)
            trace.checkpoints.append(
                CheckpointRecord(
                    index=n,
                    level=levels[n],
                    count=survivors.count,
                    measure=mu,
                    lower_bound=bound,
                    term_low=term(spec, n, prec).lo,
                    radius=radii[n],
                )
            )
            if mu < bound:
                raise InternalBoundBreach(
                    f"checkpoint {n}: measure {mu} below eta^{k + 1} = {bound}"
                )
            if k >= 1 and block_start_measure > 0:
                decay_cap = 1 - Fraction(4, 1) / eta * block_radius_sum
                if mu / block_start_measure < decay_cap:
                    raise InternalBoundBreach(
                        f"block into {n}: ratio {mu / block_start_measure} "
                        f"below {decay_cap}"
                    )
            block_start_measure = mu
            block_radius_sum = Fraction(0)

    trace.final_measure = trace.checkpoints[-1].measure
    trace.final_bound = eta ** (chain.depth + 1)
    return trace


# ---------------------------------------------------------------------------
# margins


def _dist_to_nearest_int(x: Enclosure) -> Enclosure:
    """Enclosure of the distance from x to the nearest integer."""
    k0 = x.lo.numerator // x.lo.denominator
    k1 = x.hi.numerator // x.hi.denominator + 1
    if k1 - k0 > 3:
        return Enclosure(Fraction(0), Fraction(1, 2))
    half = Fraction(1, 2)
    lo = half
    hi = half
    for k in range(k0, k1 + 1):
        d = x - Fraction(k)
        if d.contains(Fraction(0)):
            d_lo = Fraction(0)
        else:
            d_lo = min(abs(d.lo), abs(d.hi))
        d_hi = max(abs(d.lo), abs(d.hi))
        lo = min(lo, d_lo)
        hi = min(hi, d_hi)
    return Enclosure(lo, min(hi, half))


def exact_norm_distance(t: Fraction, alpha: Fraction) -> Fraction:
    """||t * alpha||: distance from t*alpha to the nearest integer."""
    x = t * alpha
    f = x - (x.numerator // x.denominator)
    return min(f, 1 - f)


@dataclass
class MarginRecord:
    index: int
    margin_low: Fraction
    radius: Fraction

    def to_json(self):
        return {
            "n": self.index,
            "margin_low": str(self.margin_low),
            "radius": str(self.radius),
        }


@dataclass
class MarginReport:
    passed: bool
    checked: int
    min_margin: Fraction
    min_index: int
    first_failure: Optional[int] = None
    records: Optional[List[MarginRecord]] = None

    def to_json(self):
        out = {
            "passed": self.passed,
            "checked": self.checked,
            "min_margin": str(self.min_margin),
            "min_index": self.min_index,
        }
        if self.first_failure is not None:
            out["first_failure"] = self.first_failure
        if self.records is not None:
            out["margins"] = [r.to_json() for r in self.records]
        return out


def verify_certificate(
    spec: SequenceSpec,
    alpha: Fraction,
    delta: Callable[..., Enclosure],
    N: int,
    prec: int = DEFAULT_PREC,
    collect: bool = False,
) -> MarginReport:
    """Independent margin check: ||t_n alpha|| > delta(n) for n <= N.

    Margins are exact when t_n is exactly representable, otherwise a
    certified enclosure; each comparison escalates precision until it
    resolves.  Reports the smallest margin and the first failure.
    """
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ParameterError("alpha must lie in [0, 1]")
    min_margin = Fraction(1, 2)
    min_index = 0
    first_failure = None
    records: List[MarginRecord] = [] if collect else None
    passed = True
    for n in range(1, N + 1):
        d = delta(n, prec)
        if spec.is_exact:
            m_lo = exact_norm_distance(exact_term(spec, n), alpha)

            def pred(p: int) -> Optional[bool]:
                return Enclosure.exact(m_lo).gt(delta(n, p))

            ok = decide(pred, start=prec, what=f"margin at n={n}")
        else:
            # resolve the margin and the comparison at the same precision
            # so the recorded lower bound is the one that settled it
            resolved: List[Enclosure] = []

            def pred(p: int) -> Optional[bool]:
                e = _dist_to_nearest_int(term(spec, n, p) * alpha)
                resolved.append(e)
                return e.gt(delta(n, p))

            ok = decide(pred, start=prec, what=f"margin at n={n}")
            m_lo = resolved[-1].lo
        if records is not None:
            records.append(MarginRecord(n, m_lo, d.hi))
        if m_lo < min_margin or min_index == 0:
            min_margin, min_index = m_lo, n
        if not ok:
            passed = False
            if first_failure is None:
                first_failure = n
    return MarginReport(
        passed=passed,
        checked=N,
        min_margin=min_margin,
        min_index=min_index,
        first_failure=first_failure,
        records=records,
    )


# ---------------------------------------------------------------------------
# path mode: witness extraction


@dataclass
class Certificate:
    alpha_num: int
    alpha_bits: int
    N: int
    parents: Tuple[Tuple[int, int, int], ...]  # (checkpoint, level, cell)
    stage_counts: Tuple[int, ...]  # candidate cells seen at each checkpoint
    margins: List[MarginRecord]
    schedule_desc: Dict[str, str]
    pick_policy: str

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.alpha_num, 1 << self.alpha_bits)

    def binary(self) -> str:
        return format(self.alpha_num, f"0{self.alpha_bits}b")

    def to_json(self):
        return {
            "alpha": f"{self.alpha_num}/2^{self.alpha_bits}",
            "alpha_fraction": str(self.alpha),
            "binary": "0." + self.binary(),
            "N": self.N,
            "parents": [
                {"n": n, "level": l, "cell": str(b)} for n, l, b in self.parents
            ],
            "stage_counts": list(self.stage_counts),
            "margins": [m.to_json() for m in self.margins],
            "schedule": self.schedule_desc,
            "pick_policy": self.pick_policy,
        }


def _candidate_order(runset: RunSet, policy, rng: Optional[random.Random]) -> Iterator[int]:
    """Cell indices of a RunSet in pick order, generated lazily."""
    count = runset.count
    if count == 0:
        return
    if policy == "leftmost":
        yield from runset.cells()
        return
    prefix = [0]
    for a, b in runset.runs:
        prefix.append(prefix[-1] + (b - a + 1))

    def cell(i: int) -> int:
        j = bisect.bisect_right(prefix, i) - 1
        return runset.runs[j][0] + (i - prefix[j])

    if policy == "middle":
        mid = (count - 1) // 2
        yield cell(mid)
        for d in range(1, count):
            if mid - d >= 0:
                yield cell(mid - d)
            if mid + d < count:
                yield cell(mid + d)
    else:  # seeded random start, cyclic scan
        start = rng.randrange(count)
        for i in range(count):
            yield cell((start + i) % count)


def _parse_policy(pick_policy: str):
    if pick_policy in ("leftmost", "middle"):
        return pick_policy, None
    if pick_policy.startswith("random:"):
        return "random", random.Random(int(pick_policy.split(":", 1)[1]))
    raise ParameterError(
        f"pick_policy must be 'leftmost', 'middle' or 'random:<seed>', got {pick_policy!r}"
    )


def extract_witness(
    spec: SequenceSpec,
    schedule: Schedule,
    chain: Optional[CheckpointChain] = None,
    N: Optional[int] = None,
    pick_policy: str = "leftmost",
    prec: int = DEFAULT_PREC,
    require_conditions: bool = True,
    report: Optional[ConditionReport] = None,
) -> Certificate:
    """Path-mode search for a point x with ||t_n x|| > delta(n), n <= N.

    Descends one exclusion step at a time: the chosen cell at step v is
    refined to the next step's grid, the cover there is built only over
    that cell's span, and a surviving child is picked.  Dead branches
    backtrack to the previous step's next candidate.  Work per step is
    proportional to the local cover, never to t_n, so deep instances
    stay cheap.  The returned point is the midpoint of the final
    surviving cell, and every margin is re-verified independently
    before return.
    """
    policy, rng = _parse_policy(pick_policy)
    if chain is None:
        if N is None:
            raise ParameterError("need N or an explicit chain")
        chain = build_chain(schedule, N)
    N = chain.top
    if require_conditions:
        if report is None:
            report = check_conditions(spec, schedule, chain=chain, mode="chain", prec=prec)
        if not report.all_pass:
            name = report.first_failure()
            v = report.verdicts[name]
            raise ConditionViolated(
                f"schedule fails {name} at n={v.first_index}: {v.lhs} vs {v.rhs}",
                report=report,
            )

    radii = {n: _radius(schedule, n, prec) for n in range(1, N + 1)}
    levels: Dict[int, int] = {}
    last_l = 0
    for n in range(1, N + 1):
        l = level(term(spec, n, prec), radii[n])
        levels[n] = max(l, last_l)
        last_l = levels[n]

    nodes = chain.nodes

    first = RunSet.full(levels[1])
    first = first.subtract(
        exclusion_cover(
            spec, 1, radii[1], levels[1], window=(0, (1 << levels[1]) - 1), prec=prec
        )
    )

    # stack[v-1]: candidate iterator for step v; chosen[v-1]: its pick
    stack: List[Iterator[int]] = [_candidate_order(first, policy, rng)]
    counts: List[int] = [first.count]
    chosen: List[int] = [-1]

    while stack:
        v = len(stack)
        try:
            cell = next(stack[-1])
        except StopIteration:
            stack.pop()
            counts.pop()
            chosen.pop()
            continue
        chosen[-1] = cell
        if v == N:
            break
        nxt = RunSet.make(levels[v], [(cell, cell)]).refine(levels[v + 1])
        window = (nxt.runs[0][0], nxt.runs[-1][1])
        cover = exclusion_cover(
            spec, v + 1, radii[v + 1], levels[v + 1], window=window, prec=prec
        )
        nxt = nxt.subtract(cover)
        if nxt.is_empty:
            continue
        stack.append(_candidate_order(nxt, policy, rng))
        counts.append(nxt.count)
        chosen.append(-1)
    else:
        raise SearchExhausted(
            f"no surviving cell up to n={N}; every branch of the search died"
        )

    parents = [(nk, levels[nk], chosen[nk - 1]) for nk in nodes]
    stage_counts = [counts[nk - 1] for nk in nodes]
    final_level = levels[N]
    final_cell = chosen[N - 1]
    bits = final_level + 1
    alpha_num = 2 * final_cell + 1
    alpha = Fraction(alpha_num, 1 << bits)

    margins = verify_certificate(
        spec, alpha, schedule.delta, N, prec=prec, collect=True
    )
    if not margins.passed:
        raise InternalBoundBreach(
            f"extracted point fails margin re-check at n={margins.first_failure}"
        )

    return Certificate(
        alpha_num=alpha_num,
        alpha_bits=bits,
        N=N,
        parents=tuple(parents),
        stage_counts=tuple(stage_counts),
        margins=margins.records or [],
        schedule_desc=schedule.describe(),
        pick_policy=pick_policy,
    )
