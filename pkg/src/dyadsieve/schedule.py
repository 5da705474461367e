"""Exclusion schedules and their certified admissibility conditions.

A Schedule bundles a lag function h (how far back the sieve may look),
an exclusion-radius function delta, and a retention parameter eta in
(0,1).  A schedule is admissible for a sequence when three families of
inequalities hold; all are decided conservatively:

  growth_lag    the lagged growth ratio t_n / t_{n-h(n)} reaches
                1/delta(n-h(n)) whenever n > h(n)
  block_sum     delta sums over a lag window stay below (1-eta)*eta/4
  initial_sum   head sums stay below (1-eta)/16
  shape         delta is positive, at most 1/2 and non-increasing;
                h(n) >= 1; n - h(n) is non-decreasing where n > h(n)

Chain mode checks these along the checkpoint chain obtained by
iterating n -> n - h(n) down from N; universal mode checks every index
up to N (a superset of the chain constraints).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

from .enclosure import (
    DEFAULT_PREC,
    Enclosure,
    decide,
    floor_enclosure,
    format_decimal,
    log_enclosure,
    pow_enclosure,
    resolve_int,
)
from .errors import ConditionViolated, ParameterError, PrecisionError
from .sequences import SequenceSpec, term

# ---------------------------------------------------------------------------
# delta functions


class ConstantDelta:
    def __init__(self, value):
        self.value = Fraction(value)
        if not 0 < self.value <= Fraction(1, 2):
            raise ParameterError("constant delta must lie in (0, 1/2]")

    def __call__(self, n: int, prec: int = DEFAULT_PREC) -> Enclosure:
        return Enclosure.exact(self.value)

    def describe(self) -> Dict[str, str]:
        return {"shape": "constant", "value": str(self.value)}


_SHAPE_CACHE: Dict[Tuple[str, int], List[Enclosure]] = {}


def _shape_value(shape: str, n: int, prec: int) -> Enclosure:
    """Kappa-free factor g(n) of a shaped delta, cached per precision."""
    cache = _SHAPE_CACHE.setdefault((shape, prec), [])
    while len(cache) < n:
        m = len(cache) + 1
        if shape == "sqrt-log":
            # round to dyadic endpoints so downstream sums stay cheap
            g = (
                pow_enclosure(Fraction(m + 1), Fraction(1, 2), prec)
                * log_enclosure(Fraction(m + 2), prec)
            ).inv().round_out(prec)
        elif shape == "one":
            g = Enclosure.exact(1)
        else:
            raise ParameterError(f"unknown delta shape {shape!r}")
        cache.append(g)
    return cache[n - 1]


class ShapedDelta:
    """delta(n) = kappa * g(n) for a named non-increasing shape g."""

    SHAPES = ("sqrt-log", "one")

    def __init__(self, kappa, shape: str = "sqrt-log"):
        self.kappa = Fraction(kappa)
        if self.kappa <= 0:
            raise ParameterError("kappa must be positive")
        if shape not in self.SHAPES:
            raise ParameterError(f"unknown delta shape {shape!r}")
        self.shape = shape

    def __call__(self, n: int, prec: int = DEFAULT_PREC) -> Enclosure:
        return _shape_value(self.shape, n, prec) * self.kappa

    def describe(self) -> Dict[str, str]:
        return {"shape": self.shape, "kappa": str(self.kappa)}


class PowerLogDelta:
    """delta(n) = (1-beta)(1-eta)eta / (2^5 c1 (n+c2)^beta log(n+c2)).

    The radius shape paired with LogLagH below; together they form the
    stock schedule for sequences with ratio gains gamma/n^beta.
    """

    def __init__(self, beta, eta, c1: int, c2: int):
        self.beta = Fraction(beta)
        self.eta = Fraction(eta)
        self.c1 = int(c1)
        self.c2 = int(c2)
        if not 0 <= self.beta < 1:
            raise ParameterError("beta must lie in [0, 1)")
        if not 0 < self.eta < 1:
            raise ParameterError("eta must lie in (0, 1)")
        if self.c1 < 1 or self.c2 < 1:
            raise ParameterError("c1, c2 must be positive integers")
        self._top = (1 - self.beta) * (1 - self.eta) * self.eta / 32 / self.c1
        self._memo: Dict[Tuple[int, int], Enclosure] = {}

    def __call__(self, n: int, prec: int = DEFAULT_PREC) -> Enclosure:
        key = (n, prec)
        out = self._memo.get(key)
        if out is None:
            den = log_enclosure(Fraction(n + self.c2), prec)
            if self.beta:
                den = den * pow_enclosure(Fraction(n + self.c2), self.beta, prec)
            out = (den.inv() * self._top).round_out(prec)
            self._memo[key] = out
        return out

    def describe(self) -> Dict[str, str]:
        return {
            "shape": "power-log",
            "beta": str(self.beta),
            "eta": str(self.eta),
            "c1": str(self.c1),
            "c2": str(self.c2),
        }


# ---------------------------------------------------------------------------
# lag functions


class ConstantH:
    def __init__(self, value: int):
        self.value = int(value)
        if self.value < 1:
            raise ParameterError("h must be >= 1")

    def __call__(self, n: int) -> int:
        return self.value

    def describe(self) -> Dict[str, str]:
        return {"kind": "constant", "value": str(self.value)}


class LogLagH:
    """h(n) = max(1, floor(c1 * n^beta * log(n + c2)))."""

    def __init__(self, beta, c1: int, c2: int):
        self.beta = Fraction(beta)
        self.c1 = int(c1)
        self.c2 = int(c2)
        if not 0 <= self.beta < 1:
            raise ParameterError("beta must lie in [0, 1)")
        self._cache: Dict[int, int] = {}

    def __call__(self, n: int) -> int:
        if n in self._cache:
            return self._cache[n]

        def at(prec: int) -> Optional[int]:
            v = log_enclosure(Fraction(n + self.c2), prec) * self.c1
            if self.beta:
                v = v * pow_enclosure(Fraction(n), self.beta, prec)
            return floor_enclosure(v)

        out = max(1, resolve_int(at, what=f"lag floor at n={n}"))
        self._cache[n] = out
        return out

    def describe(self) -> Dict[str, str]:
        return {
            "kind": "power-log",
            "beta": str(self.beta),
            "c1": str(self.c1),
            "c2": str(self.c2),
        }


class LaggedGrowthH:
    """Smallest lag consistent with the growth requirement, per index.

    h(n) is the least h with h >= required_lag(n - h), found by a
    fixed-point iteration, then capped at h(n-1) + 1 so that n - h(n)
    never decreases.  Indices where no h < n works are assigned
    h(n) = n (the head region, where only the head-sum condition
    applies).  required_lag(m) is the smallest k with
    t_{m+k} / t_m >= 1/delta(m), decided conservatively.
    """

    def __init__(self, spec: SequenceSpec, delta, prec: int = DEFAULT_PREC):
        self.spec = spec
        self.delta = delta
        self.prec = prec
        self._h: List[int] = []
        self._lag: Dict[int, int] = {}

    def _required_lag(self, m: int) -> Optional[int]:
        """Smallest k with t_{m+k} delta(m) >= t_m, None when no index
        of a finite explicit list reaches the ratio."""
        if m in self._lag:
            return self._lag[m]

        def ge(k: int) -> bool:
            def pred(p: int) -> Optional[bool]:
                num = term(self.spec, m + k, p)
                den = term(self.spec, m, p)
                return (num * self.delta(m, p)).ge(den)

            return decide(pred, start=self.prec, what=f"lag ratio at m={m}")

        top = len(self.spec.terms) - m if self.spec.kind == "explicit" else None
        lo, hi = 0, 1  # lo always fails (or is 0), hi passes once found
        while True:
            if top is not None and hi >= top:
                if not ge(top):
                    self._lag[m] = None
                    return None
                hi = top
                break
            if ge(hi):
                break
            lo = hi
            hi *= 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ge(mid):
                hi = mid
            else:
                lo = mid
        self._lag[m] = hi
        return hi

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ParameterError("n must be >= 1")
        while len(self._h) < n:
            self._h.append(self._compute(len(self._h) + 1))
        return self._h[n - 1]

    def _compute(self, n: int) -> int:
        h = 1
        while True:
            m = n - h
            if m <= 0:
                h = n
                break
            r = self._required_lag(m)
            if r is None:
                h += 1
                continue
            if h >= r:
                break
            h = r
        if n >= 2:
            # the previous index's lag target still satisfies its own
            # growth requirement, so this cap never undercuts it
            h = min(h, self._h[n - 2] + 1)
        return h

    def head_reaches(self, N: int) -> bool:
        """True when every index up to N sits in the head region."""
        return all(self(n) >= n for n in range(1, N + 1))

    def describe(self) -> Dict[str, str]:
        return {"kind": "lagged-growth", "prec": str(self.prec)}


# ---------------------------------------------------------------------------
# schedule, chain, condition report


@dataclass
class Schedule:
    h: Callable[[int], int]
    delta: Callable[..., Enclosure]
    eta: Fraction
    name: str = "custom"

    def __post_init__(self):
        self.eta = Fraction(self.eta)
        if not 0 < self.eta < 1:
            raise ParameterError("eta must lie in (0, 1)")

    def delta_at(self, n: int, prec: int = DEFAULT_PREC) -> Enclosure:
        return self.delta(n, prec)

    def describe(self) -> Dict[str, str]:
        out = {"name": self.name, "eta": str(self.eta)}
        for key, val in getattr(self.h, "describe", dict)().items():
            out[f"h.{key}"] = val
        for key, val in getattr(self.delta, "describe", dict)().items():
            out[f"delta.{key}"] = val
        return out


@dataclass(frozen=True)
class CheckpointChain:
    """Indices n_0 < n_1 < ... < n_K with n_k = n_{k+1} - h(n_{k+1})."""

    nodes: Tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.nodes) - 1

    @property
    def top(self) -> int:
        return self.nodes[-1]

    @property
    def bottom(self) -> int:
        return self.nodes[0]


def build_chain(schedule: Schedule, N: int) -> CheckpointChain:
    """Iterate n -> n - h(n) down from N until the head region."""
    if N < 1:
        raise ParameterError("N must be >= 1")
    nodes = [N]
    n = N
    while True:
        hv = schedule.h(n)
        if not isinstance(hv, int) or hv < 1:
            raise ParameterError(f"h({n}) = {hv!r} is not a positive integer")
        nxt = n - hv
        if nxt <= 0:
            break
        nodes.append(nxt)
        n = nxt
    nodes.reverse()
    return CheckpointChain(tuple(nodes))


def _fmt(x) -> str:
    """Render a quantity for a verdict: exact p/q while printable,
    20 significant decimals once the integers get unwieldy."""
    if isinstance(x, Enclosure):
        if x.is_exact:
            return _fmt(x.lo)
        return f"[{_fmt(x.lo)}, {_fmt(x.hi)}]"
    x = Fraction(x)
    if x.numerator.bit_length() < 128 and x.denominator.bit_length() < 128:
        return str(x)
    return format_decimal(x, 20)


@dataclass
class Verdict:
    status: str = "pass"  # pass | fail | undecidable
    first_index: Optional[int] = None
    lhs: str = ""
    rhs: str = ""
    note: str = ""

    def to_json(self):
        out = {"status": self.status}
        if self.first_index is not None:
            out["first_index"] = self.first_index
        if self.lhs:
            out["lhs"] = self.lhs
        if self.rhs:
            out["rhs"] = self.rhs
        if self.note:
            out["note"] = self.note
        return out


CHECK_NAMES = ("shape", "growth_lag", "block_sum", "initial_sum")


@dataclass
class ConditionReport:
    mode: str
    N: int
    chain: Optional[CheckpointChain]
    verdicts: Dict[str, Verdict] = field(default_factory=dict)

    @property
    def all_pass(self) -> bool:
        return all(v.status == "pass" for v in self.verdicts.values())

    def first_failure(self) -> Optional[str]:
        for name in CHECK_NAMES:
            v = self.verdicts.get(name)
            if v is not None and v.status != "pass":
                return name
        return None

    def to_json(self):
        return {
            "mode": self.mode,
            "N": self.N,
            "chain": list(self.chain.nodes) if self.chain else None,
            "all_pass": self.all_pass,
            "verdicts": {k: v.to_json() for k, v in self.verdicts.items()},
        }


# ---------------------------------------------------------------------------
# the checker


class _PrefixSums:
    """Enclosure prefix sums of delta, recomputed on precision escalation."""

    def __init__(self, schedule: Schedule):
        self.schedule = schedule
        self._sums: Dict[int, List[Enclosure]] = {}

    def window(self, a: int, b: int, prec: int) -> Enclosure:
        """Sum of delta(v) for a <= v <= b (empty windows are zero)."""
        if b < a:
            return Enclosure.exact(0)
        sums = self._sums.setdefault(prec, [Enclosure.exact(0)])
        while len(sums) <= b:
            v = len(sums)
            # outward rounding keeps partial-sum denominators dyadic
            sums.append((sums[-1] + self.schedule.delta_at(v, prec)).round_out(prec))
        lo = sums[b].lo - sums[a - 1].hi
        hi = sums[b].hi - sums[a - 1].lo
        return Enclosure(min(lo, hi), max(lo, hi))


def _sum_verdict(
    prefix: _PrefixSums,
    windows: List[Tuple[int, int, int]],
    bound: Fraction,
    prec: int,
) -> Verdict:
    """Check sum(delta over window) <= bound for each (index, a, b)."""
    for idx, a, b in windows:
        def pred(p: int) -> Optional[bool]:
            return prefix.window(a, b, p).le(bound)

        try:
            ok = decide(pred, start=prec, what=f"delta window sum at n={idx}")
        except PrecisionError:
            s = prefix.window(a, b, prec)
            return Verdict("undecidable", idx, _fmt(s), _fmt(bound))
        if not ok:
            s = prefix.window(a, b, prec)
            return Verdict("fail", idx, _fmt(max(s.lo, Fraction(0))), _fmt(bound))
    return Verdict("pass")


def check_conditions(
    spec: SequenceSpec,
    schedule: Schedule,
    N: Optional[int] = None,
    chain: Optional[CheckpointChain] = None,
    mode: str = "chain",
    prec: int = DEFAULT_PREC,
) -> ConditionReport:
    """Certified admissibility check of a schedule for a sequence.

    Chain mode constrains only the checkpoint chain below N; universal
    mode constrains every index up to N.  Verdicts are conservative:
    pass and fail are certified, undecidable means the precision
    ceiling was reached with the comparison still open.
    """
    if mode not in ("chain", "universal"):
        raise ParameterError("mode must be 'chain' or 'universal'")
    if chain is None:
        if N is None:
            raise ParameterError("need N or an explicit chain")
        chain = build_chain(schedule, N)
    if N is None:
        N = chain.top
    eta = schedule.eta
    report = ConditionReport(mode=mode, N=N, chain=chain)
    prefix = _PrefixSums(schedule)

    hs = {n: schedule.h(n) for n in range(1, N + 1)}

    report.verdicts["shape"] = _shape_verdict(schedule, hs, N, prec)

    block_bound = (1 - eta) * eta / 4
    head_bound = (1 - eta) / 16

    if mode == "chain":
        growth_nodes = [(n, n - hs[n]) for n in chain.nodes[1:]]
        block_windows = [
            (b, a + 1, b - 1) for a, b in zip(chain.nodes, chain.nodes[1:])
        ]
        head_windows = [(chain.bottom, 1, chain.bottom)]
    else:
        growth_nodes = [(n, n - hs[n]) for n in range(1, N + 1) if n > hs[n]]
        block_windows = [(n, n - hs[n] + 1, n - 1) for n in range(1, N + 1) if n > hs[n]]
        head_windows = [(n, 1, n) for n in range(1, N + 1) if n <= hs[n]]

    report.verdicts["growth_lag"] = _growth_verdict(
        spec, schedule, growth_nodes, prec
    )
    report.verdicts["block_sum"] = _sum_verdict(prefix, block_windows, block_bound, prec)
    report.verdicts["initial_sum"] = _sum_verdict(prefix, head_windows, head_bound, prec)
    return report


def _shape_verdict(schedule: Schedule, hs: Dict[int, int], N: int, prec: int) -> Verdict:
    for n in range(1, N + 1):
        if not isinstance(hs[n], int) or hs[n] < 1:
            return Verdict("fail", n, str(hs[n]), ">= 1", note="h out of domain")
    half = Fraction(1, 2)
    for n in range(1, N + 1):
        d = schedule.delta_at(n, prec)
        if d.lo <= 0:
            return Verdict("fail", n, str(d.lo), "> 0", note="delta not positive")
        def small(p: int) -> Optional[bool]:
            return schedule.delta_at(n, p).le(half)

        try:
            if not decide(small, start=prec, what=f"delta domain at n={n}"):
                return Verdict("fail", n, _fmt(d.lo), "1/2", note="delta above 1/2")
        except PrecisionError:
            return Verdict("undecidable", n, _fmt(d), "1/2")
    for n in range(1, N):
        def noninc(p: int) -> Optional[bool]:
            return schedule.delta_at(n, p).ge(schedule.delta_at(n + 1, p))

        try:
            if not decide(noninc, start=prec, what=f"delta monotone at n={n}"):
                return Verdict(
                    "fail",
                    n + 1,
                    _fmt(schedule.delta_at(n + 1, prec)),
                    _fmt(schedule.delta_at(n, prec)),
                    note="delta increased",
                )
        except PrecisionError:
            return Verdict("undecidable", n + 1, note="delta monotonicity open")
    lagged = [(n, n - hs[n]) for n in range(1, N + 1) if n > hs[n]]
    for (n1, m1), (n2, m2) in zip(lagged, lagged[1:]):
        if m2 < m1:
            return Verdict(
                "fail",
                n2,
                f"n-h(n) = {m2}",
                f">= {m1}",
                note="lagged index decreased",
            )
    return Verdict("pass")


def _growth_verdict(spec, schedule, nodes, prec) -> Verdict:
    for n, m in nodes:
        if m < 1:
            return Verdict("fail", n, f"n-h(n) = {m}", ">= 1", note="lag reaches past start")

        def pred(p: int) -> Optional[bool]:
            # t_n * delta(m) >= t_m  <=>  t_n / t_m >= 1/delta(m)
            return (term(spec, n, p) * schedule.delta_at(m, p)).ge(term(spec, m, p))

        try:
            ok = decide(pred, start=prec, what=f"lagged growth at n={n}")
        except PrecisionError:
            return Verdict("undecidable", n)
        if not ok:
            tm = term(spec, m, prec)
            tn = term(spec, n, prec)
            d = schedule.delta_at(m, prec)
            return Verdict(
                "fail",
                n,
                f"t_{n}/t_{m} >= {_fmt((tn / tm).lo)}",
                f"needs 1/delta({m}) = {_fmt(d.inv().hi)}",
            )
    return Verdict("pass")


# ---------------------------------------------------------------------------
# presets


def preset_constant(delta_value, h_value: int, eta) -> Schedule:
    return Schedule(
        h=ConstantH(h_value),
        delta=ConstantDelta(delta_value),
        eta=Fraction(eta),
        name="constant",
    )


_C1_CAP = 1 << 12
_C2_CAP = 1 << 16


def preset_power_log(
    spec: SequenceSpec,
    gamma,
    beta,
    eta,
    n_probe: int = 200,
    prec: int = DEFAULT_PREC,
) -> Tuple[Schedule, ConditionReport]:
    """Stock schedule for ratio-gain sequences, constants by doubling search.

    Requires the sequence to be certified in the sublacunary class with
    the given (gamma, beta) on [1, n_probe].  Scans c1 then c2 over
    powers of two and returns the first schedule whose universal check
    passes up to n_probe.
    """
    from .sequences import SublacunaryClass, verify_growth_class

    beta = Fraction(beta)
    eta = Fraction(eta)
    if not 0 <= beta < 1:
        raise ParameterError("beta must lie in [0, 1)")
    growth = verify_growth_class(spec, SublacunaryClass(Fraction(gamma), beta), 1, n_probe, prec)
    if not growth.passed:
        raise ParameterError(
            f"sequence not certified sublacunary(gamma={gamma}, beta={beta}): "
            f"first violation at n={growth.first_violation}"
        )
    c1 = 1
    while c1 <= _C1_CAP:
        c2 = 1
        while c2 <= _C2_CAP:
            sched = Schedule(
                h=LogLagH(beta, c1, c2),
                delta=PowerLogDelta(beta, eta, c1, c2),
                eta=eta,
                name="power-log",
            )
            try:
                rep = check_conditions(spec, sched, N=n_probe, mode="universal", prec=prec)
            except PrecisionError:
                rep = None
            if rep is not None and rep.all_pass:
                return sched, rep
            c2 *= 2
        c1 *= 2
    raise ParameterError(
        f"no (c1, c2) up to ({_C1_CAP}, {_C2_CAP}) passes the probe horizon {n_probe}"
    )


@dataclass
class TuneReport:
    kappa: Fraction
    exponent: int
    attempts: List[Tuple[int, str]]
    report: ConditionReport

    def to_json(self):
        return {
            "kappa": str(self.kappa),
            "exponent": self.exponent,
            "attempts": [{"exponent": m, "binding": b} for m, b in self.attempts],
            "report": self.report.to_json(),
        }


def autotune_kappa(
    spec: SequenceSpec,
    eta,
    N: int,
    shape: str = "sqrt-log",
    m_max: int = 64,
    prec: int = DEFAULT_PREC,
) -> Tuple[Schedule, TuneReport]:
    """Largest kappa = 2^-m whose shaped schedule passes up to N.

    For each candidate kappa the lag function is rebuilt minimally from
    the growth requirement and the universal check is run.  Candidates
    whose head region swallows the whole range are rejected: they admit
    no non-trivial checkpoint chain, which means the growth requirement
    could not be met by any lag below n.
    """
    eta = Fraction(eta)
    attempts: List[Tuple[int, str]] = []
    for m in range(1, m_max + 1):
        kappa = Fraction(1, 1 << m)
        delta = ShapedDelta(kappa, shape)
        h = LaggedGrowthH(spec, delta, prec)
        sched = Schedule(h=h, delta=delta, eta=eta, name="shaped-kappa")
        if h.head_reaches(N):
            attempts.append((m, "growth_lag"))
            continue
        try:
            rep = check_conditions(spec, sched, N=N, mode="universal", prec=prec)
        except PrecisionError:
            attempts.append((m, "undecidable"))
            continue
        if rep.all_pass:
            return sched, TuneReport(kappa, m, attempts, rep)
        attempts.append((m, rep.first_failure() or "unknown"))
    binding = attempts[-1][1] if attempts else "growth_lag"
    names = ", ".join(sorted(set(b for _, b in attempts)))
    raise ConditionViolated(
        f"no kappa = 2^-m with m <= {m_max} passes up to N={N}; "
        f"binding condition(s): {names or binding}"
    )
