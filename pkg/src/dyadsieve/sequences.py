"""Strictly increasing term sequences and certified growth queries.

Four generator kinds are supported:

  geometric     t_n = t1 * q^(n-1), exact rationals
  smooth        naturals whose prime factors all lie in a fixed set,
                in increasing order, starting at 1
  explicit      a finite user-supplied list of exact rationals
  subexponential  t_n = gamma1 * exp(n^beta), enclosure-valued
  sublacunary   t_1 = 1, t_{n+1} = t_n * (1 + gamma/n^beta), enclosure-valued
                (exact when beta = 0)

Exact kinds return zero-width enclosures; inexact kinds return two-sided
enclosures with relative width at most 2^-prec.  All growth queries are
decided conservatively through the enclosure comparison machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .enclosure import (
    DEFAULT_PREC,
    MAX_PREC,
    Enclosure,
    decide,
    exp_enclosure,
    log_enclosure,
    pow_enclosure,
)
from .errors import ParameterError, PrecisionError

# ---------------------------------------------------------------------------
# sequence specifications


@dataclass(frozen=True)
class SequenceSpec:
    """Description of a strictly increasing sequence with t_1 >= 1."""

    kind: str
    t1: Fraction = Fraction(1)
    q: Fraction = Fraction(2)
    primes: Tuple[int, ...] = (2, 3)
    terms: Tuple[Fraction, ...] = ()
    gamma: Fraction = Fraction(1)
    gamma2: Fraction = Fraction(1)
    beta: Fraction = Fraction(1, 2)

    def __post_init__(self):
        if self.kind == "geometric":
            if self.t1 < 1:
                raise ParameterError("geometric needs t1 >= 1")
            if self.q <= 1:
                raise ParameterError("geometric needs ratio q > 1")
        elif self.kind == "smooth":
            ps = tuple(sorted(set(int(p) for p in self.primes)))
            if not ps or any(p < 2 for p in ps):
                raise ParameterError("smooth needs primes >= 2")
            object.__setattr__(self, "primes", ps)
        elif self.kind == "explicit":
            ts = tuple(Fraction(t) for t in self.terms)
            if not ts:
                raise ParameterError("explicit needs at least one term")
            if ts[0] < 1:
                raise ParameterError("explicit needs t_1 >= 1")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ParameterError("explicit terms must be strictly increasing")
            object.__setattr__(self, "terms", ts)
        elif self.kind == "subexponential":
            if self.gamma <= 0 or self.gamma2 < self.gamma:
                raise ParameterError("subexponential needs 0 < gamma1 <= gamma2")
            if not 0 < self.beta < 1:
                raise ParameterError("subexponential needs beta in (0,1)")
        elif self.kind == "sublacunary":
            if self.gamma <= 0:
                raise ParameterError("sublacunary needs gamma > 0")
            if not 0 <= self.beta < 1:
                raise ParameterError("sublacunary needs beta in [0,1)")
        else:
            raise ParameterError(f"unknown sequence kind {self.kind!r}")

    @property
    def is_exact(self) -> bool:
        if self.kind in ("geometric", "smooth", "explicit"):
            return True
        # beta = 0 makes the recurrence rational
        return self.kind == "sublacunary" and self.beta == 0

    def describe(self) -> Dict[str, str]:
        out = {"kind": self.kind}
        if self.kind == "geometric":
            out.update(t1=str(self.t1), q=str(self.q))
        elif self.kind == "smooth":
            out["primes"] = ",".join(map(str, self.primes))
        elif self.kind == "explicit":
            out["terms"] = ",".join(map(str, self.terms))
        elif self.kind == "subexponential":
            out.update(gamma1=str(self.gamma), gamma2=str(self.gamma2), beta=str(self.beta))
        else:
            out.update(gamma=str(self.gamma), beta=str(self.beta))
        return out


def geometric(t1, q) -> SequenceSpec:
    return SequenceSpec(kind="geometric", t1=Fraction(t1), q=Fraction(q))


def smooth(primes: Sequence[int] = (2, 3)) -> SequenceSpec:
    return SequenceSpec(kind="smooth", primes=tuple(primes))


def explicit(terms: Sequence) -> SequenceSpec:
    return SequenceSpec(kind="explicit", terms=tuple(Fraction(t) for t in terms))


def subexponential(gamma1, gamma2, beta) -> SequenceSpec:
    return SequenceSpec(
        kind="subexponential",
        gamma=Fraction(gamma1),
        gamma2=Fraction(gamma2),
        beta=Fraction(beta),
    )


def sublacunary(gamma, beta) -> SequenceSpec:
    return SequenceSpec(kind="sublacunary", gamma=Fraction(gamma), beta=Fraction(beta))


# ---------------------------------------------------------------------------
# smooth-number streaming merge


def smooth_terms(
    primes: Sequence[int] = (2, 3),
    count: Optional[int] = None,
    bound: Optional[int] = None,
) -> List[int]:
    """Increasing list of naturals with all prime factors in `primes`.

    Exactly one of count/bound selects the stopping rule.  Memory is
    proportional to the output: one cursor per prime walks the output
    list and the next term is the smallest candidate product.
    """
    if (count is None) == (bound is None):
        raise ParameterError("pass exactly one of count, bound")
    ps = sorted(set(int(p) for p in primes))
    if not ps or any(p < 2 for p in ps):
        raise ParameterError("primes must be >= 2")
    if count is not None and count < 1:
        raise ParameterError("count must be >= 1")
    if bound is not None and bound < 1:
        return []
    out = [1]
    cursors = [0] * len(ps)
    cand = [p for p in ps]
    while True:
        if count is not None and len(out) >= count:
            return out
        nxt = min(cand)
        if bound is not None and nxt > bound:
            return out
        out.append(nxt)
        for i, p in enumerate(ps):
            if cand[i] == nxt:
                cursors[i] += 1
                cand[i] = p * out[cursors[i]]
    # not reached


# ---------------------------------------------------------------------------
# term evaluation with caching

_exact_cache: Dict[SequenceSpec, List[Fraction]] = {}
_smooth_cache: Dict[Tuple[int, ...], List[int]] = {}
_encl_cache: Dict[Tuple[SequenceSpec, int], List[Enclosure]] = {}


def _smooth_list(primes: Tuple[int, ...], upto: int) -> List[int]:
    cache = _smooth_cache.setdefault(primes, [1])
    if len(cache) >= upto:
        return cache
    # regrow from scratch; generation is cheap and stateless cursors are
    # simpler than persisting them
    cache[:] = smooth_terms(primes, count=max(upto, 2 * len(cache)))
    return cache


def exact_term(spec: SequenceSpec, n: int) -> Fraction:
    """t_n as an exact rational; only valid for exact kinds."""
    if n < 1:
        raise ParameterError("term index must be >= 1")
    if spec.kind == "smooth":
        return Fraction(_smooth_list(spec.primes, n)[n - 1])
    if spec.kind == "explicit":
        if n > len(spec.terms):
            raise ParameterError(
                f"explicit sequence has {len(spec.terms)} terms, index {n} requested"
            )
        return spec.terms[n - 1]
    if spec.kind == "geometric":
        cache = _exact_cache.setdefault(spec, [spec.t1])
        while len(cache) < n:
            cache.append(cache[-1] * spec.q)
        return cache[n - 1]
    if spec.kind == "sublacunary" and spec.beta == 0:
        cache = _exact_cache.setdefault(spec, [Fraction(1)])
        r = 1 + spec.gamma
        while len(cache) < n:
            cache.append(cache[-1] * r)
        return cache[n - 1]
    raise ParameterError(f"{spec.kind} terms are not exact rationals")


def term(spec: SequenceSpec, n: int, prec: int = DEFAULT_PREC) -> Enclosure:
    """Certified enclosure of t_n, relative width <= 2^-prec.

    Exact kinds return zero-width enclosures regardless of prec.
    """
    if n < 1:
        raise ParameterError("term index must be >= 1")
    if spec.is_exact:
        return Enclosure.exact(exact_term(spec, n))
    target = Fraction(1, 1 << prec)
    work = prec + 32
    while True:
        e = _inexact_term(spec, n, work)
        if e.rel_width() <= target:
            return e
        if work >= MAX_PREC + prec:
            raise PrecisionError(
                f"term enclosure for n={n} would not tighten below 2^-{prec}"
            )
        work *= 2


def _inexact_term(spec: SequenceSpec, n: int, work: int) -> Enclosure:
    key = (spec, work)
    if spec.kind == "subexponential":
        x = pow_enclosure(Fraction(n), spec.beta, work)
        return exp_enclosure(x, work) * spec.gamma
    # sublacunary with beta > 0: cached running product
    cache = _encl_cache.setdefault(key, [Enclosure.exact(1)])
    while len(cache) < n:
        j = len(cache)
        fac = Enclosure.exact(1) + spec.gamma / pow_enclosure(Fraction(j), spec.beta, work)
        cache.append((cache[-1] * fac).round_out(work))
    return cache[n - 1]


# ---------------------------------------------------------------------------
# growth queries


def ratio_at_least(
    spec: SequenceSpec, n: int, k: int, tau: Enclosure | Fraction
) -> bool:
    """Certified decision of t_{n+k} / t_n >= tau (three-way, may raise)."""
    tau = Enclosure.of(tau)

    def pred(prec: int) -> Optional[bool]:
        num = term(spec, n + k, prec)
        den = term(spec, n, prec)
        return num.ge(tau * den)

    return decide(pred, what=f"growth ratio at n={n}, k={k}")


def growth_index_H(spec: SequenceSpec, n: int, tau) -> int:
    """Smallest k >= 1 with t_{n+k} / t_n >= tau (tau an exact rational >= 1).

    The sequence is strictly increasing, so the predicate is monotone in
    k and a doubling probe plus binary search finds the exact minimum.
    """
    tau = Fraction(tau)
    if tau < 1:
        raise ParameterError("tau must be >= 1")
    if n < 1:
        raise ParameterError("n must be >= 1")
    hi = 1
    while not ratio_at_least(spec, n, hi, tau):
        hi *= 2  # term() raises if an explicit list runs out first
    lo = hi // 2  # ratio at lo (when lo >= 1) is certified below tau
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ratio_at_least(spec, n, mid, tau):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# growth-class verification


@dataclass(frozen=True)
class SublacunaryClass:
    gamma: Fraction
    beta: Fraction


@dataclass(frozen=True)
class SubexponentialClass:
    beta: Fraction
    gamma1: Optional[Fraction] = None
    gamma2: Optional[Fraction] = None


@dataclass
class GrowthReport:
    passed: bool
    first_violation: Optional[int] = None
    reason: str = ""
    fitted: Dict[str, str] = field(default_factory=dict)


def verify_growth_class(
    spec: SequenceSpec,
    cls,
    n_lo: int,
    n_hi: int,
    prec: int = DEFAULT_PREC,
) -> GrowthReport:
    """Certified membership check of the sequence in a growth class.

    Sublacunary: every consecutive ratio must satisfy
    t_{n+1}/t_n >= 1 + gamma/n^beta on [n_lo, n_hi - 1]; on pass the
    tightest certified gamma is reported.

    Subexponential with both constants given: gamma1 * exp(n^beta) <=
    t_n <= gamma2 * exp(n^beta) checked per n.  With constants omitted,
    shape mode: the normalized exponent x_n = log(t_n) / n^beta must
    stay within a factor 2 of its value at n_lo across the whole range
    (a drifting x_n means the beta-shape cannot hold with any constants
    on a tail), and the tightest constants over the range are reported.
    """
    if not 1 <= n_lo <= n_hi:
        raise ParameterError("need 1 <= n_lo <= n_hi")

    if isinstance(cls, SublacunaryClass):
        return _verify_sublacunary(spec, cls, n_lo, n_hi, prec)
    if isinstance(cls, SubexponentialClass):
        return _verify_subexponential(spec, cls, n_lo, n_hi, prec)
    raise ParameterError("unknown growth class")


def _verify_sublacunary(spec, cls, n_lo, n_hi, prec) -> GrowthReport:
    fitted_lo: Optional[Fraction] = None
    for n in range(n_lo, n_hi):
        bound = Enclosure.exact(1) + cls.gamma / pow_enclosure(
            Fraction(n), cls.beta, prec
        )
        if not ratio_at_least(spec, n, 1, bound):
            return GrowthReport(
                False, first_violation=n, reason="consecutive ratio below 1 + gamma/n^beta"
            )
        # tightest certified gamma at this n: (ratio - 1) * n^beta from below
        def excess(p: int) -> Enclosure:
            r = term(spec, n + 1, p) / term(spec, n, p)
            return (r - 1) * pow_enclosure(Fraction(n), cls.beta, p)

        g = excess(prec).lo
        fitted_lo = g if fitted_lo is None else min(fitted_lo, g)
    fitted = {} if fitted_lo is None else {"gamma": str(fitted_lo)}
    return GrowthReport(True, fitted=fitted)


def _verify_subexponential(spec, cls, n_lo, n_hi, prec) -> GrowthReport:
    if (cls.gamma1 is None) != (cls.gamma2 is None):
        raise ParameterError("give both constants or neither")

    if cls.gamma1 is not None:
        for n in range(n_lo, n_hi + 1):

            def above(p: int):
                return term(spec, n, p).ge(
                    exp_enclosure(pow_enclosure(Fraction(n), cls.beta, p), p) * cls.gamma1
                )

            def below(p: int):
                return term(spec, n, p).le(
                    exp_enclosure(pow_enclosure(Fraction(n), cls.beta, p), p) * cls.gamma2
                )

            if not decide(above, start=prec, what=f"lower envelope at n={n}"):
                return GrowthReport(False, n, "below gamma1 * exp(n^beta)")
            if not decide(below, start=prec, what=f"upper envelope at n={n}"):
                return GrowthReport(False, n, "above gamma2 * exp(n^beta)")
        return GrowthReport(True, fitted={"gamma1": str(cls.gamma1), "gamma2": str(cls.gamma2)})

    # shape mode: x_n = log(t_n) / n^beta must not drift by more than 2x
    def x_at(n: int, p: int) -> Enclosure:
        return log_enclosure(term(spec, n, p), p) / pow_enclosure(Fraction(n), cls.beta, p)

    ref = x_at(n_lo, prec)
    if ref.lo <= 0:
        return GrowthReport(False, n_lo, "log(t_n) not certified positive")
    g1: Optional[Fraction] = None
    g2: Optional[Fraction] = None
    for n in range(n_lo, n_hi + 1):
        def in_band(p: int) -> Optional[bool]:
            x = x_at(n, p)
            r = x_at(n_lo, p)
            hi_ok = x.le(r * 2)
            lo_ok = x.ge(r * Fraction(1, 2))
            if hi_ok is None or lo_ok is None:
                return None
            if hi_ok and lo_ok:
                return True
            return False

        if not decide(in_band, start=prec, what=f"shape band at n={n}"):
            return GrowthReport(
                False, n, "normalized exponent log(t_n)/n^beta drifted beyond 2x"
            )
        env = exp_enclosure(pow_enclosure(Fraction(n), cls.beta, prec), prec)
        ratio = term(spec, n, prec) / env
        g1 = ratio.lo if g1 is None else min(g1, ratio.lo)
        g2 = ratio.hi if g2 is None else max(g2, ratio.hi)
    from .enclosure import format_decimal

    return GrowthReport(
        True,
        fitted={
            "gamma1": format_decimal(g1, 12),
            "gamma2": format_decimal(g2, 12),
        },
    )
