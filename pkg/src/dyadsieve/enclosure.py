"""Two-sided rational enclosures with directed rounding.

An Enclosure is a closed interval [lo, hi] of exact rationals that is
guaranteed to contain the real number it stands for.  Rational interval
arithmetic on Fraction endpoints is exact, so widths only enter through
transcendental leaves (exp, log, powers), which are evaluated with
mpmath's interval arithmetic at a requested precision and converted to
exact dyadic endpoints.

Comparisons are three-way: certainly true, certainly false, or
undecidable at the current width.  `decide` retries a predicate at
doubling precision and raises PrecisionError at the ceiling rather than
guessing.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

import mpmath

from .errors import ParameterError, PrecisionError

DEFAULT_PREC = 128
MAX_PREC = 4096

# mpmath guard bits on top of the requested precision
_GUARD = 16

Rational = Union[Fraction, int]


def _mpf_tuple_to_fraction(t) -> Fraction:
    sign, man, exp, _bc = t
    man = int(man)
    if exp >= 0:
        v = Fraction(man * (1 << exp))
    else:
        v = Fraction(man, 1 << (-exp))
    return -v if sign else v


def _fraction_to_iv(x: Fraction, ivctx):
    # exact when x is dyadic; otherwise outward-rounded by interval division
    if x.denominator == 1:
        return ivctx.mpf(x.numerator)
    return ivctx.mpf(x.numerator) / ivctx.mpf(x.denominator)


@dataclass(frozen=True)
class Enclosure:
    """Closed rational interval certified to contain a real value."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise ParameterError(f"inverted enclosure [{self.lo}, {self.hi}]")

    # -- constructors ------------------------------------------------

    @staticmethod
    def exact(x: Rational) -> "Enclosure":
        f = Fraction(x)
        return Enclosure(f, f)

    @staticmethod
    def of(x: "EnclosureLike") -> "Enclosure":
        if isinstance(x, Enclosure):
            return x
        return Enclosure.exact(x)

    # -- basic queries ------------------------------------------------

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def is_exact(self) -> bool:
        return self.lo == self.hi

    def rel_width(self) -> Fraction:
        m = min(abs(self.lo), abs(self.hi))
        if m == 0:
            return self.width if self.width else Fraction(0)
        return self.width / m

    def contains(self, x: Rational) -> bool:
        f = Fraction(x)
        return self.lo <= f <= self.hi

    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    # -- exact interval arithmetic -------------------------------------

    def __add__(self, other: "EnclosureLike") -> "Enclosure":
        o = Enclosure.of(other)
        return Enclosure(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self) -> "Enclosure":
        return Enclosure(-self.hi, -self.lo)

    def __sub__(self, other: "EnclosureLike") -> "Enclosure":
        return self + (-Enclosure.of(other))

    def __rsub__(self, other: "EnclosureLike") -> "Enclosure":
        return Enclosure.of(other) + (-self)

    def __mul__(self, other: "EnclosureLike") -> "Enclosure":
        o = Enclosure.of(other)
        cands = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Enclosure(min(cands), max(cands))

    __rmul__ = __mul__

    def inv(self) -> "Enclosure":
        if self.lo <= 0 <= self.hi:
            raise ParameterError("reciprocal of enclosure straddling zero")
        return Enclosure(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other: "EnclosureLike") -> "Enclosure":
        return self * Enclosure.of(other).inv()

    def __rtruediv__(self, other: "EnclosureLike") -> "Enclosure":
        return Enclosure.of(other) * self.inv()

    # -- rounding ------------------------------------------------------

    def round_out(self, prec: int) -> "Enclosure":
        """Widen endpoints outward onto a dyadic grid.

        Keeps denominators bounded by 2^prec-ish scale so long products
        of enclosures do not accumulate giant exact denominators.  The
        grid step is chosen relative to the magnitude of the interval.
        """
        scale = max(abs(self.lo), abs(self.hi))
        if scale == 0:
            return self
        e = floor_log2(scale)
        step_exp = prec - e  # lsb = 2**(e - prec)
        if step_exp <= 0:
            return self
        q = 1 << step_exp
        lo = Fraction(_floor_div(self.lo.numerator * q, self.lo.denominator), q)
        hi = Fraction(_ceil_div(self.hi.numerator * q, self.hi.denominator), q)
        return Enclosure(lo, hi)

    # -- three-way comparisons ----------------------------------------
    # Return True/False when certified, None when the enclosures overlap.

    def lt(self, other: "EnclosureLike") -> Optional[bool]:
        o = Enclosure.of(other)
        if self.hi < o.lo:
            return True
        if self.lo >= o.hi:
            return False
        return None

    def le(self, other: "EnclosureLike") -> Optional[bool]:
        o = Enclosure.of(other)
        if self.hi <= o.lo:
            return True
        if self.lo > o.hi:
            return False
        return None

    def gt(self, other: "EnclosureLike") -> Optional[bool]:
        o = Enclosure.of(other)
        return o.lt(self)

    def ge(self, other: "EnclosureLike") -> Optional[bool]:
        o = Enclosure.of(other)
        return o.le(self)

    # -- formatting ----------------------------------------------------

    def __str__(self):
        if self.is_exact:
            return str(self.lo)
        return f"[{self.lo}, {self.hi}]"

    def decimal_str(self, sig: int = 20) -> str:
        """Decimal rendering of the midpoint with `sig` significant digits."""
        return format_decimal(self.mid(), sig)


EnclosureLike = Union[Enclosure, Fraction, int]


def _floor_div(a: int, b: int) -> int:
    return a // b


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def floor_log2(x: Rational) -> int:
    """Exact floor(log2(x)) for a positive rational, no floating point."""
    f = Fraction(x)
    if f <= 0:
        raise ParameterError("floor_log2 needs a positive argument")
    p, q = f.numerator, f.denominator
    e = p.bit_length() - q.bit_length()
    # 2**e <= p/q < 2**(e+1) must be verified exactly and adjusted
    if e >= 0:
        if p < (q << e):
            e -= 1
        elif p >= (q << (e + 1)):
            e += 1
    else:
        if (p << -e) < q:
            e -= 1
        elif (p << (-e - 1)) >= q:
            e += 1
    return e


def floor_log2_enclosure(x: Enclosure) -> Optional[int]:
    """floor(log2(x)) when decided by the enclosure, else None."""
    a = floor_log2(x.lo)
    b = floor_log2(x.hi)
    return a if a == b else None


def floor_enclosure(x: Enclosure) -> Optional[int]:
    a = x.lo.numerator // x.lo.denominator
    b = x.hi.numerator // x.hi.denominator
    return a if a == b else None


# -- transcendental leaves (mpmath interval arithmetic) ----------------


def _iv_ctx(prec: int):
    ctx = mpmath.iv
    ctx.prec = prec + _GUARD
    return ctx


def _iv_to_enclosure(v) -> Enclosure:
    a, b = v._mpi_
    return Enclosure(_mpf_tuple_to_fraction(a), _mpf_tuple_to_fraction(b))


def _lift(f, x: EnclosureLike, prec: int, monotone_up: bool = True) -> Enclosure:
    """Apply a monotone mpmath.iv function to an enclosure."""
    e = Enclosure.of(x)
    ctx = _iv_ctx(prec)
    lo = _iv_to_enclosure(f(ctx, _fraction_to_iv(e.lo, ctx)))
    if e.is_exact:
        return lo
    hi = _iv_to_enclosure(f(ctx, _fraction_to_iv(e.hi, ctx)))
    if monotone_up:
        return Enclosure(lo.lo, hi.hi)
    return Enclosure(hi.lo, lo.hi)


def exp_enclosure(x: EnclosureLike, prec: int = DEFAULT_PREC) -> Enclosure:
    return _lift(lambda c, v: c.exp(v), x, prec)


def log_enclosure(x: EnclosureLike, prec: int = DEFAULT_PREC) -> Enclosure:
    e = Enclosure.of(x)
    if e.lo <= 0:
        raise ParameterError("log of a non-positive enclosure")
    return _lift(lambda c, v: c.log(v), x, prec)


def sqrt_enclosure(x: EnclosureLike, prec: int = DEFAULT_PREC) -> Enclosure:
    e = Enclosure.of(x)
    if e.lo < 0:
        raise ParameterError("sqrt of a negative enclosure")
    return _lift(lambda c, v: c.sqrt(v), x, prec)


def pow_enclosure(base: EnclosureLike, expo: Fraction, prec: int = DEFAULT_PREC) -> Enclosure:
    """base**expo for positive base and rational exponent, via exp(expo*log base)."""
    b = Enclosure.of(base)
    if b.lo <= 0:
        raise ParameterError("pow_enclosure needs a positive base")
    expo = Fraction(expo)
    if expo == 0:
        return Enclosure.exact(1)
    if expo.denominator == 1 and abs(expo.numerator) <= 64:
        # small integer powers stay exact
        n = expo.numerator
        out = Enclosure.exact(1)
        for _ in range(abs(n)):
            out = out * b
        return out if n > 0 else out.inv()
    lg = log_enclosure(b, prec)
    return exp_enclosure(lg * expo, prec)


# -- the precision-doubling decision loop ------------------------------


def decide(
    predicate: Callable[[int], Optional[bool]],
    start: int = DEFAULT_PREC,
    ceiling: int = MAX_PREC,
    what: str = "comparison",
) -> bool:
    """Evaluate a three-way predicate at doubling precision until decided.

    `predicate(prec)` must return True/False when certified at that
    precision and None when still undecidable.  Raises PrecisionError at
    the ceiling.
    """
    prec = start
    while True:
        out = predicate(prec)
        if out is not None:
            return out
        if prec >= ceiling:
            raise PrecisionError(
                f"{what} undecidable at precision ceiling {ceiling} bits"
            )
        prec = min(2 * prec, ceiling)


def resolve_int(
    evaluate: Callable[[int], Optional[int]],
    start: int = DEFAULT_PREC,
    ceiling: int = MAX_PREC,
    what: str = "integer extraction",
) -> int:
    """Like `decide` but for integer-valued extractions (floors, levels)."""
    prec = start
    while True:
        out = evaluate(prec)
        if out is not None:
            return out
        if prec >= ceiling:
            raise PrecisionError(
                f"{what} undecidable at precision ceiling {ceiling} bits"
            )
        prec = min(2 * prec, ceiling)


def format_decimal(x: Fraction, sig: int = 20) -> str:
    """Exact decimal rendering of a rational to `sig` significant digits."""
    if x == 0:
        return "0"
    sign = "-" if x < 0 else ""
    x = abs(x)
    # find decimal exponent e with 10^e <= x < 10^(e+1); the bit-length
    # estimate avoids stringifying huge integers and is off by at most 1
    e = (x.numerator.bit_length() - x.denominator.bit_length()) * 30103 // 100000
    while 10**e > x:
        e -= 1
    while 10 ** (e + 1) <= x:
        e += 1
    shift = sig - 1 - e
    scaled = x * Fraction(10) ** shift
    digits = scaled.numerator // scaled.denominator  # truncation toward zero
    s = str(digits)
    if len(s) > sig:  # carry from rounding boundary
        s = s[:sig]
        e += 1
    if e < -4 or e >= sig:
        mant = s[0] + "." + s[1:].rstrip("0").ljust(1, "0")
        return f"{sign}{mant}e{e:+d}"
    if e >= len(s) - 1:
        return sign + s.ljust(e + 1, "0")
    if e >= 0:
        frac = s[e + 1 :].rstrip("0")
        return sign + s[: e + 1] + ("." + frac if frac else "")
    return sign + "0." + "0" * (-e - 1) + s.rstrip("0")
