"""Hausdorff-dimension lower bounds by certified series convergence.

Two series sources are supported.  A nested-grid table (stage widths
Delta_k, stage cell counts R_k) feeds the classical comparison series

    term_k = (Delta_{k-1} / Delta_k) / (R_k * Delta_k^nu),

and a checkpoint chain with retention eta and per-checkpoint
sharpness values T_k = t_{n_k} / delta(n_k) feeds

    term_k = eta^{-k} * T_k^nu / T_{k-1}.

Convergence of either series for every nu below some nu0 yields
HD >= nu0 for the surviving set.  Verdicts are certified only through
an exact closed-form ratio: when the table is exactly geometric the
consecutive-term ratio is a constant rational power, and the
comparison against 1 reduces to integer-power inequalities with no
rounding anywhere.  Anything less structured is reported as
inconclusive; empirical term decay never upgrades a verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

from .enclosure import DEFAULT_PREC, Enclosure, format_decimal, pow_enclosure
from .errors import ParameterError
from .sieve import Certificate, SieveTrace

# ---------------------------------------------------------------------------
# sources


@dataclass(frozen=True)
class EgglestonData:
    """Nested-grid stage table: widths, cumulative counts, children.

    Stage k has R_k cells of width Delta_k, each parent splitting into
    children[k] cells at the next stage, so R_{k+1} = R_k * children[k+1].
    """

    deltas: Tuple[Fraction, ...]
    counts: Tuple[int, ...]

    def __post_init__(self):
        if len(self.deltas) != len(self.counts) or len(self.deltas) < 2:
            raise ParameterError("need matching tables with at least two stages")
        prev_d, prev_r = None, None
        for d, r in zip(self.deltas, self.counts):
            if d <= 0 or r < 1:
                raise ParameterError("widths must be positive, counts >= 1")
            if prev_d is not None:
                if d >= prev_d:
                    raise ParameterError("stage widths must strictly decrease")
                if r % prev_r != 0:
                    raise ParameterError(
                        "counts must grow by integer children factors"
                    )
            prev_d, prev_r = d, r

    @property
    def stages(self) -> int:
        return len(self.deltas)

    def children(self, k: int) -> int:
        """Children per parent entering stage k (1-based, k >= 1)."""
        return self.counts[k] // self.counts[k - 1]

    @classmethod
    def geometric(cls, sigma: Fraction, m: int, stages: int) -> "EgglestonData":
        """Delta_k = sigma^-k, R_k = m^k for k = 0..stages."""
        sigma = Fraction(sigma)
        if sigma <= 1 or m < 1:
            raise ParameterError("need sigma > 1 and m >= 1")
        deltas = tuple(sigma ** -k for k in range(stages + 1))
        counts = tuple(m ** k for k in range(stages + 1))
        return cls(deltas, counts)

    @classmethod
    def from_witness(cls, cert: Certificate) -> "EgglestonData":
        """Stage table observed along one extracted-witness path.

        Widths are the checkpoint cell widths; children counts are the
        surviving-candidate counts seen at each descent.  This models
        the tree as if every parent matched the observed path, so the
        resulting bound describes the run, not the theorem's worst case.
        """
        deltas = [Fraction(1, 1 << lvl) for _, lvl, _ in cert.parents]
        counts: List[int] = []
        r = 1
        for c in cert.stage_counts:
            r *= max(1, c)
            counts.append(r)
        return cls(tuple(deltas), tuple(counts))


@dataclass(frozen=True)
class ChainGrowthData:
    """Checkpoint sharpness values T_k = t_{n_k}/delta(n_k) plus eta."""

    eta: Fraction
    values: Tuple[Fraction, ...]

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ParameterError("eta must lie in (0, 1)")
        if len(self.values) < 2:
            raise ParameterError("need at least two checkpoints")
        prev = None
        for v in self.values:
            if v <= 0:
                raise ParameterError("sharpness values must be positive")
            if prev is not None and v < prev:
                raise ParameterError("sharpness values must be non-decreasing")
            prev = v

    @classmethod
    def geometric(
        cls, eta: Fraction, first: Fraction, rho: Fraction, stages: int
    ) -> "ChainGrowthData":
        rho = Fraction(rho)
        if rho < 1:
            raise ParameterError("rho must be >= 1")
        vals = tuple(Fraction(first) * rho ** k for k in range(stages + 1))
        return cls(Fraction(eta), vals)

    @classmethod
    def from_trace(cls, trace: SieveTrace) -> "ChainGrowthData":
        vals = tuple(c.term_low / c.radius for c in trace.checkpoints)
        return cls(trace.eta, vals)


def chain_data(spec, schedule, chain, prec: int = DEFAULT_PREC) -> ChainGrowthData:
    """Checkpoint sharpness T_k straight from a sequence and schedule."""
    from .sequences import term

    values = []
    for n in chain.nodes:
        t = term(spec, n, prec)
        r = schedule.delta_at(n, prec).hi
        values.append(t.lo / r)
    return ChainGrowthData(schedule.eta, tuple(values))


Source = Union[EgglestonData, ChainGrowthData]

# ---------------------------------------------------------------------------
# series report


CONVERGENT = "certified-convergent"
DIVERGENT = "certified-divergent"
INCONCLUSIVE = "inconclusive"


@dataclass
class SeriesReport:
    nu: Fraction
    source_kind: str
    verdict: str
    terms: List[Enclosure] = field(default_factory=list)
    ratios: List[Enclosure] = field(default_factory=list)
    partial_sums: List[Enclosure] = field(default_factory=list)
    k0: Optional[int] = None
    ratio_bound: Optional[Enclosure] = None
    tail_bound: Optional[Enclosure] = None
    note: str = ""

    def to_json(self):
        out = {
            "nu": str(self.nu),
            "source": self.source_kind,
            "verdict": self.verdict,
            "terms": [format_decimal(t.mid(), 20) for t in self.terms],
            "ratios": [format_decimal(r.mid(), 20) for r in self.ratios],
            "partial_sums": [format_decimal(s.mid(), 20) for s in self.partial_sums],
        }
        if self.k0 is not None:
            out["k0"] = self.k0
        if self.ratio_bound is not None:
            out["q"] = format_decimal(self.ratio_bound.hi, 20)
        if self.tail_bound is not None:
            out["tail_bound"] = format_decimal(self.tail_bound.hi, 20)
        if self.note:
            out["note"] = self.note
        return out

    def csv_rows(self) -> List[Tuple[str, str, str, str]]:
        rows = []
        for i, t in enumerate(self.terms):
            ratio = format_decimal(self.ratios[i - 1].mid(), 20) if i >= 1 else ""
            rows.append(
                (
                    str(i + 1),
                    format_decimal(t.mid(), 20),
                    ratio,
                    format_decimal(self.partial_sums[i].mid(), 20),
                )
            )
        return rows


def _check_nu(nu) -> Fraction:
    nu = Fraction(nu)
    if not 0 < nu <= 1:
        raise ParameterError("nu must lie in (0, 1]")
    return nu


def _pow_rational(base: Fraction, nu: Fraction, prec: int) -> Enclosure:
    """base^nu as an exact value when possible, else an enclosure."""
    p, q = nu.numerator, nu.denominator
    if q == 1:
        return Enclosure.exact(base ** p)
    return pow_enclosure(base, nu, prec)


def _constant_ratio(values: Sequence[Fraction]) -> Optional[Fraction]:
    """The common consecutive ratio of an exactly geometric table."""
    if len(values) < 2:
        return None
    r = values[1] / values[0]
    for a, b in zip(values[1:], values[2:]):
        if b != a * r:
            return None
    return r


def _power_less_than(base: Fraction, expo: Fraction, bound: Fraction) -> bool:
    """Exact test base^expo < bound for positive rationals, integer work.

    With expo = p/q the comparison becomes base^p < bound^q, evaluated
    on numerators and denominators as arbitrary-size integers.
    """
    p, q = expo.numerator, expo.denominator
    if p >= 0:
        lhs_n = base.numerator ** p * bound.denominator ** q
        rhs_n = base.denominator ** p * bound.numerator ** q
    else:
        lhs_n = base.denominator ** (-p) * bound.denominator ** q
        rhs_n = base.numerator ** (-p) * bound.numerator ** q
    return lhs_n < rhs_n


def series_terms(
    source: Source, nu, k_max: int = 12, prec: int = DEFAULT_PREC
) -> SeriesReport:
    """Terms, ratios and a certified verdict for the comparison series.

    The verdict is decided by the exact closed-form consecutive-term
    ratio when the source table is exactly geometric; otherwise the
    report carries the computed terms but stays inconclusive.
    """
    nu = _check_nu(nu)
    if isinstance(source, EgglestonData):
        return _eggleston_series(source, nu, k_max, prec)
    if isinstance(source, ChainGrowthData):
        return _chain_series(source, nu, k_max, prec)
    raise ParameterError(f"unknown series source {type(source).__name__}")


def _fill_terms(report: SeriesReport, terms: List[Enclosure]):
    report.terms = terms
    total = Enclosure.exact(0)
    for i, t in enumerate(terms):
        total = total + t
        report.partial_sums.append(total)
        if i >= 1:
            prev = terms[i - 1]
            if prev.lo > 0:
                report.ratios.append(t / prev)
            else:
                report.ratios.append(Enclosure(Fraction(0), Fraction(1)))


def _eggleston_series(
    data: EgglestonData, nu: Fraction, k_max: int, prec: int
) -> SeriesReport:
    report = SeriesReport(nu=nu, source_kind="eggleston", verdict=INCONCLUSIVE)
    k_hi = min(k_max, data.stages - 1)
    terms = []
    for k in range(1, k_hi + 1):
        width_ratio = data.deltas[k - 1] / data.deltas[k]
        t = (
            Enclosure.exact(width_ratio)
            * _pow_rational(data.deltas[k], nu, prec).inv()
            / Fraction(data.counts[k])
        )
        terms.append(t)
    _fill_terms(report, terms)

    sigma = _constant_ratio([Fraction(1) / d for d in data.deltas])
    kids = {data.children(k) for k in range(1, data.stages)}
    if sigma is not None and len(kids) == 1:
        m = kids.pop()
        # ratio term_{k+1}/term_k = sigma^nu / m, a constant
        report.ratio_bound = _pow_rational(sigma, nu, prec) / Fraction(m)
        if _power_less_than(sigma, nu, Fraction(m)):
            report.verdict = CONVERGENT
            report.k0 = 1
            _attach_tail(report)
        else:
            report.verdict = DIVERGENT
            report.note = "constant term ratio at or above 1"
    else:
        report.note = "stage table is not exactly geometric"
    return report


def _chain_series(
    data: ChainGrowthData, nu: Fraction, k_max: int, prec: int
) -> SeriesReport:
    report = SeriesReport(nu=nu, source_kind="chain", verdict=INCONCLUSIVE)
    k_hi = min(k_max, len(data.values) - 1)
    inv_eta = Fraction(1) / data.eta
    terms = []
    for k in range(1, k_hi + 1):
        t = (
            _pow_rational(data.values[k], nu, prec)
            * (inv_eta ** k)
            / data.values[k - 1]
        )
        terms.append(t)
    _fill_terms(report, terms)

    rho = _constant_ratio(list(data.values))
    if rho is not None:
        # ratio term_{k+1}/term_k = rho^(nu-1) / eta, a constant
        report.ratio_bound = _pow_rational(rho, nu - 1, prec) * inv_eta
        if _power_less_than(rho, nu - 1, data.eta):
            report.verdict = CONVERGENT
            report.k0 = 1
            _attach_tail(report)
        else:
            report.verdict = DIVERGENT
            report.note = "constant term ratio at or above 1"
    else:
        report.note = "checkpoint sharpness is not exactly geometric"
    return report


def _attach_tail(report: SeriesReport):
    """Geometric tail bound: sum <= partial(k0) + term_k0 * q/(1-q)."""
    if not report.terms or report.ratio_bound is None:
        return
    q_hi = report.ratio_bound.hi
    if q_hi >= 1:
        return
    first = report.terms[report.k0 - 1]
    head = report.partial_sums[report.k0 - 1]
    report.tail_bound = head + first * (q_hi / (1 - q_hi))


# ---------------------------------------------------------------------------
# dimension bound


@dataclass
class DimensionReport:
    nu_star: Fraction
    eps: Fraction
    source_kind: str
    evaluations: List[Tuple[Fraction, str]] = field(default_factory=list)
    uncertain: Optional[Tuple[Fraction, Fraction]] = None
    note: str = ""

    def to_json(self):
        out = {
            "nu_star": str(self.nu_star),
            "nu_star_decimal": format_decimal(self.nu_star, 20),
            "eps": str(self.eps),
            "source": self.source_kind,
            "evaluations": [
                {"nu": str(nu), "verdict": v} for nu, v in self.evaluations
            ],
        }
        if self.uncertain is not None:
            out["uncertain"] = [str(self.uncertain[0]), str(self.uncertain[1])]
        if self.note:
            out["note"] = self.note
        return out


def dimension_lower_bound(
    source: Source,
    eps: Fraction = Fraction(1, 1 << 10),
    k_max: int = 12,
    prec: int = DEFAULT_PREC,
) -> DimensionReport:
    """Largest grid point nu with a certified-convergent series.

    Bisects nu over (0, 1] down to width eps.  Convergence at nu for
    all nu below the threshold gives HD >= threshold, so the returned
    nu_star is a certified lower bound up to grid resolution.  An
    inconclusive verdict stops the bisection and is reported as an
    uncertainty interval, never absorbed into the bound.
    """
    eps = Fraction(eps)
    if eps < Fraction(1, 1 << 20):
        raise ParameterError("eps below the supported grid resolution 2^-20")
    kind = "eggleston" if isinstance(source, EgglestonData) else "chain"
    report = DimensionReport(nu_star=Fraction(0), eps=eps, source_kind=kind)

    def verdict(nu: Fraction) -> str:
        v = series_terms(source, nu, k_max=k_max, prec=prec).verdict
        report.evaluations.append((nu, v))
        return v

    if verdict(Fraction(1)) == CONVERGENT:
        report.nu_star = Fraction(1)
        return report

    lo, hi = Fraction(0), Fraction(1)
    while hi - lo > eps:
        mid = (lo + hi) / 2
        v = verdict(mid)
        if v == CONVERGENT:
            lo = mid
        elif v == DIVERGENT:
            hi = mid
        else:
            report.uncertain = (lo, hi)
            report.note = "verdict inconclusive inside the bisection band"
            break
    report.nu_star = lo
    if lo == 0 and report.uncertain is None:
        report.note = "no grid point certified convergent"
    return report
