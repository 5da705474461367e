"""Exact-arithmetic dyadic exclusion sieve.

Certifies survivor-measure lower bounds for a family of excluded
rational neighbourhoods, extracts explicit binary witnesses, and
bounds the Hausdorff dimension of the survivor set from below via
certified series comparisons.  All load-bearing numbers are rationals
or rational enclosures; nothing is trusted to floating point.
"""

from .enclosure import DEFAULT_PREC, Enclosure, floor_log2, format_decimal
from .errors import (
    BudgetExceeded,
    ConditionViolated,
    DyadsieveError,
    InternalBoundBreach,
    ParameterError,
    PrecisionError,
    SearchExhausted,
)
from .sequences import (
    GrowthReport,
    SequenceSpec,
    SublacunaryClass,
    SubexponentialClass,
    exact_term,
    explicit,
    geometric,
    growth_index_H,
    smooth,
    smooth_terms,
    sublacunary,
    subexponential,
    term,
    verify_growth_class,
)
from .schedule import (
    CheckpointChain,
    ConditionReport,
    ConstantDelta,
    ConstantH,
    LaggedGrowthH,
    LogLagH,
    PowerLogDelta,
    Schedule,
    ShapedDelta,
    TuneReport,
    Verdict,
    autotune_kappa,
    build_chain,
    check_conditions,
    preset_constant,
    preset_power_log,
)
from .runset import RunSet
from .sieve import (
    Certificate,
    CheckpointRecord,
    MarginReport,
    SieveTrace,
    exact_norm_distance,
    exclusion_cover,
    extract_witness,
    level,
    run_sieve_full,
    verify_certificate,
)
from .oracle import IntervalUnion, OracleComparison, compare_with_sieve, exact_bad_set
from .dimension import (
    ChainGrowthData,
    DimensionReport,
    EgglestonData,
    SeriesReport,
    chain_data,
    dimension_lower_bound,
    series_terms,
)

__all__ = [
    "DEFAULT_PREC",
    "Enclosure",
    "floor_log2",
    "format_decimal",
    "DyadsieveError",
    "ParameterError",
    "ConditionViolated",
    "InternalBoundBreach",
    "SearchExhausted",
    "PrecisionError",
    "BudgetExceeded",
    "SequenceSpec",
    "GrowthReport",
    "SublacunaryClass",
    "SubexponentialClass",
    "geometric",
    "smooth",
    "explicit",
    "subexponential",
    "sublacunary",
    "smooth_terms",
    "exact_term",
    "term",
    "growth_index_H",
    "verify_growth_class",
    "Schedule",
    "CheckpointChain",
    "ConditionReport",
    "Verdict",
    "TuneReport",
    "ConstantDelta",
    "ShapedDelta",
    "PowerLogDelta",
    "ConstantH",
    "LogLagH",
    "LaggedGrowthH",
    "build_chain",
    "check_conditions",
    "preset_constant",
    "preset_power_log",
    "autotune_kappa",
    "RunSet",
    "level",
    "exclusion_cover",
    "run_sieve_full",
    "extract_witness",
    "verify_certificate",
    "exact_norm_distance",
    "Certificate",
    "CheckpointRecord",
    "SieveTrace",
    "MarginReport",
    "IntervalUnion",
    "OracleComparison",
    "exact_bad_set",
    "compare_with_sieve",
    "EgglestonData",
    "ChainGrowthData",
    "SeriesReport",
    "DimensionReport",
    "chain_data",
    "series_terms",
    "dimension_lower_bound",
]

__version__ = "0.1.0"
