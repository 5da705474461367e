"""Exception types shared across the package.

Every certified computation in this package is conservative: an inequality
is reported as true only when proven at the working precision.  When a
comparison stays undecidable at the precision ceiling we raise instead of
guessing, and when a runtime-checked bound fails we raise instead of
silently continuing.  The CLI maps these onto stable exit codes.
"""


class DyadsieveError(Exception):
    """Base class for all package errors."""


class ParameterError(DyadsieveError):
    """A parameter is outside its documented domain."""


class ConditionViolated(DyadsieveError):
    """A certified schedule condition failed; carries the condition report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InternalBoundBreach(DyadsieveError):
    """A runtime-asserted inequality failed during a sieve run.

    The asserted bounds hold on the instance families this engine targets;
    a breach means either an implementation bug or an instance outside the
    regime the asserted constants were derived for.  Either way the run is
    not a certificate and must not be reported as one.
    """


class SearchExhausted(DyadsieveError):
    """Backtracking witness search ran out of candidates."""


class PrecisionError(DyadsieveError):
    """A comparison stayed undecidable at the precision ceiling."""


class BudgetExceeded(DyadsieveError):
    """An enumeration would exceed the configured work budget."""


# CLI exit codes (stable interface).
EXIT_OK = 0
EXIT_CONDITION = 1
EXIT_EXHAUSTED = 2
EXIT_CONFIG = 3
EXIT_PRECISION = 4
