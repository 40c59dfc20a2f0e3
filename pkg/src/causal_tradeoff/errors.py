"""Exception types raised across the package."""

from __future__ import annotations


class CausalTradeoffError(Exception):
    """Base class for all package errors."""


class ZeroVarianceError(CausalTradeoffError, ValueError):
    """A column is constant (sample variance below 1e-12)."""


class NotCenteredError(CausalTradeoffError, ValueError):
    """A regression input has a non-zero sample mean; fits carry no intercept."""


class CollinearError(CausalTradeoffError, ValueError):
    """The design matrix is numerically singular (condition number > 1e10)."""


class RankDeficientError(CausalTradeoffError, ValueError):
    """Fewer instruments than endogenous regressors."""


class WeakDenominatorError(CausalTradeoffError, ValueError):
    """The instrument carries (numerically) no information about the exposure."""


class InfeasibleError(CausalTradeoffError, ValueError):
    """A scenario's coefficients imply a non-positive error variance."""

    def __init__(self, message: str, constraint: str | None = None):
        super().__init__(message)
        self.constraint = constraint


class NotDerivedError(CausalTradeoffError, LookupError):
    """A probability limit has no closed form for this scenario."""


class DegenerateDenominatorError(CausalTradeoffError, ArithmeticError):
    """A sensitivity factor has a denominator below 1e-10."""

    def __init__(self, message: str, factor: str | None = None):
        super().__init__(message)
        self.factor = factor


class EmptyGridError(CausalTradeoffError, ValueError):
    """No feasible cell in a contour grid."""


class DataError(CausalTradeoffError, ValueError):
    """Base class for dataset ingestion problems."""


class ParseError(DataError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class MissingColumnError(DataError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class NonNumericError(ParseError):
    pass


class ResampleLimitError(CausalTradeoffError, RuntimeError):
    """Too many Monte Carlo replications failed numerically and had to be redrawn."""
