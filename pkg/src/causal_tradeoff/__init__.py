"""Closed-form and simulated inconsistency of OLS and 2SLS when instrument assumptions fail.

The main entry points:

* :func:`closed_form` gives the probability limits of the three estimators
  for a structural scenario.
* :func:`causal_tradeoff.montecarlo.run` checks them by simulation.
* :func:`causal_tradeoff.sensitivity.analyze` runs the partial-R² sensitivity
  analysis on a dataset.
"""

from .data import Dataset, Roles, ingest_csv, write_csv
from .errors import (
    CausalTradeoffError,
    CollinearError,
    DataError,
    DegenerateDenominatorError,
    EmptyGridError,
    InfeasibleError,
    MissingColumnError,
    NonNumericError,
    NotDerivedError,
    ParseError,
    RankDeficientError,
    ResampleLimitError,
    WeakDenominatorError,
    ZeroVarianceError,
)
from .scenarios import (
    ClosedFormResult,
    GeneratedData,
    Kind,
    ScenarioSpec,
    closed_form,
    feasible_error_variances,
    generate,
    true_inconsistency_ratio,
)

__version__ = "0.1.0"

__all__ = [
    "CausalTradeoffError",
    "ClosedFormResult",
    "CollinearError",
    "DataError",
    "Dataset",
    "DegenerateDenominatorError",
    "EmptyGridError",
    "GeneratedData",
    "InfeasibleError",
    "Kind",
    "MissingColumnError",
    "NonNumericError",
    "NotDerivedError",
    "ParseError",
    "RankDeficientError",
    "ResampleLimitError",
    "Roles",
    "ScenarioSpec",
    "WeakDenominatorError",
    "ZeroVarianceError",
    "closed_form",
    "feasible_error_variances",
    "generate",
    "ingest_csv",
    "true_inconsistency_ratio",
    "write_csv",
]
