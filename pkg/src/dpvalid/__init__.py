"""Differentially private validation-server toolkit.

Mechanisms, a budget accountant, summary queries (histograms, means with
CIs, quantiles), regression over noisy sufficient statistics, a synthetic
benchmark dataset, an evaluation harness, and an HTTP query server.
"""

from .accountant import BudgetLedger, ChargeRecord, LedgerStore, PreviewResult, Spent
from .columns import BoundedColumn, CategoricalColumn, Table, load_schema, load_table
from .errors import (
    BudgetExceededError,
    CalibrationError,
    DegenerateFitError,
    DpvalidError,
    InsufficientDataError,
    InvalidParameterError,
    MalformedRequestError,
    NotFoundError,
    UndefinedMetricError,
)
from .params import (
    GlobalSensitivity,
    PrivacyParams,
    ZcdpParams,
    gaussian_zcdp,
    pure_dp_to_zcdp,
    zcdp_to_approx_dp,
)
from .rng import RandomSource, derive_stream

__version__ = "0.1.0"

__all__ = [
    "BoundedColumn",
    "BudgetExceededError",
    "BudgetLedger",
    "CalibrationError",
    "CategoricalColumn",
    "ChargeRecord",
    "DegenerateFitError",
    "DpvalidError",
    "GlobalSensitivity",
    "InsufficientDataError",
    "InvalidParameterError",
    "LedgerStore",
    "MalformedRequestError",
    "NotFoundError",
    "PreviewResult",
    "PrivacyParams",
    "RandomSource",
    "Spent",
    "Table",
    "UndefinedMetricError",
    "ZcdpParams",
    "__version__",
    "derive_stream",
    "gaussian_zcdp",
    "load_schema",
    "load_table",
    "pure_dp_to_zcdp",
    "zcdp_to_approx_dp",
]
