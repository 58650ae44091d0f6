"""DP linear regression over noisy sufficient statistics."""

from .design import ColumnInfo, DesignSpec, ScaledDesign, compute_S, rescale_design
from .fit import BootstrapResult, ScaledFit, bootstrap_ci, fit_plugin
from .perturb import (
    MECHANISMS,
    NoisySufficientStatistic,
    build_noise_model,
    censor_eigenvalues,
    perturb_S,
    wishart_dof,
)
from .pipeline import RegressionEstimate, RegressionOptions, bhm_regression, dp_regression
from .plan import SensitivityPlan, sensitivity_plan
from .regularize import regularize, wishart_shift

__all__ = [
    "MECHANISMS",
    "BootstrapResult",
    "ColumnInfo",
    "DesignSpec",
    "NoisySufficientStatistic",
    "RegressionEstimate",
    "RegressionOptions",
    "ScaledDesign",
    "ScaledFit",
    "SensitivityPlan",
    "bhm_regression",
    "bootstrap_ci",
    "build_noise_model",
    "censor_eigenvalues",
    "compute_S",
    "dp_regression",
    "fit_plugin",
    "perturb_S",
    "regularize",
    "rescale_design",
    "sensitivity_plan",
    "wishart_dof",
    "wishart_shift",
]
