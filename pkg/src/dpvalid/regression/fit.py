"""Fitting on a regularized noisy cross-product matrix.

The plug-in fit reads the least-squares normal equations straight off the
matrix blocks; the parametric bootstrap re-draws matrix noise from its known
law plus a synthetic score term and pushes both through the same linear
algebra. All solves go through a Cholesky factorization of the regularized
block; no explicit inverse is ever formed except by solving against the
identity, which is the factorization path as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from ..errors import DegenerateFitError, InvalidParameterError
from ..rng import RandomSource
from .perturb import NoisySufficientStatistic

_SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class ScaledFit:
    """Plug-in estimate in the unit-scaled coordinate system."""

    beta: np.ndarray
    sigma2: float
    n_hat: float
    xtx_inv: np.ndarray  # (X^T X)^-1 via the factorization
    ci_asymptotic: np.ndarray  # p x 2
    confidence: float


@dataclass(frozen=True)
class BootstrapResult:
    draws: np.ndarray  # B x p replicate coefficients, scaled space
    ci: np.ndarray  # p x 2 empirical quantile interval
    confidence: float


def _partition(noisy: NoisySufficientStatistic) -> tuple[np.ndarray, np.ndarray, float]:
    if noisy.s_reg is None:
        raise InvalidParameterError("fit requires a regularized statistic; call regularize first")
    S = noisy.s_reg
    p = noisy.d - 1
    return S[:p, :p], S[:p, p], float(S[p, p])


def fit_plugin(
    noisy: NoisySufficientStatistic,
    confidence: float = 0.95,
    n_hat: float | None = None,
    floor_n: bool = True,
) -> ScaledFit:
    """Least squares read off the regularized matrix blocks.

    n comes from the intercept diagonal entry when the design has one;
    otherwise the caller must pass its own (separately privatized) n_hat.
    The error variance divides by (n_hat - p - 1) and is floored at a tiny
    positive value; n_hat itself is floored at p + 2 so the fit stays
    executable on unlucky draws (set floor_n=False to get a
    DegenerateFitError instead). Asymptotic intervals use normal quantiles
    with se_j = sqrt(sigma2 * [(X^T X)^-1]_jj).
    """
    if not (0.0 < confidence < 1.0):
        raise InvalidParameterError(f"confidence must lie in (0, 1), got {confidence}")
    xtx, xty, yty = _partition(noisy)
    p = xtx.shape[0]
    if n_hat is None:
        if noisy.plan.columns[0].kind != "intercept":
            raise InvalidParameterError(
                "the design has no intercept, so n cannot be read from S; "
                "pass a separately privatized n_hat"
            )
        n_hat = float(noisy.s_reg[0, 0])
    if floor_n:
        n_hat = max(float(n_hat), float(p + 2))
    elif n_hat <= p + 1:
        raise DegenerateFitError(
            f"noisy n = {n_hat} leaves no residual degrees of freedom (p = {p})"
        )
    try:
        factor = cho_factor(xtx, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError("regularized X^T X block is not positive definite") from exc
    beta = cho_solve(factor, xty)
    rss = yty - float(xty @ beta)
    sigma2 = max(rss / (n_hat - p - 1), _SIGMA2_FLOOR)
    xtx_inv = cho_solve(factor, np.eye(p))
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    z = float(norm.ppf((1.0 + confidence) / 2.0))
    ci = np.column_stack((beta - z * se, beta + z * se))
    return ScaledFit(
        beta=beta,
        sigma2=float(sigma2),
        n_hat=float(n_hat),
        xtx_inv=xtx_inv,
        ci_asymptotic=ci,
        confidence=confidence,
    )


def bootstrap_ci(
    noisy: NoisySufficientStatistic,
    fit: ScaledFit,
    b_replicates: int,
    rng: RandomSource,
    confidence: float = 0.95,
    score_scale: str = "nhat",
) -> BootstrapResult:
    """Parametric bootstrap over the known noise law.

    Each replicate draws a fresh matrix noise h from the mechanism's law
    and a synthetic score vector u ~ N(0, n_hat * sigma2 * X^T X), then maps

        beta_b = (X^T X)^-1 (X^T X - h[:p, :p]) beta
                 + (X^T X)^-1 (u + h[:p, p])

    and the interval takes per-coefficient empirical quantiles at
    (1 -+ confidence) / 2. The n_hat factor in the score covariance is kept
    exactly as stated by the method; score_scale="classical" drops it
    (giving u the textbook sampling covariance sigma2 * X^T X), which is the
    calibration used by the noiseless-oracle tests.
    """
    if b_replicates < 100:
        raise InvalidParameterError(
            f"bootstrap needs at least 100 replicates, got {b_replicates}"
        )
    if score_scale not in ("nhat", "classical"):
        raise InvalidParameterError(f"unknown score_scale {score_scale!r}")
    if not (0.0 < confidence < 1.0):
        raise InvalidParameterError(f"confidence must lie in (0, 1), got {confidence}")
    xtx, _, _ = _partition(noisy)
    p = xtx.shape[0]
    try:
        factor = cho_factor(xtx, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError("X^T X block is singular; regularize first") from exc
    mult = fit.n_hat if score_scale == "nhat" else 1.0
    score_cov = mult * fit.sigma2 * xtx
    score_chol = np.linalg.cholesky(score_cov)
    gen = rng.generator()
    h = noisy.noise_model.sample_batch(b_replicates, gen)
    u = gen.standard_normal((b_replicates, p)) @ score_chol.T
    rhs = u + h[:, :p, p] - h[:, :p, :p] @ fit.beta
    draws = fit.beta + cho_solve(factor, rhs.T).T
    alpha = 1.0 - confidence
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0)
    return BootstrapResult(draws=draws, ci=np.column_stack((lo, hi)), confidence=confidence)
