"""End-to-end DP regression: rescale, perturb, regularize, fit, scale back.

dp_regression is the single entry point the server and harness call. It
spends one budget charge for the whole pipeline and returns both interval
families (asymptotic and bootstrap) in original units, together with the
mechanism and regularization metadata needed to audit the release.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from ..accountant import ChargeRecord
from ..errors import InvalidParameterError
from ..params import PrivacyParams
from ..rng import RandomSource
from .design import DesignSpec, ScaledDesign, compute_S, rescale_design
from .fit import BootstrapResult, ScaledFit, bootstrap_ci, fit_plugin
from .perturb import NoisySufficientStatistic, perturb_S
from .plan import sensitivity_plan
from .regularize import regularize


@dataclass(frozen=True)
class RegressionOptions:
    """Tuning knobs for dp_regression; defaults follow the evaluation setup."""

    confidence: float = 0.95
    b_replicates: int = 1000
    p0: float = 0.99
    n_sims: int = 1000
    score_scale: str = "nhat"  # "nhat" | "classical", see bootstrap_ci
    noise_off: bool = False  # testing hook: zero noise, identical plumbing
    n_hat: float | None = None  # required for no-intercept designs


@dataclass(frozen=True)
class RegressionEstimate:
    """Coefficients and both CI families, in original data units."""

    method: str
    coef_names: tuple[str, ...]
    beta: np.ndarray
    sigma2: float
    n_hat: float
    ci_asymptotic: np.ndarray  # p x 2
    ci_bootstrap: np.ndarray | None  # p x 2, None for methods without one
    confidence: float
    charge: ChargeRecord
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for ci in (self.ci_asymptotic, self.ci_bootstrap):
            if ci is not None and np.any(ci[:, 0] > ci[:, 1]):
                raise InvalidParameterError("interval lower endpoints must not exceed uppers")

    def to_json(self) -> dict:
        out = {
            "method": self.method,
            "coefficients": [
                {
                    "name": name,
                    "estimate": float(self.beta[j]),
                    "ci_asymptotic": [float(v) for v in self.ci_asymptotic[j]],
                }
                for j, name in enumerate(self.coef_names)
            ],
            "sigma2": self.sigma2,
            "n_hat": self.n_hat,
            "confidence": self.confidence,
            "metadata": self.metadata,
        }
        if self.ci_bootstrap is not None:
            for j, entry in enumerate(out["coefficients"]):
                entry["ci_bootstrap"] = [float(v) for v in self.ci_bootstrap[j]]
        return out


def _scale_back_asymptotic(
    scaled: ScaledDesign, fit: ScaledFit
) -> tuple[np.ndarray, np.ndarray]:
    """Map the scaled point estimate and asymptotic CI to original units.

    The coefficient map is affine, beta = T b + c, so the coefficient
    covariance transports as T cov T^T and intervals are rebuilt from the
    transported standard errors rather than by mapping endpoints (the
    intercept row of T mixes coefficients, so endpoint mapping would be
    wrong whenever any predictor has a nonzero lower bound).
    """
    T, c = scaled.beta_transform()
    beta = T @ fit.beta + c
    cov = fit.sigma2 * (T @ fit.xtx_inv @ T.T)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    z = float(norm.ppf((1.0 + fit.confidence) / 2.0))
    ci = np.column_stack((beta - z * se, beta + z * se))
    return beta, ci


def _scale_back_bootstrap(
    scaled: ScaledDesign, boot: BootstrapResult
) -> np.ndarray:
    """Per-draw scale-back, then fresh per-coefficient quantiles."""
    T, c = scaled.beta_transform()
    draws = boot.draws @ T.T + c
    alpha = 1.0 - boot.confidence
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0)
    return np.column_stack((lo, hi))


def _coef_names(scaled: ScaledDesign) -> tuple[str, ...]:
    return tuple(info.name for info in scaled.columns[:-1])


def dp_regression(
    spec: DesignSpec,
    mechanism: str,
    params: PrivacyParams,
    rng: RandomSource,
    options: RegressionOptions = RegressionOptions(),
    query_id: str = "regression",
) -> RegressionEstimate:
    """Run the full noisy-sufficient-statistic pipeline once.

    One charge covers the whole release: the matrix perturbation is the only
    step that touches data, and everything after it (regularization, fit,
    bootstrap, scale-back) is post-processing of the released matrix.
    """
    scaled = rescale_design(spec)
    S = compute_S(scaled)
    plan = sensitivity_plan(scaled.columns)
    noisy = perturb_S(
        S, plan, mechanism, params, rng.child("perturb"), noise_off=options.noise_off
    )
    reg = regularize(noisy, rng.child("regularize"), p0=options.p0, n_sims=options.n_sims)
    fit = fit_plugin(reg, confidence=options.confidence, n_hat=options.n_hat)
    boot = bootstrap_ci(
        reg,
        fit,
        options.b_replicates,
        rng.child("bootstrap"),
        confidence=options.confidence,
        score_scale=options.score_scale,
    )
    beta, ci_asym = _scale_back_asymptotic(scaled, fit)
    ci_boot = _scale_back_bootstrap(scaled, boot)
    charge = ChargeRecord(query_id=query_id, params=params)
    metadata = dict(reg.metadata)
    metadata.update(
        {
            "mechanism": mechanism,
            "regularization_r": reg.r,
            "pre_censored": reg.pre_censored,
            "noise_off": options.noise_off,
            "score_scale": options.score_scale,
            "b_replicates": options.b_replicates,
        }
    )
    return RegressionEstimate(
        method=mechanism,
        coef_names=_coef_names(scaled),
        beta=beta,
        sigma2=fit.sigma2,
        n_hat=fit.n_hat,
        ci_asymptotic=ci_asym,
        ci_bootstrap=ci_boot,
        confidence=options.confidence,
        charge=charge,
        metadata=metadata,
    )


def bhm_regression(
    spec: DesignSpec,
    mechanism: str,
    params: PrivacyParams,
    k_draws: int,
    rng: RandomSource,
    options: RegressionOptions = RegressionOptions(),
    query_id: str = "regression-bhm",
) -> RegressionEstimate:
    """Replicate-and-average regression: K noisy S draws at (eps/K, delta/K).

    Each draw runs the standard pipeline (perturb, regularize, fit) on its
    own budget share and RNG stream; the sampling distribution of the
    coefficients is then approximated by a multivariate normal with the
    K-sample mean and covariance, and CIs come from that normal's marginals.
    A draw that lands singular is regularized like any other, never dropped,
    so the replicate count is always exactly K.
    """
    if k_draws < 2:
        raise InvalidParameterError(f"replicate-and-average needs K >= 2, got {k_draws}")
    share = PrivacyParams(params.epsilon / k_draws, params.delta / k_draws)
    scaled = rescale_design(spec)
    S = compute_S(scaled)
    plan = sensitivity_plan(scaled.columns)
    T, c = scaled.beta_transform()
    betas = np.empty((k_draws, scaled.p))
    n_hats = np.empty(k_draws)
    sigma2s = np.empty(k_draws)
    for i in range(k_draws):
        child = rng.child("bhm", i)
        noisy = perturb_S(
            S, plan, mechanism, share, child.child("perturb"), noise_off=options.noise_off
        )
        reg = regularize(
            noisy, child.child("regularize"), p0=options.p0, n_sims=options.n_sims
        )
        fit = fit_plugin(reg, confidence=options.confidence, n_hat=options.n_hat)
        betas[i] = T @ fit.beta + c
        n_hats[i] = fit.n_hat
        sigma2s[i] = fit.sigma2
    point = betas.mean(axis=0)
    cov = np.cov(betas, rowvar=False, ddof=1).reshape(scaled.p, scaled.p)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    z = float(norm.ppf((1.0 + options.confidence) / 2.0))
    ci = np.column_stack((point - z * se, point + z * se))
    charge = ChargeRecord(query_id=query_id, params=params)
    return RegressionEstimate(
        method="bhm",
        coef_names=_coef_names(scaled),
        beta=point,
        sigma2=float(sigma2s.mean()),
        n_hat=float(n_hats.mean()),
        ci_asymptotic=ci,
        ci_bootstrap=None,
        confidence=options.confidence,
        charge=charge,
        metadata={
            "mechanism": mechanism,
            "k_draws": k_draws,
            "per_draw_epsilon": share.epsilon,
            "per_draw_delta": share.delta,
            "noise_off": options.noise_off,
        },
    )
