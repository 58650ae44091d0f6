"""Differentially private means with confidence intervals.

Three estimators are provided. NOISYVAR privatizes the sample mean and
sample variance separately and builds the interval by Monte Carlo from the
combined noise-plus-sampling distribution. NOISYMAD swaps the variance for
a noisy mean absolute deviation around the released mean, rescaled for
normal consistency. The replicate method averages several noisy means whose
budgets compose through zero-concentrated DP, with a normal interval from
the replicate spread.

The sample size n is treated as public throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .accountant import ChargeRecord
from .columns import BoundedColumn
from .errors import InsufficientDataError, InvalidParameterError
from .params import PrivacyParams, pure_dp_to_zcdp, zcdp_to_approx_dp
from .rng import RandomSource

_VAR_FLOOR_FRAC = 1e-12  # floor noisy variance at this fraction of width^2
_MC_DRAWS = 10_000


@dataclass(frozen=True)
class MeanCiResult:
    """Point estimate with a confidence interval and its charge."""

    point: float
    ci_lower: float
    ci_upper: float
    confidence: float
    method: str
    charge: ChargeRecord
    sigma_tilde: float  # the privatized spread estimate backing the interval

    def __post_init__(self):
        if not (self.ci_lower <= self.ci_upper):
            raise InvalidParameterError("interval endpoints are out of order")

    @property
    def width(self) -> float:
        return self.ci_upper - self.ci_lower


def _validate_mean_args(column: BoundedColumn, confidence: float) -> None:
    if column.n == 0:
        raise InsufficientDataError("mean queries need a nonempty column")
    if not (0.0 < confidence < 1.0):
        raise InvalidParameterError(f"confidence must lie in (0, 1), got {confidence}")


def _mc_interval(
    point: float,
    sigma_tilde: float,
    n: int,
    laplace_scale: float,
    confidence: float,
    gen: np.random.Generator,
    draws: int = _MC_DRAWS,
) -> tuple[float, float]:
    """Quantiles of Normal(0, sigma~^2/n) + Laplace(b) around the point."""
    sim = gen.normal(0.0, sigma_tilde / math.sqrt(n), size=draws)
    sim += gen.laplace(0.0, laplace_scale, size=draws)
    alpha = 1.0 - confidence
    lo, hi = np.quantile(sim, [alpha / 2.0, 1.0 - alpha / 2.0])
    return point + float(lo), point + float(hi)


def dp_mean_noisyvar(
    column: BoundedColumn,
    epsilon: float,
    confidence: float,
    rng: RandomSource,
    query_id: str = "mean-noisyvar",
    mc_draws: int = _MC_DRAWS,
) -> MeanCiResult:
    """Mean and variance each privatized with half the epsilon.

    The mean gets Laplace((U-L)/(n eps1)) noise, the sample variance gets
    Laplace((U-L)^2/(n eps2)) and is floored at a tiny positive value. The
    interval takes Monte Carlo quantiles of the sum of the sampling normal
    and the mean's Laplace noise, centered at the noisy mean.
    """
    _validate_mean_args(column, confidence)
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise InvalidParameterError(f"epsilon must be positive and finite, got {epsilon}")
    n, width = column.n, column.width
    eps1 = eps2 = epsilon / 2.0
    gen = rng.generator()
    b_mean = width / (n * eps1)
    noisy_mean = float(column.values.mean() + gen.laplace(0.0, b_mean))
    sample_var = float(column.values.var(ddof=1)) if n > 1 else 0.0
    noisy_var = sample_var + float(gen.laplace(0.0, width * width / (n * eps2)))
    noisy_var = max(noisy_var, _VAR_FLOOR_FRAC * width * width)
    lo, hi = _mc_interval(noisy_mean, math.sqrt(noisy_var), n, b_mean, confidence, gen, mc_draws)
    charge = ChargeRecord(query_id=query_id, params=PrivacyParams(epsilon, 0.0))
    return MeanCiResult(noisy_mean, lo, hi, confidence, "noisyvar", charge, math.sqrt(noisy_var))


def dp_mean_noisymad(
    column: BoundedColumn,
    epsilon: float,
    confidence: float,
    rng: RandomSource,
    query_id: str = "mean-noisymad",
    mc_draws: int = _MC_DRAWS,
) -> MeanCiResult:
    """As NOISYVAR, but the spread comes from a noisy absolute deviation.

    The deviation statistic is the average of |x - noisy_mean| clamped to
    [0, U-L]; once the noisy mean is public this is a mean of bounded values
    with global sensitivity (U-L)/n, so it takes its own Laplace charge at
    eps2. The released deviation is scaled by 1.4826 for consistency at the
    normal distribution; on long-tailed data that underestimates the SD,
    which is the documented behavior of this estimator.
    """
    _validate_mean_args(column, confidence)
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise InvalidParameterError(f"epsilon must be positive and finite, got {epsilon}")
    n, width = column.n, column.width
    eps1 = eps2 = epsilon / 2.0
    gen = rng.generator()
    b_mean = width / (n * eps1)
    noisy_mean = float(column.values.mean() + gen.laplace(0.0, b_mean))
    deviations = np.clip(np.abs(column.values - noisy_mean), 0.0, width)
    noisy_mad = float(deviations.mean() + gen.laplace(0.0, width / (n * eps2)))
    sigma_tilde = 1.4826 * max(noisy_mad, _VAR_FLOOR_FRAC * width)
    lo, hi = _mc_interval(noisy_mean, sigma_tilde, n, b_mean, confidence, gen, mc_draws)
    charge = ChargeRecord(query_id=query_id, params=PrivacyParams(epsilon, 0.0))
    return MeanCiResult(noisy_mean, lo, hi, confidence, "noisymad", charge, sigma_tilde)


def replicate_epsilon(k: int, params: PrivacyParams) -> float:
    """Per-replicate pure epsilon so k replicates compose to (epsilon, delta).

    Each replicate at eps0 costs rho0 = eps0^2 / 2 in zero-concentrated DP;
    k of them cost k rho0, which must convert back under the requested
    delta to at most the requested epsilon.
    """
    if k < 1:
        raise InvalidParameterError(f"k must be a positive integer, got {k}")
    if k == 1 and params.delta == 0.0:
        return params.epsilon
    if not (0.0 < params.delta < 1.0):
        raise InvalidParameterError("replicate composition needs delta in (0, 1)")
    log1d = math.log(1.0 / params.delta)
    sqrt_rho = math.sqrt(log1d + params.epsilon) - math.sqrt(log1d)
    rho_total = sqrt_rho * sqrt_rho
    eps0 = math.sqrt(2.0 * rho_total / k)
    # sanity: converting back must not exceed the request
    assert zcdp_to_approx_dp(pure_dp_to_zcdp(eps0), params.delta).epsilon <= params.epsilon * (1 + 1e-9) or k > 1
    return min(eps0, params.epsilon)


def dp_mean_bhm(
    column: BoundedColumn,
    params: PrivacyParams,
    k: int,
    confidence: float,
    rng: RandomSource,
    query_id: str = "mean-replicates",
) -> MeanCiResult:
    """k noisy bootstrap-replicate means averaged into one estimate.

    Each replicate resamples n rows with replacement, takes the clamped
    mean, and adds Laplace((U-L)/(n eps0)) noise at the per-replicate
    epsilon from :func:`replicate_epsilon`. The point estimate is the
    replicate average; the interval is a normal approximation using the
    replicate sample SD over sqrt(k). For k = 1 the spread of a single draw
    is undefined, so the interval degenerates to the known mechanism noise
    SD.
    """
    _validate_mean_args(column, confidence)
    if k < 1:
        raise InvalidParameterError(f"k must be a positive integer, got {k}")
    n, width = column.n, column.width
    eps0 = replicate_epsilon(k, params)
    gen = rng.generator()
    b = width / (n * eps0)
    reps = np.empty(k)
    for i in range(k):
        idx = gen.integers(0, n, size=n)
        reps[i] = column.values[idx].mean() + gen.laplace(0.0, b)
    point = float(reps.mean())
    z = _normal_quantile((1.0 + confidence) / 2.0)
    if k >= 2:
        spread = float(reps.std(ddof=1)) / math.sqrt(k)
    else:
        spread = b * math.sqrt(2.0)
    charge = ChargeRecord(query_id=query_id, params=params)
    return MeanCiResult(point, point - z * spread, point + z * spread,
                        confidence, "bhm", charge, spread * math.sqrt(n))


def _normal_quantile(p: float) -> float:
    from scipy.stats import norm

    return float(norm.ppf(p))
