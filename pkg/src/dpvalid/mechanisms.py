"""Core noise mechanisms: Laplace, Gaussian (classical and analytic), and
the exponential mechanism, plus the Renyi calibration used for vectors of
counting queries.

All mechanisms take an explicit :class:`~dpvalid.rng.RandomSource`; calling a
mechanism twice with the same source yields bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr
from scipy.optimize import minimize_scalar

from .errors import CalibrationError, InvalidParameterError
from .params import GlobalSensitivity, PrivacyParams
from .rng import RandomSource

__all__ = [
    "ScoredCandidate",
    "laplace_scale",
    "laplace_mechanism",
    "gaussian_sigma",
    "analytic_gaussian_sigma",
    "gaussian_mechanism",
    "renyi_sigma_for_counts",
    "renyi_counts_calibration",
    "exponential_mechanism",
]


@dataclass(frozen=True)
class ScoredCandidate:
    """A candidate output with its data-dependent utility score."""

    value: object
    utility: float


def laplace_scale(sens: GlobalSensitivity, epsilon: float) -> float:
    """Laplace noise scale b = Delta_1 / epsilon.

    Parameters
    ----------
    sens : GlobalSensitivity
        Must carry a positive l1 sensitivity.
    epsilon : float
        Pure-DP privacy parameter, positive.

    Returns
    -------
    float
        The scale of the zero-centered Laplace noise achieving epsilon-DP.

    Raises
    ------
    InvalidParameterError
        If the sensitivity or epsilon is nonpositive.
    """
    l1 = sens.require_l1()
    if l1 <= 0:
        raise InvalidParameterError(f"l1 sensitivity must be positive, got {l1}")
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise InvalidParameterError(f"epsilon must be positive and finite, got {epsilon}")
    return l1 / epsilon


def laplace_mechanism(
    values: np.ndarray | float,
    sens: GlobalSensitivity,
    epsilon: float,
    rng: RandomSource,
) -> np.ndarray:
    """Add i.i.d. Laplace(Delta_1 / epsilon) noise to each coordinate.

    A zero l1 sensitivity is treated as the degenerate noiseless limit and
    returns the input unchanged.
    """
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    l1 = sens.require_l1()
    if l1 == 0:
        return arr.copy()
    b = laplace_scale(sens, epsilon)
    gen = rng.generator()
    return arr + gen.laplace(0.0, b, size=arr.shape)


def gaussian_sigma(sens: GlobalSensitivity, params: PrivacyParams) -> float:
    """Classical Gaussian calibration sigma = (Delta_2/eps) * sqrt(2 ln(1.25/delta)).

    Valid only for epsilon <= 1; beyond that the closed form is not a DP
    guarantee and the analytic calibration must be used instead.
    """
    l2 = sens.require_l2()
    if l2 <= 0:
        raise InvalidParameterError(f"l2 sensitivity must be positive, got {l2}")
    if not (0.0 < params.delta < 1.0):
        raise InvalidParameterError(f"delta must lie in (0, 1), got {params.delta}")
    if params.epsilon > 1.0:
        raise CalibrationError(
            f"classical Gaussian calibration is only valid for epsilon <= 1 "
            f"(got {params.epsilon}); use analytic_gaussian_sigma"
        )
    return (l2 / params.epsilon) * math.sqrt(2.0 * math.log(1.25 / params.delta))


def _gaussian_delta(sigma: float, epsilon: float, l2: float) -> float:
    """Exact delta achieved by Gaussian noise of the given sigma."""
    a = l2 / (2.0 * sigma)
    b = epsilon * sigma / l2
    return float(ndtr(a - b) - math.exp(epsilon) * ndtr(-a - b))


def analytic_gaussian_sigma(
    sens: GlobalSensitivity, params: PrivacyParams, rel_tol: float = 1e-9
) -> float:
    """Minimal sigma whose exact Gaussian privacy curve meets (epsilon, delta).

    Solves Phi(Delta/(2 sigma) - eps sigma/Delta)
    - e^eps * Phi(-Delta/(2 sigma) - eps sigma/Delta) <= delta
    by bisection on sigma (the left side is decreasing in sigma). Works for
    every positive epsilon, unlike the classical closed form.
    """
    l2 = sens.require_l2()
    if l2 <= 0:
        raise InvalidParameterError(f"l2 sensitivity must be positive, got {l2}")
    if not (0.0 < params.delta < 1.0):
        raise InvalidParameterError(f"delta must lie in (0, 1), got {params.delta}")
    eps, delta = params.epsilon, params.delta

    hi = l2  # grow until feasible
    for _ in range(200):
        if _gaussian_delta(hi, eps, l2) <= delta:
            break
        hi *= 2.0
    else:
        raise CalibrationError("failed to bracket the analytic Gaussian sigma")
    lo = 0.0
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= 0.0 or _gaussian_delta(mid, eps, l2) > delta:
            lo = mid
        else:
            hi = mid
    return hi


def gaussian_mechanism(
    values: np.ndarray | float,
    sens: GlobalSensitivity,
    params: PrivacyParams,
    rng: RandomSource,
    calibration: str = "analytic",
) -> np.ndarray:
    """Add i.i.d. Gaussian noise calibrated to (epsilon, delta).

    calibration is "analytic" (default, valid for all epsilon) or
    "classical" (epsilon <= 1 only).
    """
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if calibration == "analytic":
        sigma = analytic_gaussian_sigma(sens, params)
    elif calibration == "classical":
        sigma = gaussian_sigma(sens, params)
    else:
        raise InvalidParameterError(f"unknown calibration {calibration!r}")
    gen = rng.generator()
    return arr + gen.normal(0.0, sigma, size=arr.shape)


@dataclass(frozen=True)
class RenyiCountsCalibration:
    """Resolved Renyi calibration for m counting queries."""

    sigma: float
    alpha: float
    epsilon_at_alpha: float


def renyi_counts_calibration(m: int, params: PrivacyParams) -> RenyiCountsCalibration:
    """Minimal sigma so that m unit-sensitivity Gaussian counts compose to
    (epsilon, delta) through the Renyi divergence ledger.

    For each sigma the best conversion is
        min over alpha > 1 of   m * alpha / (2 sigma^2) + ln(1/delta) / (alpha - 1)
    and we pick the smallest sigma whose minimum is <= epsilon. The inner
    minimization is done numerically and the optimizing alpha is reported so
    runs can document it.
    """
    if m < 1:
        raise InvalidParameterError(f"m must be a positive integer, got {m}")
    if not (0.0 < params.delta < 1.0):
        raise InvalidParameterError(f"delta must lie in (0, 1), got {params.delta}")
    eps, delta = params.epsilon, params.delta
    log1d = math.log(1.0 / delta)

    def best_eps(sigma: float) -> tuple[float, float]:
        rho = m / (2.0 * sigma * sigma)

        def f(alpha: float) -> float:
            return rho * alpha + log1d / (alpha - 1.0)

        # bracket the convex objective around its stationary point
        guess = 1.0 + math.sqrt(log1d / rho) if rho > 0 else 2.0
        res = minimize_scalar(f, bounds=(1.0 + 1e-9, max(10.0 * guess, 4.0)), method="bounded")
        return float(res.fun), float(res.x)

    # bracket sigma, then bisect
    lo, hi = 1e-9, math.sqrt(m)
    for _ in range(200):
        if best_eps(hi)[0] <= eps:
            break
        hi *= 2.0
    else:
        raise CalibrationError("failed to bracket the Renyi counts sigma")
    while hi - lo > 1e-9 * hi:
        mid = 0.5 * (lo + hi)
        if best_eps(mid)[0] > eps:
            lo = mid
        else:
            hi = mid
    achieved, alpha = best_eps(hi)
    return RenyiCountsCalibration(sigma=hi, alpha=alpha, epsilon_at_alpha=achieved)


def renyi_sigma_for_counts(m: int, params: PrivacyParams) -> float:
    """Convenience wrapper returning only the sigma from
    :func:`renyi_counts_calibration`."""
    return renyi_counts_calibration(m, params).sigma


def exponential_mechanism(
    candidates: Sequence[ScoredCandidate],
    utility_sensitivity: float,
    epsilon: float,
    rng: RandomSource,
) -> ScoredCandidate:
    """Select one candidate with probability proportional to
    exp(epsilon * utility / (2 * Delta_1(utility))).

    Weights are computed after subtracting the maximum utility, so large
    scores cannot overflow. Sampling inverts the cumulative distribution;
    when the uniform draw lands exactly on a boundary the lower index wins.
    """
    if len(candidates) == 0:
        raise InvalidParameterError("candidate set must be nonempty")
    if not (utility_sensitivity > 0) or not math.isfinite(utility_sensitivity):
        raise InvalidParameterError(
            f"utility sensitivity must be positive and finite, got {utility_sensitivity}"
        )
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise InvalidParameterError(f"epsilon must be positive and finite, got {epsilon}")
    util = np.asarray([c.utility for c in candidates], dtype=float)
    if not np.all(np.isfinite(util)):
        raise InvalidParameterError("candidate utilities must be finite")
    logw = (epsilon / (2.0 * utility_sensitivity)) * (util - util.max())
    weights = np.exp(logw)
    cdf = np.cumsum(weights)
    gen = rng.generator()
    u = gen.uniform(0.0, cdf[-1])
    idx = int(np.searchsorted(cdf, u, side="left"))
    idx = min(idx, len(candidates) - 1)
    return candidates[idx]
