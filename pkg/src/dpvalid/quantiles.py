"""Differentially private quantiles.

Two routes are provided: the exponential-mechanism sampler over the
piecewise-constant output density induced by the sorted data, and a
smooth-sensitivity order statistic with Laplace noise. A multi-quantile
wrapper splits budget either as pure DP (epsilon / m each) or through a
zero-concentrated composition of the per-quantile mechanisms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .accountant import ChargeRecord
from .columns import BoundedColumn
from .errors import InsufficientDataError, InvalidParameterError
from .params import PrivacyParams
from .rng import RandomSource

__all__ = [
    "QuantileRequest",
    "QuantileResult",
    "dp_quantile_exp",
    "dp_quantiles",
    "dp_quantile_smooth",
    "smooth_sensitivity_order_stat",
    "quantile_interval_masses",
]


@dataclass(frozen=True)
class QuantileRequest:
    """Probabilities to estimate plus the budget-splitting mode."""

    probabilities: tuple[float, ...]
    mode: str = "pure-split"  # "pure-split" | "zcdp-compose"

    def __post_init__(self):
        probs = tuple(float(q) for q in self.probabilities)
        object.__setattr__(self, "probabilities", probs)
        if len(probs) == 0:
            raise InvalidParameterError("need at least one probability")
        for q in probs:
            if not (0.0 < q < 1.0):
                raise InvalidParameterError(f"quantile probabilities must lie in (0, 1), got {q}")
        if self.mode not in ("pure-split", "zcdp-compose"):
            raise InvalidParameterError(f"unknown quantile mode {self.mode!r}")


class QuantileResult(NamedTuple):
    values: tuple[float, ...]
    per_quantile_epsilon: float
    charge: ChargeRecord


def _check_nonempty(column: BoundedColumn) -> None:
    if column.n == 0:
        raise InsufficientDataError("quantile queries need a nonempty column")


def quantile_interval_masses(
    sorted_values: np.ndarray, lower: float, upper: float, q: float, epsilon: float
) -> tuple[np.ndarray, np.ndarray]:
    """Interval endpoints and unnormalized masses of the output density.

    The sorted data split [lower, upper] into n + 1 intervals; any point in
    interval i has i data values strictly below it, giving it utility
    u_i = -|i - q * (n + 1)| (the classical quantile position). The mass of
    an interval is its length times exp(epsilon * u_i / 2), computed after
    subtracting the maximal utility for stability. Zero-length intervals
    (tied data points) carry zero mass.
    """
    n = sorted_values.shape[0]
    endpoints = np.concatenate(([lower], sorted_values, [upper]))
    lengths = np.diff(endpoints)
    ranks = np.arange(n + 1, dtype=float)
    utilities = -np.abs(ranks - q * (n + 1))
    logw = (epsilon / 2.0) * (utilities - utilities.max())
    masses = lengths * np.exp(logw)
    return endpoints, masses


def dp_quantile_exp(
    column: BoundedColumn,
    q: float,
    epsilon: float,
    rng: RandomSource,
) -> float:
    """Single quantile via the exponential mechanism over intervals.

    Density is piecewise constant between sorted data points; an interval is
    chosen by inverting the cumulative mass (boundary ties resolve to the
    lower index) and the output is uniform inside it. The utility has unit
    sensitivity under add/remove-one-record, so the draw is epsilon-DP.
    """
    if not (0.0 < q < 1.0):
        raise InvalidParameterError(f"q must lie in (0, 1), got {q}")
    if not (epsilon > 0) or not math.isfinite(epsilon):
        raise InvalidParameterError(f"epsilon must be positive and finite, got {epsilon}")
    _check_nonempty(column)
    sorted_vals = np.sort(column.values)
    endpoints, masses = quantile_interval_masses(
        sorted_vals, column.lower, column.upper, q, epsilon
    )
    cdf = np.cumsum(masses)
    gen = rng.generator()
    u = gen.uniform(0.0, cdf[-1])
    idx = int(np.searchsorted(cdf, u, side="left"))
    idx = min(idx, masses.shape[0] - 1)
    return float(gen.uniform(endpoints[idx], endpoints[idx + 1]))


def _zcdp_split_epsilon(m: int, params: PrivacyParams) -> float:
    """Largest per-quantile epsilon0 whose m-fold zCDP composition fits.

    Each exponential-mechanism draw at epsilon0 costs rho0 = epsilon0^2 / 8;
    m draws compose to m * rho0, which converts back to approximate DP as
    epsilon(rho) = rho + 2 sqrt(rho ln(1/delta)). Solving epsilon(m rho0) =
    epsilon for rho0 gives the budget below. m = 1 needs no composition at
    all, so it short-circuits to the full epsilon.
    """
    if m == 1:
        return params.epsilon
    if not (0.0 < params.delta < 1.0):
        raise InvalidParameterError("zcdp-compose mode needs delta in (0, 1)")
    log1d = math.log(1.0 / params.delta)
    sqrt_rho = math.sqrt(log1d + params.epsilon) - math.sqrt(log1d)
    rho_total = sqrt_rho * sqrt_rho
    return min(params.epsilon, math.sqrt(8.0 * rho_total / m))


def dp_quantiles(
    column: BoundedColumn,
    req: QuantileRequest,
    params: PrivacyParams,
    rng: RandomSource,
    query_id: str = "quantiles",
) -> QuantileResult:
    """m quantiles, each via dp_quantile_exp at a per-quantile epsilon0.

    pure-split uses epsilon0 = epsilon / m (plain sequential composition);
    zcdp-compose converts each draw to zero-concentrated DP and picks the
    largest epsilon0 whose composed cost still converts into the requested
    (epsilon, delta). Outputs are sorted nondecreasing before return, which
    is pure post-processing. One ChargeRecord at the caller's (epsilon,
    delta) is emitted.
    """
    _check_nonempty(column)
    m = len(req.probabilities)
    if req.mode == "pure-split":
        eps0 = params.epsilon / m
    else:
        eps0 = _zcdp_split_epsilon(m, params)
    values = [
        dp_quantile_exp(column, q, eps0, rng.child("quantile", i))
        for i, q in enumerate(req.probabilities)
    ]
    ordered = tuple(float(v) for v in np.sort(values))
    charge = ChargeRecord(query_id=query_id, params=params)
    return QuantileResult(values=ordered, per_quantile_epsilon=eps0, charge=charge)


def smooth_sensitivity_order_stat(
    sorted_values: np.ndarray, lower: float, upper: float, m_index: int, beta: float
) -> float:
    """beta-smooth sensitivity of the m-th order statistic (1-based).

    S* = max over k >= 0 of exp(-beta k) * LS_k, where the distance-k local
    sensitivity is the widest gap the statistic can be pushed across by k
    edits: LS_k = max over t in [0, k+1] of x[m+t] - x[m+t-k-1], reading
    indexes below 1 as the lower bound and above n as the upper bound.
    The scan stops once the remaining envelope exp(-beta k) * (upper-lower)
    cannot beat the best term found.
    """
    n = sorted_values.shape[0]
    if not (1 <= m_index <= n):
        raise InvalidParameterError(f"order statistic index {m_index} out of range 1..{n}")
    if not (beta > 0):
        raise InvalidParameterError(f"beta must be positive, got {beta}")
    width = upper - lower

    def padded(idx: np.ndarray) -> np.ndarray:
        out = np.empty(idx.shape, dtype=float)
        out[idx <= 0] = lower
        out[idx >= n + 1] = upper
        inside = (idx >= 1) & (idx <= n)
        out[inside] = sorted_values[idx[inside] - 1]
        return out

    best = 0.0
    for k in range(0, n + 1):
        envelope = math.exp(-beta * k) * width
        if envelope <= best:
            break
        t = np.arange(0, k + 2)
        hi = padded(m_index + t)
        lo = padded(m_index + t - k - 1)
        ls_k = float(np.max(hi - lo))
        best = max(best, math.exp(-beta * k) * ls_k)
    return best


def dp_quantile_smooth(
    column: BoundedColumn,
    q: float,
    params: PrivacyParams,
    rng: RandomSource,
    query_id: str = "quantile-smooth",
) -> tuple[float, ChargeRecord]:
    """Order statistic plus Laplace noise scaled by smooth sensitivity.

    The target index is ceil(q * n) clamped to [1, n]. With
    beta = epsilon / (2 ln(1/delta)) and S* the beta-smooth sensitivity, the
    released value is x_(m) + Laplace(2 S* / epsilon), an (epsilon, delta)
    guarantee. Constant columns give S* exponentially small in n, so the
    answer is almost exact.
    """
    if not (0.0 < q < 1.0):
        raise InvalidParameterError(f"q must lie in (0, 1), got {q}")
    if not (0.0 < params.delta < 1.0):
        raise InvalidParameterError("smooth-sensitivity quantiles need delta in (0, 1)")
    _check_nonempty(column)
    sorted_vals = np.sort(column.values)
    n = sorted_vals.shape[0]
    m_index = min(max(int(math.ceil(q * n)), 1), n)
    beta = params.epsilon / (2.0 * math.log(1.0 / params.delta))
    s_star = smooth_sensitivity_order_stat(sorted_vals, column.lower, column.upper, m_index, beta)
    gen = rng.generator()
    noise = gen.laplace(0.0, 2.0 * s_star / params.epsilon) if s_star > 0 else 0.0
    charge = ChargeRecord(query_id=query_id, params=params)
    # clamping to the declared bounds is post-processing, so it is free
    value = min(max(float(sorted_vals[m_index - 1] + noise), column.lower), column.upper)
    return value, charge
