"""Utility metrics comparing sanitized estimates against confidential ones.

Interval overlap, width ratio, sign/significance agreement, and error
summaries. Everything here is pure arithmetic on released numbers; nothing
touches raw data, so no metric carries a privacy charge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UndefinedMetricError


def _unpack(interval: Sequence[float], label: str) -> tuple[float, float]:
    lo, up = float(interval[0]), float(interval[1])
    if not (math.isfinite(lo) and math.isfinite(up)):
        raise UndefinedMetricError(f"{label} interval has non-finite endpoints ({lo}, {up})")
    if up - lo <= 0.0:
        raise UndefinedMetricError(f"{label} interval is degenerate (width {up - lo})")
    return lo, up


def ci_overlap(original: Sequence[float], noisy: Sequence[float]) -> float:
    """Average two-sided interval-overlap score.

    With intersection length I = min(uppers) - max(lowers), possibly
    negative, the score is (I / original width + I / noisy width) / 2.
    Identical intervals score exactly 1, nested or shifted intervals score
    below 1, and disjoint intervals go negative and keep falling as the gap
    grows. Not symmetric in its arguments unless the widths happen to agree.
    """
    lo_o, up_o = _unpack(original, "original")
    lo_s, up_s = _unpack(noisy, "noisy")
    inter = min(up_o, up_s) - max(lo_o, lo_s)
    return 0.5 * (inter / (up_o - lo_o) + inter / (up_s - lo_s))


def ci_ratio(original: Sequence[float], noisy: Sequence[float]) -> float:
    """Noisy interval width divided by original interval width."""
    lo_o, up_o = _unpack(original, "original")
    lo_s, up_s = _unpack(noisy, "noisy")
    return (up_s - lo_s) / (up_o - lo_o)


def sign_significance_match(
    original_estimate: float,
    original_ci: Sequence[float],
    noisy_estimate: float,
    noisy_ci: Sequence[float],
) -> tuple[bool, bool]:
    """Agreement of coefficient sign and of CI-excludes-zero status.

    A zero estimate has sign 0 and therefore mismatches either strict sign.
    Significance compares whether 0 lies inside each closed interval.
    """
    sign = bool(np.sign(original_estimate) == np.sign(noisy_estimate))
    zero_in_orig = original_ci[0] <= 0.0 <= original_ci[1]
    zero_in_noisy = noisy_ci[0] <= 0.0 <= noisy_ci[1]
    return sign, zero_in_orig == zero_in_noisy


@dataclass(frozen=True)
class ErrorSummary:
    rmse: float
    bias: float
    scaled_bias: float
    scaled_bias_metric: str  # "relative_bias", or "absolute_bias" at zero truth


def rmse_bias(true_value: float, noisy_sample: Sequence[float]) -> ErrorSummary:
    """Root mean squared error, bias, and a scaled bias for a noisy sample.

    The scaled bias divides by |true value|; when the truth is exactly zero
    that division is meaningless, so the summary switches to the raw bias
    under the distinct metric name "absolute_bias" instead of hiding the row.
    """
    sample = np.asarray(noisy_sample, dtype=float)
    if sample.size == 0:
        raise UndefinedMetricError("empty noisy sample")
    errors = sample - true_value
    rmse = float(np.sqrt(np.mean(errors**2)))
    bias = float(np.mean(errors))
    if true_value == 0.0:
        return ErrorSummary(rmse, bias, bias, "absolute_bias")
    return ErrorSummary(rmse, bias, bias / abs(true_value), "relative_bias")


def relative_error(true_value: float, estimate: float) -> float:
    """|estimate - truth| / |truth|; undefined at zero truth."""
    if true_value == 0.0:
        raise UndefinedMetricError("relative error is undefined at zero truth")
    return abs(estimate - true_value) / abs(true_value)
