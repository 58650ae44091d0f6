"""Differentially private histograms over bounded columns."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .accountant import ChargeRecord
from .columns import BoundedColumn
from .errors import InvalidParameterError, UndefinedMetricError
from .mechanisms import renyi_counts_calibration
from .params import PrivacyParams
from .rng import RandomSource


@dataclass(frozen=True)
class HistogramSpec:
    """Strictly increasing bin edges partitioning the column's bounds."""

    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        object.__setattr__(self, "edges", edges)
        if edges.ndim != 1 or edges.shape[0] < 2:
            raise InvalidParameterError("need at least two bin edges")
        if not np.all(np.diff(edges) > 0):
            raise InvalidParameterError("bin edges must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return int(self.edges.shape[0] - 1)

    @staticmethod
    def regular(lower: float, upper: float, n_bins: int) -> "HistogramSpec":
        return HistogramSpec(np.linspace(lower, upper, n_bins + 1))

    def covers(self, column: BoundedColumn) -> bool:
        return self.edges[0] <= column.lower and self.edges[-1] >= column.upper


@dataclass(frozen=True)
class HistogramResult:
    """Raw noisy counts plus a nonnegativity-clamped post-processed copy."""

    raw: np.ndarray
    postprocessed: np.ndarray
    true_counts: np.ndarray  # held for harness use; never crosses the server boundary
    charge: ChargeRecord
    mechanism: str
    noise_scale: float
    renyi_alpha: float | None = None


def dp_histogram(
    column: BoundedColumn,
    spec: HistogramSpec,
    params: PrivacyParams,
    mechanism: str,
    rng: RandomSource,
    query_id: str = "histogram",
) -> HistogramResult:
    """Noisy bin counts under the requested mechanism.

    "laplace" adds Laplace(1/epsilon) per bin: each count has unit
    sensitivity and bins cover disjoint records, so the whole vector is
    epsilon-DP (delta is not consumed). "gaussian" calibrates one sigma for
    the m bin counts through the Renyi ledger at (epsilon, delta).

    One ChargeRecord is emitted either way, priced exactly at the caller's
    requested (epsilon, delta).
    """
    if not spec.covers(column):
        raise InvalidParameterError(
            f"histogram edges [{spec.edges[0]}, {spec.edges[-1]}] do not cover "
            f"column bounds [{column.lower}, {column.upper}]"
        )
    counts, _ = np.histogram(column.values, bins=spec.edges)
    counts = counts.astype(float)
    gen = rng.generator()
    alpha = None
    if mechanism == "laplace":
        scale = 1.0 / params.epsilon
        raw = counts + gen.laplace(0.0, scale, size=counts.shape)
    elif mechanism == "gaussian":
        if not (0.0 < params.delta < 1.0):
            raise InvalidParameterError("gaussian histograms need delta in (0, 1)")
        cal = renyi_counts_calibration(spec.n_bins, params)
        scale = cal.sigma
        alpha = cal.alpha
        raw = counts + gen.normal(0.0, scale, size=counts.shape)
    else:
        raise InvalidParameterError(f"unknown histogram mechanism {mechanism!r}")
    charge = ChargeRecord(query_id=query_id, params=params)
    return HistogramResult(
        raw=raw,
        postprocessed=np.maximum(raw, 0.0),
        true_counts=counts,
        charge=charge,
        mechanism=mechanism,
        noise_scale=scale,
        renyi_alpha=alpha,
    )


class CumulativeErrorMetrics(NamedTuple):
    max_relative: float
    mean_relative: float


def cumulative_error_metrics(
    true_counts: np.ndarray, noisy_counts: np.ndarray
) -> CumulativeErrorMetrics:
    """Worst and average prefix-sum error relative to the grand total.

    For each prefix k the error is |sum(noisy[:k]) - sum(true[:k])| divided
    by the total true count; the metrics are the max and mean over prefixes.
    """
    t = np.asarray(true_counts, dtype=float)
    s = np.asarray(noisy_counts, dtype=float)
    if t.shape != s.shape or t.ndim != 1:
        raise InvalidParameterError("count vectors must be one-dimensional and equal length")
    total = t.sum()
    if total <= 0:
        raise UndefinedMetricError("cumulative error is undefined for an empty histogram")
    diff = np.abs(np.cumsum(s) - np.cumsum(t)) / total
    return CumulativeErrorMetrics(float(diff.max()), float(diff.mean()))
