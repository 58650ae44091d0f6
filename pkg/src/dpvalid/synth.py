"""Synthetic tax-return-like microdata for benchmarks.

The real evaluation data behind this kind of tooling is access-restricted,
so experiments run on a generated stand-in with the same awkward features:
a zero-inflated, heavily right-skewed income column, a binary over-65
indicator, two log-scale predictors, a bimodal and right-skewed marginal
tax rate, and a capital-gains-ratio response that depends linearly on all
of them. Every column ships with declared public bounds.
"""

from __future__ import annotations

import numpy as np

from .columns import BoundedColumn, CategoricalColumn, Table
from .errors import InvalidParameterError
from .rng import RandomSource

INCOME_BOUNDS = (0.0, 30_000.0)
LOG_DIVIDENDS_BOUNDS = (9.0, 16.0)
LOG_AGI_BOUNDS = (9.0, 18.0)
MARGINAL_RATE_BOUNDS = (0.0, 0.5)
CAPGAINS_RATIO_BOUNDS = (0.0, 16.0)
AGE65_LEVELS = ("under65", "over65")

# Response model on original units. The rate effect is negative (higher
# first-dollar rates depress realizations), the over-65 and dividend effects
# positive, the AGI effect mildly negative. Declared bounds are deliberately
# loose relative to where the data concentrates; real public bounds have to
# cover every conceivable filer, and that looseness is what makes the DP
# noise bite.
_COEF_INTERCEPT = 0.55
_COEF_RATE = -1.7
_COEF_AGE65 = 0.35
_COEF_LOG_DIV = 0.17
_COEF_LOG_AGI = -0.085
_RESPONSE_NOISE_SD = 0.15


def synth_taxlike_data(n: int, seed: int) -> Table:
    """Generate n rows of the benchmark dataset, reproducibly from seed.

    Columns:
      income          zero-inflated lognormal, clamped to [0, 30000]
      age65           categorical under65/over65
      log_dividends   log of a dividend-like amount, right-skewed
      log_agi         log adjusted gross income, correlated with dividends
      marginal_rate   two modes near 0.15 and 0.25 plus an exponential
                      right tail, high mode more likely at high AGI
      capgains_ratio  linear response in the four predictors plus noise
    """
    if n < 1:
        raise InvalidParameterError(f"need at least one row, got {n}")
    gen = RandomSource(seed).child("synth-taxlike").generator()

    zero = gen.random(n) < 0.28
    income = np.where(zero, 0.0, gen.lognormal(mean=7.2, sigma=1.3, size=n))

    log_div = LOG_DIVIDENDS_BOUNDS[0] + 0.43 + gen.gamma(shape=2.0, scale=0.2, size=n)
    log_agi = 11.9 + 0.4 * gen.standard_normal(n) + 0.5 * (log_div - np.mean(log_div))

    over65 = gen.random(n) < 0.35

    p_high = 1.0 / (1.0 + np.exp(-(log_agi - 11.9)))
    high_mode = gen.random(n) < 0.62 * p_high
    rate = np.where(
        high_mode,
        gen.normal(0.25, 0.006, size=n),
        gen.normal(0.15, 0.008, size=n),
    )
    tail = gen.random(n) < 0.08
    rate = np.where(tail, 0.25 + gen.exponential(scale=0.032, size=n), rate)

    response = (
        _COEF_INTERCEPT
        + _COEF_RATE * np.clip(rate, *MARGINAL_RATE_BOUNDS)
        + _COEF_AGE65 * over65.astype(float)
        + _COEF_LOG_DIV * np.clip(log_div, *LOG_DIVIDENDS_BOUNDS)
        + _COEF_LOG_AGI * np.clip(log_agi, *LOG_AGI_BOUNDS)
        + gen.normal(0.0, _RESPONSE_NOISE_SD, size=n)
    )

    return Table(
        numeric={
            "income": BoundedColumn.ingest(income, *INCOME_BOUNDS, name="income"),
            "log_dividends": BoundedColumn.ingest(
                log_div, *LOG_DIVIDENDS_BOUNDS, name="log_dividends"
            ),
            "log_agi": BoundedColumn.ingest(log_agi, *LOG_AGI_BOUNDS, name="log_agi"),
            "marginal_rate": BoundedColumn.ingest(
                rate, *MARGINAL_RATE_BOUNDS, name="marginal_rate"
            ),
            "capgains_ratio": BoundedColumn.ingest(
                response, *CAPGAINS_RATIO_BOUNDS, name="capgains_ratio"
            ),
        },
        categorical={
            "age65": CategoricalColumn.ingest(
                np.where(over65, AGE65_LEVELS[1], AGE65_LEVELS[0]), AGE65_LEVELS, name="age65"
            )
        },
    )


def taxlike_schema() -> dict:
    """Schema sidecar matching synth_taxlike_data's columns."""

    def numeric(bounds):
        return {"kind": "numeric", "lower": bounds[0], "upper": bounds[1]}

    return {
        "columns": {
            "income": numeric(INCOME_BOUNDS),
            "log_dividends": numeric(LOG_DIVIDENDS_BOUNDS),
            "log_agi": numeric(LOG_AGI_BOUNDS),
            "marginal_rate": numeric(MARGINAL_RATE_BOUNDS),
            "capgains_ratio": numeric(CAPGAINS_RATIO_BOUNDS),
            "age65": {"kind": "categorical", "levels": list(AGE65_LEVELS)},
        }
    }
