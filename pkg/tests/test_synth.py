"""Benchmark data generator: reproducibility, bounds, and signal shape."""

import numpy as np
import pytest

from dpvalid.errors import InvalidParameterError
from dpvalid.synth import (
    AGE65_LEVELS,
    CAPGAINS_RATIO_BOUNDS,
    INCOME_BOUNDS,
    synth_taxlike_data,
    taxlike_schema,
)


def test_reproducible_and_seed_sensitive():
    a = synth_taxlike_data(500, seed=7)
    b = synth_taxlike_data(500, seed=7)
    c = synth_taxlike_data(500, seed=8)
    for name, col in a.numeric.items():
        np.testing.assert_array_equal(col.values, b.numeric[name].values)
    assert (a.numeric["income"].values != c.numeric["income"].values).any()
    np.testing.assert_array_equal(a.categorical["age65"].values, b.categorical["age65"].values)


def test_rejects_empty():
    with pytest.raises(InvalidParameterError):
        synth_taxlike_data(0, seed=1)


def test_columns_respect_declared_bounds():
    table = synth_taxlike_data(20_000, seed=3)
    for col in table.numeric.values():
        assert col.values.min() >= col.lower
        assert col.values.max() <= col.upper
    assert set(table.categorical["age65"].values) <= set(AGE65_LEVELS)


def test_marginal_texture():
    table = synth_taxlike_data(20_000, seed=11)
    income = table.numeric["income"].values
    zero_frac = (income == 0).mean()
    assert abs(zero_frac - 0.28) < 0.02
    # the nonzero part is strongly right-skewed: mean far above median
    nonzero = income[income > 0]
    assert nonzero.mean() > 1.5 * np.median(nonzero)
    over65_frac = (table.categorical["age65"].values == "over65").mean()
    assert abs(over65_frac - 0.35) < 0.02
    rate = table.numeric["marginal_rate"].values
    # bimodal: both modes populated, little mass in the valley between them
    assert (np.abs(rate - 0.15) < 0.02).mean() > 0.2
    assert (np.abs(rate - 0.25) < 0.02).mean() > 0.2
    assert ((rate > 0.18) & (rate < 0.22)).mean() < 0.02


def test_response_carries_documented_signs():
    table = synth_taxlike_data(50_000, seed=5)
    X = np.column_stack(
        [
            np.ones(50_000),
            table.numeric["marginal_rate"].values,
            (table.categorical["age65"].values == "over65").astype(float),
            table.numeric["log_dividends"].values,
            table.numeric["log_agi"].values,
        ]
    )
    beta = np.linalg.lstsq(X, table.numeric["capgains_ratio"].values, rcond=None)[0]
    assert beta[1] < 0  # marginal rate depresses the response
    assert beta[2] > 0  # over-65 lifts it
    assert beta[3] > 0  # dividends lift it
    assert beta[4] < 0  # AGI mildly negative


def test_schema_matches_table():
    table = synth_taxlike_data(50, seed=2)
    schema = taxlike_schema()["columns"]
    assert set(schema) == set(table.numeric) | set(table.categorical)
    for name, col in table.numeric.items():
        assert schema[name] == {"kind": "numeric", "lower": col.lower, "upper": col.upper}
    assert schema["age65"] == {"kind": "categorical", "levels": list(AGE65_LEVELS)}
    assert schema["income"]["upper"] == INCOME_BOUNDS[1]
    assert schema["capgains_ratio"]["upper"] == CAPGAINS_RATIO_BOUNDS[1]
