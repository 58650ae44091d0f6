"""Reproducibility of the RandomSource plumbing."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpvalid.errors import InvalidParameterError
from dpvalid.rng import RandomSource, derive_stream


def test_same_source_same_draws():
    a = RandomSource(12345, 7).generator().standard_normal(64)
    b = RandomSource(12345, 7).generator().standard_normal(64)
    np.testing.assert_array_equal(a, b)


def test_distinct_streams_disagree():
    a = RandomSource(12345, 0).generator().standard_normal(64)
    b = RandomSource(12345, 1).generator().standard_normal(64)
    assert not np.array_equal(a, b)


def test_generator_is_fresh_each_call():
    src = RandomSource(9, 2)
    first = src.generator().standard_normal(8)
    again = src.generator().standard_normal(8)
    np.testing.assert_array_equal(first, again)


def test_child_is_stable_and_tag_sensitive():
    src = RandomSource(4, 0)
    assert src.child("task", 3).stream == src.child("task", 3).stream
    assert src.child("task", 3).stream != src.child("task", 4).stream
    assert src.child("a").child("b").stream != src.child("b").child("a").stream


def test_derive_stream_pinned_value():
    # frozen so any platform or version drift is caught loudly
    assert derive_stream("a", 1) == 1404800049916772892


def test_validation():
    with pytest.raises(InvalidParameterError):
        RandomSource(-1)
    with pytest.raises(InvalidParameterError):
        RandomSource(2**64)
    with pytest.raises(InvalidParameterError):
        RandomSource(0, -3)


@given(st.lists(st.one_of(st.integers(), st.text(max_size=8)), max_size=4))
def test_derive_stream_range(tags):
    s = derive_stream(*tags)
    assert 0 <= s < 2**63
