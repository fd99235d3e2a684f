"""Power-transform behavior: branches, policies, and distribution effects."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fecam.errors import DataError
from fecam.transform import NegativePolicy, TukeyConfig, tukey, tukey_bypasses


class TestBranches:
    def test_square_root_values(self):
        out = tukey(np.array([4.0, 0.0, 2.25]), TukeyConfig(lam=0.5))
        np.testing.assert_array_equal(out, [2.0, 0.0, 1.5])

    def test_log_branch(self):
        out = tukey(np.array([np.e, 1.0]), TukeyConfig(lam=0.0))
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-15)

    def test_power_one_is_bit_identical_identity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((50, 4)) * 100  # negatives included
        out = tukey(x, TukeyConfig(lam=1.0))
        assert np.array_equal(out, x)

    def test_disabled_is_identity(self):
        x = np.array([[-3.0, 2.0]])
        out = tukey(x, TukeyConfig(lam=0.5, enabled=False))
        assert np.array_equal(out, x)

    def test_zero_to_positive_power_is_zero(self):
        assert tukey(np.array([0.0]), TukeyConfig(lam=0.3))[0] == 0.0


class TestPolicies:
    def test_negative_with_error_policy(self):
        with pytest.raises(DataError, match="negative"):
            tukey(np.array([-1.0, 4.0]), TukeyConfig(lam=0.5))

    def test_negative_with_bypass_policy_returns_input(self):
        x = np.array([[-1.0, 4.0]])
        cfg = TukeyConfig(lam=0.5, negative_policy=NegativePolicy.BYPASS)
        assert np.array_equal(tukey(x, cfg), x)
        assert tukey_bypasses(x, cfg)

    def test_bypass_does_not_fire_on_nonnegative_batches(self):
        cfg = TukeyConfig(lam=0.5, negative_policy=NegativePolicy.BYPASS)
        x = np.array([[0.0, 4.0]])
        assert not tukey_bypasses(x, cfg)
        np.testing.assert_array_equal(tukey(x, cfg), [[0.0, 2.0]])

    def test_log_branch_rejects_nonpositive_always(self):
        cfg = TukeyConfig(lam=0.0, negative_policy=NegativePolicy.BYPASS)
        with pytest.raises(DataError):
            tukey(np.array([0.0, 1.0]), cfg)
        with pytest.raises(DataError):
            tukey(np.array([-2.0]), TukeyConfig(lam=0.0))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.floats(min_value=0.0, max_value=1e6, allow_nan=False),
        min_size=2,
        max_size=40,
    ),
    st.floats(min_value=0.05, max_value=3.0),
)
def test_monotone_on_nonnegative_inputs(values, lam):
    x = np.sort(np.array(values))
    out = tukey(x, TukeyConfig(lam=lam))
    assert np.all(np.diff(out) >= 0)


def test_half_power_reduces_lognormal_skewness():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        column = rng.lognormal(mean=0.0, sigma=1.0, size=4000)
        before = stats.skew(column)
        after = stats.skew(tukey(column, TukeyConfig(lam=0.5)))
        assert after < before
