import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from bartgp import Interval, empirical_interval
from bartgp.intervals import empirical_interval_bounds


def test_known_order_statistics():
    # S=19, alpha=0.1: lo rank floor(0.05*20)=1, hi rank ceil(0.95*20)=19
    iv = empirical_interval(np.arange(1, 20), 0.1)
    assert iv.lo == 1.0
    assert iv.hi == 19.0
    assert iv.level == pytest.approx(0.9)


@pytest.mark.parametrize("s", [1, 2, 7, 50])
def test_constant_draws(s):
    iv = empirical_interval(np.full(s, 3.25), 0.1)
    assert iv.lo == 3.25 and iv.hi == 3.25


def test_normal_draws_match_exact_quantiles():
    # Oracle: exact N(0,1) quantiles; MC tolerance from order-statistic SE.
    draws = np.random.Generator(np.random.Philox(key=np.array([11, 0], dtype=np.uint64))).standard_normal(500)
    iv = empirical_interval(draws, 0.1)
    assert iv.lo == pytest.approx(norm.ppf(0.05), abs=0.15)
    assert iv.hi == pytest.approx(norm.ppf(0.95), abs=0.15)


def test_empty_draws_error():
    with pytest.raises(ValueError, match="no posterior draws"):
        empirical_interval([], 0.1)


def test_small_sample_clamps_to_extremes():
    iv = empirical_interval([4.0, 2.0], 0.1)
    assert iv.lo == 2.0 and iv.hi == 4.0


def test_interval_requires_ordered_endpoints():
    with pytest.raises(ValueError):
        Interval(2.0, 1.0, 0.9)


@given(
    draws=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200),
    alpha=st.floats(0.01, 0.99),
    extra=st.floats(-1e6, 1e6),
)
@settings(max_examples=200, deadline=None)
def test_monotone_in_added_draws(draws, alpha, extra):
    iv = empirical_interval(draws, alpha)
    above = empirical_interval(draws + [max(iv.hi, extra) + 1.0], alpha)
    assert above.hi >= iv.hi
    below = empirical_interval(draws + [min(iv.lo, extra) - 1.0], alpha)
    assert below.lo <= iv.lo


@given(
    draws=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200),
    alpha=st.floats(0.01, 0.99),
)
@settings(max_examples=200, deadline=None)
def test_containment_fraction(draws, alpha):
    s = len(draws)
    iv = empirical_interval(draws, alpha)
    inside = sum(iv.lo <= d <= iv.hi for d in draws) / s
    assert inside >= 1.0 - alpha - 2.0 / (s + 1) - 1e-12


def test_vectorized_bounds_match_scalar():
    gen = np.random.default_rng(3)
    m = gen.normal(size=(40, 6))
    lo, hi = empirical_interval_bounds(m, 0.2)
    for j in range(6):
        iv = empirical_interval(m[:, j], 0.2)
        assert lo[j] == iv.lo and hi[j] == iv.hi
