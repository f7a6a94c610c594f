import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from feedaudit.errors import ShapeError
from feedaudit.stats import (
    TestStatisticPair,
    Verdict,
    audit_threshold,
    binomial_interval,
    chi2_cdf,
    chi_squared_quantile,
    robustness_decision,
    wald_statistic,
    wald_statistic_batch,
)

LEVELS = [0.5, 0.9, 0.95, 0.99, 0.999]


def test_quantile_table_values():
    # scipy.stats.chi2.ppf(0.95, 1) = 3.841458820694124
    assert chi_squared_quantile(1, 0.95) == pytest.approx(3.841458820694124, abs=1e-10)
    assert chi_squared_quantile(1, 0.95) == pytest.approx(3.8415, abs=1e-4)
    assert chi_squared_quantile(2, 0.99) == pytest.approx(9.2103, abs=1e-4)


@pytest.mark.parametrize("a", LEVELS)
def test_two_dof_closed_form(a):
    assert abs(chi_squared_quantile(2, a) - (-2.0 * math.log1p(-a))) <= 1e-10


@pytest.mark.parametrize("r", range(1, 7))
@pytest.mark.parametrize("a", LEVELS)
def test_quantile_cdf_round_trip(r, a):
    assert abs(chi2_cdf(r, chi_squared_quantile(r, a)) - a) <= 1e-9


def test_quantile_near_zero():
    assert chi_squared_quantile(2, 1e-12) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("a", [0.0, 1.0, -0.1, 1.5])
def test_quantile_range_error(a):
    with pytest.raises(ValueError):
        chi_squared_quantile(2, a)


def test_quantile_rejects_bad_dof():
    with pytest.raises(ValueError):
        chi_squared_quantile(0, 0.5)
    with pytest.raises(ValueError):
        chi_squared_quantile(1.5, 0.5)


def test_threshold_examples():
    t = audit_threshold(2, 30, 0.01)
    assert t.tau == pytest.approx(0.61402, abs=1e-5)
    assert t.tau == (2.0 / 30) * chi_squared_quantile(2, 0.99)
    assert audit_threshold(1, 1000, 0.05).tau == pytest.approx(0.0076830, abs=1e-7)
    assert audit_threshold(2, 10**12, 0.01).tau < 1e-10


def test_threshold_rejects_bad_inputs():
    with pytest.raises(ValueError):
        audit_threshold(2, 0, 0.01)
    with pytest.raises(ValueError):
        audit_threshold(2, 30, 1.0)


@settings(max_examples=60, deadline=None)
@given(r=st.integers(1, 5), m=st.integers(1, 5000), a1=st.floats(0.001, 0.5), a2=st.floats(0.001, 0.5))
def test_threshold_monotone(r, m, a1, a2):
    assume(abs(a1 - a2) > 1e-6)
    assert audit_threshold(r, m + 1, a1).tau < audit_threshold(r, m, a1).tau
    lo, hi = sorted((a1, a2))
    # larger 1 - alpha gives a larger threshold
    assert audit_threshold(r, m, lo).tau > audit_threshold(r, m, hi).tau


def test_wald_examples():
    assert wald_statistic([0.3, 2.0], [0.3, 2.0], np.diag([5.0, 1.0])) == 0.0
    assert wald_statistic([1.0, 0.0], [0.0, 0.0], np.eye(2)) == 1.0
    assert wald_statistic([0.5, 1.2], [0.0, 1.0], np.diag([1.0, 0.5])) == pytest.approx(0.27, abs=1e-12)


def test_wald_shape_errors():
    with pytest.raises(ShapeError):
        wald_statistic([1.0, 0.0], [0.0], np.eye(2))
    with pytest.raises(ShapeError):
        wald_statistic([1.0, 0.0], [0.0, 0.0], np.eye(3))


vec2 = st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=2)


@st.composite
def psd2(draw):
    a = np.array(draw(st.lists(st.floats(-5, 5, allow_nan=False), min_size=4, max_size=4))).reshape(2, 2)
    return a @ a.T


@settings(max_examples=200, deadline=None)
@given(t1=vec2, t2=vec2, info=psd2(), c=st.floats(-10, 10, allow_nan=False))
def test_wald_properties(t1, t2, info, c):
    s = wald_statistic(t1, t2, info)
    assert s >= 0
    assert s == wald_statistic(t2, t1, info)
    scaled = wald_statistic(c * np.array(t1), c * np.array(t2), info)
    assert scaled == pytest.approx(c * c * s, rel=1e-9, abs=1e-9)


def test_wald_batch_matches_scalar(rng):
    t1 = rng.normal(size=(100, 2))
    t2 = rng.normal(size=(100, 2))
    a = rng.normal(size=(100, 2, 2))
    info = a @ np.transpose(a, (0, 2, 1))
    batch = wald_statistic_batch(t1, t2, info)
    scalar = [wald_statistic(t1[i], t2[i], info[i]) for i in range(100)]
    assert np.allclose(batch, scalar, rtol=1e-12)


def test_decision_examples():
    tau = 0.614
    assert robustness_decision(TestStatisticPair(0.0, 0.0), tau) is Verdict.PASS
    assert robustness_decision(TestStatisticPair(0.7, 0.3), tau) is Verdict.FAIL
    assert robustness_decision(TestStatisticPair(0.3, 0.7), tau) is Verdict.FAIL
    # tie fails
    assert robustness_decision(TestStatisticPair(0.614, 0.1), tau) is Verdict.FAIL
    assert robustness_decision(TestStatisticPair(0.1, 0.1), audit_threshold(2, 30, 0.01)) is Verdict.PASS


@settings(max_examples=200, deadline=None)
@given(s1=st.floats(0, 10), s2=st.floats(0, 10), tau=st.floats(0, 10), extra=st.floats(0, 10))
def test_decision_monotone_in_tau(s1, s2, tau, extra):
    pair = TestStatisticPair(s1, s2)
    if robustness_decision(pair, tau) is Verdict.PASS:
        assert robustness_decision(pair, tau + extra) is Verdict.PASS
    assert robustness_decision(pair, tau) is robustness_decision(pair.swapped(), tau)


def test_binomial_interval_contains_estimate():
    lo, hi = binomial_interval(20, 1000)
    assert lo < 0.02 < hi
    assert binomial_interval(0, 100)[0] == 0.0
    assert binomial_interval(100, 100)[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        binomial_interval(5, 0)
