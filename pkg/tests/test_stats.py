import math

import numpy as np
import pytest

from agecp.stats import (BernoulliEstimate, LogLinearFit, mean_ci,
                         wilson_interval, wilson_self_test)


def test_wilson_basic_properties():
    lo, hi = wilson_interval(50, 100)
    assert 0.4 < lo < 0.5 < hi < 0.6
    lo0, hi0 = wilson_interval(0, 100)
    assert lo0 == 0.0 and hi0 < 0.05
    lo1, hi1 = wilson_interval(100, 100)
    assert hi1 == pytest.approx(1.0) and lo1 > 0.95
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_wilson_width_shrinks_like_sqrt_n():
    w = []
    for n in (100, 400, 1600):
        lo, hi = wilson_interval(n // 2, n)
        w.append(hi - lo)
    assert w[0] / w[1] == pytest.approx(2.0, rel=0.1)
    assert w[1] / w[2] == pytest.approx(2.0, rel=0.1)


def test_wilson_self_test_coverage():
    ok, cov = wilson_self_test(seed=1)
    assert ok, f"coverage {cov}"


def test_bernoulli_estimate():
    e = BernoulliEstimate(30, 100)
    assert e.p_hat == 0.3
    lo, hi = e.interval
    assert lo < 0.3 < hi
    assert e.std_err == pytest.approx(math.sqrt(0.3 * 0.7 / 100))


def test_loglinear_fit_recovers_exponential():
    ts = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    freqs = 0.8 * np.exp(-0.5 * ts)
    fit = LogLinearFit.from_points(ts, freqs)
    assert fit.rate_b == pytest.approx(0.5, abs=1e-9)
    assert fit.prefactor_a == pytest.approx(0.8, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)


def test_loglinear_fit_ignores_zero_bins():
    fit = LogLinearFit.from_points([1, 2, 3, 4], [0.5, 0.25, 0.0, 0.0625])
    assert fit.rate_b == pytest.approx(math.log(2), rel=1e-6)


def test_mean_ci():
    m, ci = mean_ci([2.0, 2.0, 2.0, 2.0])
    assert m == 2.0 and ci == 0.0
    m, ci = mean_ci([])
    assert math.isnan(m)
