import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from core.gaussmath import GaussStats, cdf, erf, fit_gauss


def erf_oracle(x: float) -> float:
    value, _ = quad(lambda t: 2.0 / math.sqrt(math.pi) * math.exp(-t * t), 0.0, x, epsabs=1e-14, epsrel=1e-14)
    return value


def normal_cdf_oracle(z: float) -> float:
    value, _ = quad(lambda t: math.exp(-t * t / 2.0) / math.sqrt(2.0 * math.pi), -math.inf, z)
    return value


@pytest.mark.parametrize(
    "values, mu, sigma2",
    [
        ([1.0, 1.0, 1.0], 1.0, 0.0),
        ([0.0, 1.0], 0.5, 0.25),
    ],
)
def test_fit_gauss(values, mu, sigma2):
    stats = fit_gauss(values)
    assert stats.mu == pytest.approx(mu)
    assert stats.sigma2 == pytest.approx(sigma2)


def test_fit_gauss_sample_statistics():
    draws = np.random.default_rng(7).normal(0.3, 0.05, 1000)
    stats = fit_gauss(draws)
    assert abs(stats.mu - 0.3) <= 0.01
    assert abs(stats.sigma - 0.05) <= 0.01


def test_fit_gauss_empty():
    with pytest.raises(ValueError):
        fit_gauss([])


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=50))
def test_fit_gauss_mu_in_range(values):
    stats = fit_gauss(values)
    assert min(values) <= stats.mu <= max(values)
    assert stats.sigma2 >= 0.0


def test_erf_examples():
    assert abs(erf(0.0)) <= 1.5e-7
    assert erf(1.0) == pytest.approx(0.8427008, abs=1.5e-7)


@given(st.floats(-6.0, 6.0, allow_nan=False))
def test_erf_is_odd(x):
    assume(x != 0.0)
    assert erf(-x) == -erf(x)


def test_erf_matches_integration_oracle():
    grid = np.round(np.arange(-4.0, 4.0 + 1e-9, 0.01), 10)
    worst = max(abs(erf(float(x)) - erf_oracle(float(x))) for x in grid)
    assert worst <= 1.5e-7


def test_cdf_examples():
    stats = GaussStats(mu=0.4, sigma2=0.01)
    assert cdf(0.4, stats) == pytest.approx(0.5, abs=1e-8)
    assert cdf(0.4 + stats.sigma, stats) == pytest.approx(normal_cdf_oracle(1.0), abs=1e-6)
    assert cdf(0.4 + stats.sigma, stats) == pytest.approx(0.841345, abs=1e-6)
    assert cdf(0.5, GaussStats(mu=0.4, sigma2=0.0)) == 1.0
    assert cdf(0.3, GaussStats(mu=0.4, sigma2=0.0)) == 0.0


@settings(max_examples=1000)
@given(
    st.floats(0.0, 1.0),
    st.floats(0.0, 0.25),
    st.floats(-2.0, 3.0),
    st.floats(-2.0, 3.0),
)
def test_cdf_monotone(mu, sigma2, z1, z2):
    lo, hi = min(z1, z2), max(z1, z2)
    stats = GaussStats(mu, sigma2)
    assert cdf(lo, stats) <= cdf(hi, stats) + 1e-15


@settings(max_examples=1000)
@given(st.floats(0.0, 1.0), st.floats(1e-4, 0.25), st.floats(0.0, 2.0))
def test_cdf_symmetry(mu, sigma2, a):
    stats = GaussStats(mu, sigma2)
    assert cdf(mu + a, stats) + cdf(mu - a, stats) == pytest.approx(1.0, abs=1e-6)
