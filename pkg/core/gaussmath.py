"""Gaussian statistics, error function and cdf used for sample weighting."""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from core.settings import settings

# Abramowitz & Stegun 7.1.26, |error| <= 1.5e-7
_P = 0.3275911
_A = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)


@dataclass(frozen=True)
class GaussStats:
    mu: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def fit_gauss(values: Sequence[float]) -> GaussStats:
    """mean and population (1/n) variance."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError("fit_gauss: empty sample")
    mu = float(arr.mean())
    sigma2 = float(np.mean((arr - mu) ** 2))
    # keep mu inside the sample range under rounding
    mu = min(max(mu, float(arr.min())), float(arr.max()))
    return GaussStats(mu=mu, sigma2=max(sigma2, 0.0))


def erf(x: float) -> float:
    sign = -1.0 if x < 0 else 1.0
    ax = abs(float(x))
    t = 1.0 / (1.0 + _P * ax)
    a1, a2, a3, a4, a5 = _A
    poly = ((((a5 * t + a4) * t + a3) * t + a2) * t + a1) * t
    return sign * (1.0 - poly * math.exp(-ax * ax))


def cdf(z: float, stats: GaussStats) -> float:
    """Phi(z) = 1/2 [1 + erf((z - mu) / (sigma sqrt 2))], sigma clamped below by the sigma floor."""
    sigma = max(stats.sigma, settings.SIGMA_FLOOR)
    return 0.5 * (1.0 + erf((z - stats.mu) / (sigma * math.sqrt(2.0))))
