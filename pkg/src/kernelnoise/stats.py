"""Monte Carlo estimates with standard errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError

SE_BAND = 5.0


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    std_error: float
    reference: float | None = None
    n: int = 0

    @property
    def gap(self) -> float:
        return abs(self.estimate - self.reference)

    def within(self, k: float = SE_BAND) -> bool:
        return self.gap <= k * self.std_error


@dataclass(frozen=True)
class ComplexMCEstimate:
    estimate: complex
    se_real: float
    se_imag: float
    reference: complex | None = None
    n: int = 0

    def within(self, k: float = SE_BAND) -> bool:
        d = self.estimate - self.reference
        return abs(d.real) <= k * self.se_real and abs(d.imag) <= k * self.se_imag


def _need(values, minimum=2):
    v = np.asarray(values)
    if v.shape[0] < minimum:
        raise InsufficientDataError(f"need at least {minimum} replicas, got {v.shape[0]}")
    return v


def mean_estimate(values, reference=None) -> MCEstimate:
    v = _need(values).astype(float)
    n = v.size
    return MCEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(n)), reference, n)


def complex_mean_estimate(values, reference=None) -> ComplexMCEstimate:
    v = _need(values)
    n = v.size
    re = mean_estimate(v.real)
    im = mean_estimate(v.imag)
    return ComplexMCEstimate(complex(re.estimate, im.estimate),
                             re.std_error, im.std_error, reference, n)


def variance_estimate(values, reference=None, center: float | None = None) -> MCEstimate:
    """Sample variance with its large-sample standard error.

    ``Var(s^2) ~ (m4 - s^4) / n`` with ``m4`` the fourth central moment.
    If ``center`` is given the variance is taken about that known mean.
    """
    v = _need(values).astype(float)
    n = v.size
    if center is None:
        d = v - v.mean()
        s2 = float(d @ d / (n - 1))
    else:
        d = v - center
        s2 = float(d @ d / n)
    m4 = float(np.mean(d ** 4))
    se = math.sqrt(max(m4 - s2 * s2, 0.0) / n)
    return MCEstimate(s2, se, reference, n)


def ratio_se(a: MCEstimate, b: MCEstimate) -> tuple[float, float]:
    """``a / b`` with a delta-method standard error for independent estimates."""
    r = a.estimate / b.estimate
    rel = math.hypot(a.std_error / a.estimate, b.std_error / b.estimate)
    return r, abs(r) * rel
