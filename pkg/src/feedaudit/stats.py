"""Threshold and test-statistic arithmetic for the audit."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, ndtri

from .errors import ShapeError


class Verdict(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"

    def __str__(self):
        return self.value


def chi2_cdf(r: int, q: float) -> float:
    """CDF of the chi-squared distribution with r degrees of freedom."""
    if q <= 0:
        return 0.0
    return float(gammainc(0.5 * r, 0.5 * q))


def chi_squared_quantile(r: int, a: float) -> float:
    """Value q with P(u <= q) = a for u ~ chi2_r.

    Inverts the regularized lower incomplete gamma function by bisection, run
    until the bracket cannot shrink any further in double precision.
    """
    if int(r) != r or r < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {r}")
    if not 0.0 < a < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {a}")
    r = int(r)
    lo, hi = 0.0, max(1.0, float(r))
    while chi2_cdf(r, hi) < a:
        lo, hi = hi, 2.0 * hi
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if chi2_cdf(r, mid) < a:
            lo = mid
        else:
            hi = mid
    # pick whichever endpoint lands closer in probability
    return lo if abs(chi2_cdf(r, lo) - a) < abs(chi2_cdf(r, hi) - a) else hi


@dataclass(frozen=True)
class AuditThreshold:
    tau: float
    r: int
    m: int
    alpha: float


def audit_threshold(r: int, m: int, alpha: float) -> AuditThreshold:
    """tau = (2 / m) * chi2_r(1 - alpha)."""
    if m < 1:
        raise ValueError(f"feed length must be at least 1, got {m}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return AuditThreshold(2.0 / m * chi_squared_quantile(r, 1.0 - alpha), int(r), int(m), float(alpha))


def wald_statistic(theta1, theta2, info) -> float:
    """(theta1 - theta2)' info (theta1 - theta2)."""
    t1 = np.atleast_1d(np.asarray(theta1, dtype=float))
    t2 = np.atleast_1d(np.asarray(theta2, dtype=float))
    info = np.atleast_2d(np.asarray(info, dtype=float))
    if t1.shape != t2.shape or t1.ndim != 1 or info.shape != (t1.size, t1.size):
        raise ShapeError(
            f"incompatible shapes: theta {t1.shape} vs {t2.shape}, information {info.shape}"
        )
    d = t1 - t2
    return float(d @ info @ d)


def wald_statistic_batch(theta1, theta2, info) -> np.ndarray:
    d = np.asarray(theta1, dtype=float) - np.asarray(theta2, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.einsum("ti,tij,tj->t", d, np.asarray(info, dtype=float), d)


@dataclass(frozen=True)
class TestStatisticPair:
    stat_prime: float
    stat_double_prime: float

    __test__ = False  # not a pytest class

    def swapped(self):
        return TestStatisticPair(self.stat_double_prime, self.stat_prime)


def robustness_decision(pair: TestStatisticPair, threshold) -> Verdict:
    """FAIL iff either statistic reaches tau (ties fail)."""
    tau = threshold.tau if isinstance(threshold, AuditThreshold) else float(threshold)
    if pair.stat_prime >= tau or pair.stat_double_prime >= tau:
        return Verdict.FAIL
    return Verdict.PASS


def midpoint_statistic(family, theta1, theta2) -> float:
    """Diagnostic only: the quadratic form at the information of the midpoint estimate."""
    mid = 0.5 * (np.asarray(theta1, dtype=float) + np.asarray(theta2, dtype=float))
    return wald_statistic(theta1, theta2, family.fisher_information(mid))


def binomial_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError(f"need at least one trial, got n={n}")
    if not 0 <= k <= n:
        raise ValueError(f"successes k={k} outside [0, n={n}]")
    z = float(ndtri(0.5 + confidence / 2.0))
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return (float(lo), float(hi))
