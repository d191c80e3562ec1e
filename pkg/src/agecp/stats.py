"""Small statistical helpers shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BernoulliEstimate:
    """A frequency with its Wilson score interval."""

    successes: int
    trials: int
    z: float = 1.96

    @property
    def p_hat(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.successes, self.trials, self.z)

    @property
    def std_err(self) -> float:
        p = self.p_hat
        return math.sqrt(p * (1.0 - p) / self.trials) if self.trials else 0.0


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class LogLinearFit:
    """Least-squares fit of log(freq) = log(A) - B * t."""

    rate_b: float
    prefactor_a: float
    r_squared: float

    @classmethod
    def from_points(cls, ts, freqs) -> "LogLinearFit":
        ts = np.asarray(ts, dtype=float)
        freqs = np.asarray(freqs, dtype=float)
        keep = freqs > 0
        ts, ys = ts[keep], np.log(freqs[keep])
        if len(ts) < 2:
            return cls(float("nan"), float("nan"), 0.0)
        slope, intercept = np.polyfit(ts, ys, 1)
        resid = ys - (slope * ts + intercept)
        ss_res = float(np.sum(resid ** 2))
        ss_tot = float(np.sum((ys - ys.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return cls(rate_b=-float(slope), prefactor_a=float(math.exp(intercept)),
                   r_squared=r2)


def mean_ci(values, z: float = 1.96) -> tuple[float, float]:
    """(mean, half-width of the normal CI)."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return (float("nan"), float("nan"))
    if len(v) == 1:
        return (float(v[0]), float("inf"))
    return (float(v.mean()), z * float(v.std(ddof=1)) / math.sqrt(len(v)))


def wilson_self_test(seed: int = 0, batches: int = 1500, n: int = 60,
                     p: float = 0.3) -> tuple[bool, float]:
    """Empirical coverage of the 95% Wilson interval on Bernoulli batches.

    Returns (ok, coverage); run at suite startup as a sanity gate for every
    downstream interval.
    """
    rng = np.random.default_rng(seed)
    covered = 0
    for _ in range(batches):
        k = int(rng.binomial(n, p))
        lo, hi = wilson_interval(k, n)
        covered += lo <= p <= hi
    cov = covered / batches
    return (0.925 <= cov <= 0.985, cov)
