"""Episode metrics and two-sample hypothesis tests.

The one-tailed Student t-test operates on summary statistics (mean,
variance, n) so comparisons can be recomputed directly from aggregate
tables rather than raw samples. The
t-distribution CDF is evaluated through the regularized incomplete beta
function using Lentz's continued fraction, keeping the statistical core free
of third-party dependencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BETA_TOL = 1e-10
_BETA_MAX_ITER = 400
_TINY = 1e-300


@dataclass(frozen=True)
class SampleSummary:
    """Mean, variance and count of one group of completion times."""

    mean: float
    variance: float
    n: int

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be non-negative")
        if self.n < 2:
            raise ValueError("need at least two samples per group")


@dataclass(frozen=True)
class TestResult:
    """t statistic, one-tailed p-value and degrees of freedom."""

    t_stat: float
    p_one_tailed: float
    dof: float

    def __post_init__(self):
        if not 0.0 <= self.p_one_tailed <= 1.0:
            raise ValueError("p-value must lie in [0, 1]")


def summarize(values) -> SampleSummary:
    """Sample mean and unbiased variance of a sequence of values."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least two samples to summarize")
    return SampleSummary(mean=float(arr.mean()), variance=float(arr.var(ddof=1)), n=arr.size)


def _beta_continued_fraction(x: float, a: float, b: float) -> float:
    # Modified Lentz evaluation of the continued fraction in the standard
    # series for the regularized incomplete beta function.
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        coef = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coef * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + coef / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        coef = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coef * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + coef / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < BETA_TOL * 1e-4:
            return h
    raise RuntimeError(f"incomplete beta continued fraction did not converge for x={x}")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) via Lentz's continued fraction with the symmetry split."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(x, a, b) / a
    return 1.0 - front * _beta_continued_fraction(1.0 - x, b, a) / b


def student_t_cdf(t: float, dof: float) -> float:
    """CDF of Student's t distribution with ``dof`` degrees of freedom."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    if t == 0.0:
        return 0.5
    tail = 0.5 * regularized_incomplete_beta(dof / (dof + t * t), 0.5 * dof, 0.5)
    return 1.0 - tail if t > 0 else tail


def _one_tailed_p(t: float, dof: float, alternative: str) -> float:
    if alternative == "less":
        return student_t_cdf(t, dof)
    if alternative == "greater":
        return 1.0 - student_t_cdf(t, dof)
    raise ValueError(f"alternative must be 'less' or 'greater', got {alternative!r}")


def pooled_t_test(a: SampleSummary, b: SampleSummary, alternative: str = "less") -> TestResult:
    """Student's pooled two-sample t-test from summary statistics.

    Pools the variances with n_a + n_b - 2 degrees of freedom and tests the
    one-tailed alternative that group a's mean is 'less' or 'greater' than
    group b's.
    """
    dof = a.n + b.n - 2
    pooled_var = ((a.n - 1) * a.variance + (b.n - 1) * b.variance) / dof
    se = math.sqrt(pooled_var * (1.0 / a.n + 1.0 / b.n))
    t = (a.mean - b.mean) / se
    return TestResult(t_stat=t, p_one_tailed=_one_tailed_p(t, dof, alternative), dof=dof)


def welch_t_test(a: SampleSummary, b: SampleSummary, alternative: str = "less") -> TestResult:
    """Welch's unequal-variance two-sample t-test from summary statistics."""
    va, vb = a.variance / a.n, b.variance / b.n
    se2 = va + vb
    t = (a.mean - b.mean) / math.sqrt(se2)
    dof = se2**2 / (va**2 / (a.n - 1) + vb**2 / (b.n - 1))
    return TestResult(t_stat=t, p_one_tailed=_one_tailed_p(t, dof, alternative), dof=dof)


def rms_tracking_error(trace, window: tuple[float, float] | None = None) -> float:
    """Root-mean-square norm of the reference-minus-plant error.

    ``window`` restricts the computation to times in [t_lo, t_hi]; an empty
    window is an error rather than a silent zero.
    """
    times = np.asarray(trace.times)
    error = np.asarray(trace.error)
    if times.size == 0:
        raise ValueError("trace is empty")
    if window is not None:
        lo, hi = window
        mask = (times >= lo) & (times <= hi)
        if not np.any(mask):
            raise ValueError(f"window [{lo}, {hi}] selects no samples")
        error = error[mask]
    return float(np.sqrt(np.mean(np.sum(error**2, axis=1))))


def cumulative_success_curve(episodes, grid) -> np.ndarray:
    """Fraction of episodes whose success time is at or below each grid time.

    Monotone non-decreasing; the value at the cutoff equals the overall
    success rate.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("need at least one episode")
    grid = np.asarray(grid, dtype=float)
    success_times = np.array(
        [math.inf if ep.success_time is None else ep.success_time for ep in episodes]
    )
    return np.array([np.mean(success_times <= tau) for tau in grid])
