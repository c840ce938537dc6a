"""Small statistical helpers: confidence intervals, trend tests, KS distance."""

from __future__ import annotations

import numpy as np
from scipy import stats as sps

# ndtri(0.995); 99% two-sided normal quantile used for every interval here
Z99 = 2.5758293035489004


def wilson_interval(k, n, z: float = Z99):
    """Wilson score interval for a binomial proportion.

    Args:
        k: success count (scalar or array).
        n: number of trials.
        z: normal quantile (default 99% two-sided).

    Returns:
        (lo, hi) arrays/scalars.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 0) or n <= 0:
        raise ValueError("need k >= 0 and n > 0")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return np.maximum(center - half, 0.0), np.minimum(center + half, 1.0)


def mean_interval(values_sum, squares_sum, count, z: float = Z99):
    """Normal-approximation CI for a mean from streamed sums.

    Returns (mean, lo, hi, se).
    """
    m = values_sum / count
    var = np.maximum(squares_sum / count - m * m, 0.0)
    se = np.sqrt(var / count)
    return m, m - z * se, m + z * se, se


def effective_sample_size(values_sum, squares_sum, count):
    """(sum w)^2 / sum w^2 for nonnegative per-replication weights."""
    values_sum = np.asarray(values_sum, dtype=float)
    squares_sum = np.asarray(squares_sum, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ess = np.where(squares_sum > 0, values_sum * values_sum / squares_sum, 0.0)
    return ess


def ks_distance(samples, cdf) -> float:
    """Sup distance between the empirical CDF of `samples` and a CDF callable."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return float(max(d_plus, d_minus))


def spearman(stat) -> float:
    """Spearman rank correlation of a sequence against its index.

    Returns 0.0 when the sequence is constant (no trend either way).
    """
    stat = np.asarray(stat, dtype=float)
    if stat.size < 2 or np.all(stat == stat[0]):
        return 0.0
    rho = sps.spearmanr(np.arange(stat.size), stat).statistic
    return float(rho) if np.isfinite(rho) else 0.0


# Trend rule shared by every checker: "decreasing" means Spearman <= -0.8
# over at least `min_points` points.
TREND_RHO = 0.8
MIN_TREND_POINTS = 8


def trend_verdict(stat, threshold: float, min_points: int = MIN_TREND_POINTS,
                  ci_width_final: float | None = None) -> tuple[str, str]:
    """Map a statistic sequence to a pass/fail/inconclusive verdict.

    pass: decreasing trend and the final value within `threshold` (a sequence
        that sits entirely within the threshold also passes), with the final
        CI no wider than half the pass margin when one is supplied.
    fail: trend not decreasing while the final value is outside the threshold.
    inconclusive: everything else (too few points, or a decreasing sequence
        that has not yet reached the threshold).

    Returns (verdict, note).
    """
    stat = np.asarray(stat, dtype=float)
    if stat.size < min_points:
        return "inconclusive", f"need >= {min_points} grid points, got {stat.size}"
    rho = spearman(stat)
    decreasing = rho <= -TREND_RHO
    small = abs(stat[-1]) <= threshold
    all_small = bool(np.all(np.abs(stat) <= threshold))
    if small and (decreasing or all_small):
        if ci_width_final is not None and ci_width_final > threshold / 2:
            return ("inconclusive",
                    f"final CI width {ci_width_final:.3g} exceeds half the pass margin")
        return "pass", f"spearman={rho:.3f}, final={stat[-1]:.3g}"
    if not decreasing and not small:
        return "fail", f"spearman={rho:.3f}, final={stat[-1]:.3g}"
    return "inconclusive", f"spearman={rho:.3f}, final={stat[-1]:.3g}"


def increasing_verdict(stat, min_points: int = MIN_TREND_POINTS) -> tuple[str, str]:
    """pass iff the sequence has a clear increasing trend (divergence checks)."""
    stat = np.asarray(stat, dtype=float)
    if stat.size < min_points:
        return "inconclusive", f"need >= {min_points} grid points, got {stat.size}"
    rho = spearman(stat)
    if rho >= TREND_RHO:
        return "pass", f"spearman={rho:.3f}"
    if rho <= -TREND_RHO:
        return "fail", f"spearman={rho:.3f}"
    return "inconclusive", f"spearman={rho:.3f}"
