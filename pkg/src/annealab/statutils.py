"""Small statistical helpers: confidence intervals and log-log slope fits."""

from __future__ import annotations

import numpy as np

from .errors import UsageError

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


def wilson_interval(successes: int, total: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise UsageError("wilson_interval requires total >= 1")
    if not 0 <= successes <= total:
        raise UsageError("successes must lie in [0, total]")
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * np.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def bootstrap_mean_ci(
    values: np.ndarray,
    n_boot: int = 1000,
    seed: int = 0,
    level: float = 0.95,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``values``."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise UsageError("bootstrap_mean_ci requires at least one value")
    if values.size == 1:
        return float(values[0]), float(values[0])
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    lo = float(np.quantile(means, (1 - level) / 2))
    hi = float(np.quantile(means, 1 - (1 - level) / 2))
    return lo, hi


def normal_mean_ci(values: np.ndarray, z: float = Z_95) -> tuple[float, float]:
    """Normal-approximation interval for the mean of ``values``."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise UsageError("normal_mean_ci requires at least one value")
    mean = float(values.mean())
    if values.size == 1:
        return mean, mean
    se = float(values.std(ddof=1)) / np.sqrt(values.size)
    return mean - z * se, mean + z * se


def loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise UsageError("loglog_slope needs two 1-d arrays of equal length >= 2")
    if np.any(x <= 0) or np.any(y <= 0):
        raise UsageError("loglog_slope requires positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
