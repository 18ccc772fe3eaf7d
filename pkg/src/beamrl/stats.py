"""Series post-processing: moving averages and distribution summaries."""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def moving_average(series, window=500):
    """Trailing mean over the last `window` samples.

    During warm-up (t < window-1) the mean runs over the available prefix,
    so the output has the same length as the input.
    """
    if window < 1:
        raise DomainError(f"window must be >= 1, got {window}")
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        return series.copy()
    csum = np.concatenate(([0.0], np.cumsum(series)))
    t = np.arange(1, series.size + 1)
    lo = np.maximum(t - window, 0)
    return (csum[t] - csum[lo]) / (t - lo)


@dataclass
class DistributionStats:
    grid: np.ndarray
    cdf: np.ndarray
    q1: float
    median: float
    q3: float
    whisker_low: float  # = min (whisker length "infinite": no outliers)
    whisker_high: float  # = max


def distribution_stats(series, grid_points=101):
    """Empirical CDF on a uniform grid plus interpolated quartiles."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise DomainError("distribution_stats needs a nonempty series")
    lo, hi = float(series.min()), float(series.max())
    grid = np.linspace(lo, hi, grid_points)
    sorted_vals = np.sort(series)
    cdf = np.searchsorted(sorted_vals, grid, side="right") / series.size
    q1, median, q3 = np.percentile(series, [25.0, 50.0, 75.0], method="linear")
    return DistributionStats(
        grid=grid,
        cdf=cdf,
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        whisker_low=lo,
        whisker_high=hi,
    )
