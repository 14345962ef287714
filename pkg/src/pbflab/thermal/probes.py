"""Probe thermal histories and their derived melt metrics.

The above-liquidus measures treat the sampled series as piecewise linear
and insert exact threshold crossings, so a triangular excursion yields the
analytic dwell time and integral.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .material import MaterialProps

__all__ = [
    "ProbeHistory",
    "ProbeMetrics",
    "probe_metrics",
    "measure_above",
    "integral_above",
    "longest_above",
]

#: Peak prominence threshold as a fraction of the series range.  Low enough
#: to catch the pre-heating bump a neighbor pass leaves at 100 um lateral
#: distance, high enough to reject plateau wiggles.
PEAK_PROMINENCE_FRACTION = 0.015


@dataclass
class ProbeMetrics:
    t_peak: float                   # K
    peak_times: np.ndarray          # s
    t_above_liquidus: float         # s
    integral_above_liquidus: float  # K s


@dataclass
class ProbeHistory:
    """Temperature trace at a fixed point (position in metres)."""

    position: tuple[float, float, float]
    times: np.ndarray
    temperatures: np.ndarray
    metrics: ProbeMetrics | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.temperatures = np.asarray(self.temperatures, dtype=float)
        if self.times.shape != self.temperatures.shape:
            raise ValueError("times and temperatures must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")


def _with_crossings(times: np.ndarray, values: np.ndarray, threshold: float):
    """Augment the piecewise-linear series with exact threshold crossings."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 2:
        return t, v
    d0 = v[:-1] - threshold
    d1 = v[1:] - threshold
    crossing = (d0 * d1) < 0.0
    idx = np.flatnonzero(crossing)
    if len(idx) == 0:
        return t, v
    frac = d0[idx] / (d0[idx] - d1[idx])
    tc = t[idx] + frac * (t[idx + 1] - t[idx])
    t_aug = np.concatenate([t, tc])
    v_aug = np.concatenate([v, np.full(len(tc), threshold)])
    order = np.argsort(t_aug, kind="stable")
    return t_aug[order], v_aug[order]


def _above_intervals(times, values, threshold):
    """(duration, is_above) per interval of the crossing-augmented series."""
    t, v = _with_crossings(times, values, threshold)
    if len(t) < 2:
        return np.empty(0), np.empty(0, dtype=bool)
    dt = np.diff(t)
    mid = 0.5 * (v[:-1] + v[1:])
    return dt, mid > threshold


def measure_above(times, values, threshold: float) -> float:
    """Total time (piecewise-linear measure) the series spends above threshold."""
    dt, above = _above_intervals(times, values, threshold)
    return float(dt[above].sum())


def longest_above(times, values, threshold: float) -> float:
    """Longest contiguous time the series stays above threshold."""
    dt, above = _above_intervals(times, values, threshold)
    best = cur = 0.0
    for d, a in zip(dt, above):
        if a:
            cur += d
            best = max(best, cur)
        else:
            cur = 0.0
    return float(best)


def integral_above(times, values, threshold: float) -> float:
    """Trapezoidal integral of max(v - threshold, 0) with exact crossings."""
    t, v = _with_crossings(times, values, threshold)
    if len(t) < 2:
        return 0.0
    excess = np.maximum(v - threshold, 0.0)
    return float(np.trapezoid(excess, t))


def probe_metrics(
    history: ProbeHistory,
    mat: MaterialProps,
    prominence_fraction: float = PEAK_PROMINENCE_FRACTION,
) -> ProbeMetrics:
    """Peak and above-liquidus metrics of a probe history."""
    v = history.temperatures
    t = history.times
    if len(v) == 0:
        raise ValueError("history is empty")
    span = float(v.max() - v.min())
    if span > 0:
        peaks, _ = find_peaks(v, prominence=prominence_fraction * span)
    else:
        peaks = np.empty(0, dtype=int)
    return ProbeMetrics(
        t_peak=float(v.max()),
        peak_times=t[peaks].copy(),
        t_above_liquidus=measure_above(t, v, mat.t_liquidus),
        integral_above_liquidus=integral_above(t, v, mat.t_liquidus),
    )
