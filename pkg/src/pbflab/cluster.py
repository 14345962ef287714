"""Anomaly windows, from-scratch DBSCAN, and turning-point classification.

Fixed-length signal excerpts around threshold events are min-max
normalized and clustered with a density-based algorithm (Euclidean metric
on the normalized vectors).  Clusters are then co-registered with the scan
trajectory: those sitting at hatch re-entry points with a spike-then-decay
mean shape are labelled as the turning-point class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .scanpath import ScanPattern, turning_points

__all__ = [
    "SignalWindow",
    "ClusterResult",
    "FrameMismatchError",
    "extract_windows",
    "normalize",
    "dbscan",
    "coregister_and_classify",
    "save_windows",
]

CLASS_TURNING = "class1_turning"
CLASS_BOUNDARY = "class2_boundary"
CLASS_RESIDUAL = "residual"

#: Fraction of a cluster's windows that must sit near re-entry points /
#: the part boundary for the positional part of the class tests.
PROXIMITY_FRACTION = 0.8


class FrameMismatchError(ValueError):
    """Windows and pattern do not share a coordinate frame."""


@dataclass
class SignalWindow:
    """Fixed-length excerpt of the signal around one anomaly."""

    center_time: float
    raw: np.ndarray
    normalized: np.ndarray
    position: tuple[float, float]  # part-frame mm at the event sample
    layer_index: int
    flat: bool = False

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=float)
        self.normalized = np.asarray(self.normalized, dtype=float)


def normalize(values) -> tuple[np.ndarray, bool]:
    """Min-max scale to [0, 1]; a flat window maps to all 0.5 (flagged)."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise ValueError("window must have at least 2 samples")
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return np.full_like(v, 0.5), True
    return (v - lo) / (hi - lo), False


def extract_windows(series, events, w: int = 10) -> tuple[list[SignalWindow], int]:
    """Windows of ``w`` samples around each event time.

    ceil(w/2) samples precede the event sample.  Windows that would overlap
    a series boundary are dropped and counted (second return value).
    """
    if w < 2:
        raise ValueError(f"window length must be >= 2, got {w}")
    before = math.ceil(w / 2)
    windows: list[SignalWindow] = []
    dropped = 0
    times = series.times
    for t_event in np.atleast_1d(np.asarray(events, dtype=float)):
        i = int(np.searchsorted(times, t_event))
        if i >= len(times) or not math.isclose(times[i], t_event,
                                               rel_tol=0, abs_tol=1e-12):
            if i > 0 and math.isclose(times[i - 1], t_event, rel_tol=0, abs_tol=1e-12):
                i -= 1
            else:
                raise ValueError(f"event time {t_event!r} is not a sample time")
        start = i - before
        stop = start + w
        if start < 0 or stop > len(times):
            dropped += 1
            continue
        raw = series.values[start:stop]
        norm, flat = normalize(raw)
        windows.append(SignalWindow(
            center_time=float(t_event),
            raw=raw.copy(),
            normalized=norm,
            position=(float(series.positions[i, 0]), float(series.positions[i, 1])),
            layer_index=int(series.layer_index[i]),
            flat=flat,
        ))
    return windows, dropped


@dataclass
class ClusterResult:
    """Density-clustering labels (-1 = noise) plus class annotations."""

    labels: np.ndarray
    eps: float
    min_samples: int
    metric: str = "euclidean"
    classes: dict[int, str] | None = None

    @property
    def n_clusters(self) -> int:
        return len({l for l in self.labels if l >= 0})


def _neighbor_lists(points: np.ndarray, eps: float) -> list[np.ndarray]:
    """Indices within eps (inclusive, self included) for every point."""
    n = len(points)
    nbrs = []
    eps_sq = eps * eps
    block = max(1, int(2e7 // max(n, 1)))
    for start in range(0, n, block):
        chunk = points[start:start + block]
        d2 = ((chunk[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        for row in d2:
            nbrs.append(np.flatnonzero(row <= eps_sq))
    return nbrs


def dbscan(points, eps: float, min_samples: int) -> np.ndarray:
    """Density-based clustering of row vectors; returns labels (-1 noise).

    Core points have at least ``min_samples`` neighbors within ``eps``
    (themselves included).  Clusters are grown in input order, so a border
    point reachable from several clusters joins the cluster seeded
    earliest.
    """
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps!r}")
    if min_samples < 1:
        raise ValueError(f"min_samples must be >= 1, got {min_samples}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        pts = pts.reshape(len(pts), -1)
    n = len(pts)
    labels = np.full(n, -1, dtype=int)
    if n == 0:
        return labels
    nbrs = _neighbor_lists(pts, eps)
    core = np.array([len(nb) >= min_samples for nb in nbrs])

    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        # breadth-first expansion over density-reachable points
        visited[i] = True
        labels[i] = cluster
        queue = list(nbrs[i])
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] == -1:
                labels[j] = cluster
            if not visited[j]:
                visited[j] = True
                if core[j]:
                    queue.extend(nbrs[j])
        cluster += 1
    return labels


def _mean_shape_is_spike(shape: np.ndarray) -> bool:
    """Maximum no later than the event sample, then a decaying trend.

    The event sample sits at index ceil(w/2), the first sample of the
    second half, so 'first half' is inclusive of it.
    """
    w = len(shape)
    k = int(np.argmax(shape))
    if k > math.ceil(w / 2):
        return False
    tail = shape[k:]
    if len(tail) < 2:
        return False
    slope = np.polyfit(np.arange(len(tail)), tail, 1)[0]
    return slope < 0


def _mean_shape_is_smooth_rise(shape: np.ndarray) -> bool:
    """Maximum past the event sample, or a rise spanning more than half."""
    w = len(shape)
    k = int(np.argmax(shape))
    if k > math.ceil(w / 2):
        return True
    rise = k - int(np.argmin(shape[:k + 1]))
    return rise > w / 2


def _boundary_points(patterns: list[ScanPattern]) -> np.ndarray:
    """Laser-on chord endpoints; they trace the part boundary densely."""
    pts = []
    for p in patterns:
        for s in p.segments:
            if s.laser_on:
                pts.append(s.start)
                pts.append(s.end)
    return np.asarray(pts) if pts else np.empty((0, 2))


def _min_distances(positions: np.ndarray, targets: np.ndarray) -> np.ndarray:
    if len(targets) == 0:
        return np.full(len(positions), np.inf)
    d = np.hypot(positions[:, None, 0] - targets[None, :, 0],
                 positions[:, None, 1] - targets[None, :, 1])
    return d.min(axis=1)


def coregister_and_classify(
    result: ClusterResult,
    windows: list[SignalWindow],
    patterns,
    turn_radius: float = 0.2,
) -> ClusterResult:
    """Annotate clusters against the scan trajectory.

    A cluster is the turning-point class when >= 80% of its windows lie
    within ``turn_radius`` of a re-entry event and its mean normalized
    shape spikes early then decays; the boundary class when >= 80% lie near
    the part boundary with a smoother rise; anything else (and noise) is
    residual.
    """
    if isinstance(patterns, ScanPattern):
        patterns = [patterns]
    if len(windows) != len(result.labels):
        raise ValueError("windows and labels must have equal length")

    positions = np.asarray([w.position for w in windows], dtype=float).reshape(-1, 2)
    bpts = _boundary_points(patterns)
    if len(positions) and len(bpts):
        span = max(np.ptp(bpts[:, 0]), np.ptp(bpts[:, 1]), 1e-9)
        margin = 0.5 * span + 10.0 * turn_radius
        cx, cy = bpts[:, 0].mean(), bpts[:, 1].mean()
        off = np.hypot(positions[:, 0] - cx, positions[:, 1] - cy)
        if np.any(off > margin):
            raise FrameMismatchError(
                "window positions fall far outside the pattern footprint; "
                "series and pattern are probably in different frames")

    reentry = np.asarray([e.position for p in patterns
                          for e in turning_points(p) if e.kind == "re-entry"])
    reentry = reentry.reshape(-1, 2)
    d_turn = _min_distances(positions, reentry)
    d_bnd = _min_distances(positions, bpts)

    classes: dict[int, str] = {-1: CLASS_RESIDUAL}
    for label in sorted({int(l) for l in result.labels if l >= 0}):
        members = np.flatnonzero(result.labels == label)
        frac_turn = float(np.mean(d_turn[members] <= turn_radius))
        frac_bnd = float(np.mean(d_bnd[members] <= turn_radius))
        mean_shape = np.mean([windows[i].normalized for i in members], axis=0)
        if frac_turn >= PROXIMITY_FRACTION and _mean_shape_is_spike(mean_shape):
            classes[label] = CLASS_TURNING
        elif frac_bnd >= PROXIMITY_FRACTION and _mean_shape_is_smooth_rise(mean_shape):
            classes[label] = CLASS_BOUNDARY
        else:
            classes[label] = CLASS_RESIDUAL
    return replace(result, classes=classes)


def save_windows(windows: list[SignalWindow], result: ClusterResult, path,
                 provenance: dict | None = None) -> None:
    """Tabular export: window id, t, x, y, layer, label, class."""
    from ._tabular import write_table
    classes = result.classes or {}
    rows = []
    for i, (w, label) in enumerate(zip(windows, result.labels)):
        rows.append((i, w.center_time, w.position[0], w.position[1],
                     w.layer_index, int(label),
                     classes.get(int(label), CLASS_RESIDUAL)))
    with open(path, "w") as fh:
        from ._tabular import provenance_lines
        fh.write("# pbflab cluster windows v1\n")
        for line in provenance_lines(provenance):
            fh.write(line)
        fh.write(f"# eps={result.eps!r}\n")
        fh.write(f"# min_samples={result.min_samples}\n")
        fh.write("# columns: window t x y layer label class\n")
        for r in rows:
            fh.write(f"{r[0]} {r[1]!r} {r[2]!r} {r[3]!r} {r[4]} {r[5]} {r[6]}\n")
