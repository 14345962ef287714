"""On-axis photodiode synthesis and build-plane intensity maps.

The synthetic photodiode integrates T^4 (Stefan-Boltzmann scaling) over
the top-surface cells within its field of view around the focus; samples
are binned by their co-registered part-frame position into per-cell
max/mean/sum maps.  Intensity is in arbitrary units set by ``gain``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from ._tabular import format_value, provenance_lines
from .thermal.field import ThermalField
from .thermal.stepper import PhotodiodeSamples

__all__ = [
    "SignalSeries",
    "IntensityMap",
    "sample_photodiode",
    "make_photodiode_sampler",
    "accumulate_map",
    "threshold_events",
    "save_series",
    "load_series",
    "save_map",
    "load_map",
]

#: Field-of-view radius as a multiple of the beam spot radius.
FOV_SPOT_MULTIPLE = 3.0

_STATISTICS = ("max", "mean", "sum")


@dataclass
class SignalSeries:
    """Photodiode samples with co-registered positions (part-frame mm)."""

    times: np.ndarray
    values: np.ndarray
    positions: np.ndarray   # (n, 2) mm
    layer_index: np.ndarray  # (n,) int

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.layer_index = np.asarray(self.layer_index, dtype=int)
        n = len(self.times)
        if not (len(self.values) == len(self.positions) == len(self.layer_index) == n):
            raise ValueError("series columns must have equal length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.values < 0):
            raise ValueError("values must be >= 0")

    def __len__(self) -> int:
        return len(self.times)

    @classmethod
    def from_samples(cls, samples: PhotodiodeSamples) -> "SignalSeries":
        return cls(times=samples.times, values=samples.values,
                   positions=np.column_stack([samples.x, samples.y]),
                   layer_index=samples.layer)

    def for_layer(self, layer: int) -> "SignalSeries":
        m = self.layer_index == layer
        return SignalSeries(self.times[m], self.values[m],
                            self.positions[m], self.layer_index[m])


def _quartic_fov_sum(top: np.ndarray, dx: float, focus_xy_m, r_fov: float) -> float:
    """Sum of T^4 * cell_area over top cells within the FOV (unscaled)."""
    nx, ny = top.shape
    half = int(math.ceil(r_fov / dx)) + 1
    ic = int(math.floor(focus_xy_m[0] / dx))
    jc = int(math.floor(focus_xy_m[1] / dx))
    i0, i1 = max(ic - half, 0), min(ic + half + 1, nx)
    j0, j1 = max(jc - half, 0), min(jc + half + 1, ny)
    if i0 >= i1 or j0 >= j1:
        return 0.0
    xs = (np.arange(i0, i1) + 0.5) * dx - focus_xy_m[0]
    ys = (np.arange(j0, j1) + 0.5) * dx - focus_xy_m[1]
    mask = (xs[:, None] ** 2 + ys[None, :] ** 2) <= r_fov * r_fov
    window = top[i0:i1, j0:j1]
    t4 = window[mask] ** 4
    return float(t4.sum() * dx * dx)


def sample_photodiode(field: ThermalField, focus_m, r_fov: float, gain: float) -> float:
    """On-axis intensity: gain * sum of T^4 * cell_area within the FOV.

    ``focus_m`` is the lateral (x, y) focus position in the grid frame (m).
    Pure read-only function of the field.
    """
    if not r_fov > 0:
        raise ValueError(f"r_fov must be > 0, got {r_fov!r}")
    return gain * _quartic_fov_sum(field.top, field.dx, focus_m, r_fov)


def make_photodiode_sampler(r_fov: float, gain: float,
                            noise_sigma: float = 0.0, rng=None):
    """Sampler callable for :func:`pbflab.thermal.run`.

    Optional additive Gaussian noise (clamped at zero) uses the supplied
    seeded generator for reproducibility.
    """
    if noise_sigma > 0 and rng is None:
        rng = np.random.default_rng(0)

    def sampler(top: np.ndarray, dx: float, focus_xy_m) -> float:
        v = gain * _quartic_fov_sum(top, dx, focus_xy_m, r_fov)
        if noise_sigma > 0:
            v = max(v + rng.normal(0.0, noise_sigma), 0.0)
        return v

    return sampler


@dataclass
class IntensityMap:
    """Per-cell statistic of binned signal samples over the build plane."""

    values: np.ndarray           # (nx, ny)
    counts: np.ndarray           # samples per cell
    cell_mm: float
    origin_mm: tuple[float, float]
    statistic: str

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.values.shape
        xs = self.origin_mm[0] + (np.arange(nx) + 0.5) * self.cell_mm
        ys = self.origin_mm[1] + (np.arange(ny) + 0.5) * self.cell_mm
        return xs, ys

    def region_mean(self, mask: np.ndarray, covered_only: bool = True) -> float:
        """Mean map value over a cell mask (cells with samples by default)."""
        sel = mask & (self.counts > 0) if covered_only else mask
        if not np.any(sel):
            return 0.0
        return float(self.values[sel].mean())

    def annulus_mask(self, center_mm, r_inner: float, r_outer: float) -> np.ndarray:
        xs, ys = self.cell_centers()
        r = np.hypot(xs[:, None] - center_mm[0], ys[None, :] - center_mm[1])
        return (r >= r_inner) & (r <= r_outer)


def accumulate_map(
    series_list,
    cell: float,
    statistic: str = "max",
    extent=None,
) -> IntensityMap:
    """Bin samples from one or more series into a per-cell statistic map.

    ``extent`` is ((xmin, xmax), (ymin, ymax)) in mm; when omitted it is the
    bounding box of the samples snapped outward to the cell size.  Empty
    input yields an empty map with zero-filled metadata.
    """
    if statistic not in _STATISTICS:
        raise ValueError(f"statistic must be one of {_STATISTICS}, got {statistic!r}")
    if not cell > 0:
        raise ValueError(f"cell must be > 0, got {cell!r}")
    if isinstance(series_list, SignalSeries):
        series_list = [series_list]
    series_list = [s for s in series_list if len(s)]

    if not series_list:
        if extent is None:
            return IntensityMap(np.zeros((0, 0)), np.zeros((0, 0), dtype=int),
                                cell, (0.0, 0.0), statistic)
        (x0, x1), (y0, y1) = extent
        nx = max(int(math.ceil((x1 - x0) / cell)), 1)
        ny = max(int(math.ceil((y1 - y0) / cell)), 1)
        return IntensityMap(np.zeros((nx, ny)), np.zeros((nx, ny), dtype=int),
                            cell, (x0, y0), statistic)

    pos = np.concatenate([s.positions for s in series_list])
    val = np.concatenate([s.values for s in series_list])
    if extent is None:
        x0 = math.floor(pos[:, 0].min() / cell) * cell
        y0 = math.floor(pos[:, 1].min() / cell) * cell
        x1 = math.ceil(pos[:, 0].max() / cell) * cell
        y1 = math.ceil(pos[:, 1].max() / cell) * cell
        if x1 <= x0:
            x1 = x0 + cell
        if y1 <= y0:
            y1 = y0 + cell
    else:
        (x0, x1), (y0, y1) = extent
    nx = max(int(math.ceil((x1 - x0) / cell - 1e-12)), 1)
    ny = max(int(math.ceil((y1 - y0) / cell - 1e-12)), 1)

    i = np.clip(((pos[:, 0] - x0) / cell).astype(int), 0, nx - 1)
    j = np.clip(((pos[:, 1] - y0) / cell).astype(int), 0, ny - 1)
    flat = i * ny + j

    counts = np.bincount(flat, minlength=nx * ny).reshape(nx, ny)
    if statistic == "sum":
        values = np.bincount(flat, weights=val, minlength=nx * ny).reshape(nx, ny)
    elif statistic == "mean":
        sums = np.bincount(flat, weights=val, minlength=nx * ny).reshape(nx, ny)
        values = np.divide(sums, counts, out=np.zeros_like(sums),
                           where=counts > 0)
    else:  # max
        values = np.zeros(nx * ny)
        np.maximum.at(values, flat, val)
        values = values.reshape(nx, ny)

    return IntensityMap(values=values, counts=counts, cell_mm=cell,
                        origin_mm=(x0, y0), statistic=statistic)


def threshold_events(
    series: SignalSeries,
    threshold: float,
    direction: str = "above",
    merge_window: int = 10,
) -> np.ndarray:
    """Times where the signal crosses the threshold in the given direction.

    Consecutive beyond-threshold excursions closer than ``merge_window``
    samples are merged; each merged excursion reports the time of its
    extremal sample (max for 'above', min for 'below').
    """
    if direction not in ("above", "below"):
        raise ValueError(f"direction must be 'above' or 'below', got {direction!r}")
    v = series.values
    if len(v) == 0:
        return np.empty(0)
    beyond = v > threshold if direction == "above" else v < threshold
    idx = np.flatnonzero(beyond)
    if len(idx) == 0:
        return np.empty(0)
    groups: list[list[int]] = [[idx[0]]]
    for k in idx[1:]:
        if k - groups[-1][-1] < merge_window:
            groups[-1].append(k)
        else:
            groups.append([k])
    events = []
    for g in groups:
        g = np.asarray(g)
        seg = v[g]
        pick = g[np.argmax(seg)] if direction == "above" else g[np.argmin(seg)]
        events.append(series.times[pick])
    return np.asarray(events)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def save_series(series: SignalSeries, path, provenance: dict | None = None) -> None:
    from ._tabular import write_table
    rows = zip(series.times, series.values, series.positions[:, 0],
               series.positions[:, 1], series.layer_index)
    write_table(path, ["t", "value", "x", "y", "layer"], rows,
                kind="signal series", provenance=provenance)


def load_series(path) -> SignalSeries:
    from ._tabular import read_table
    _, _, data = read_table(path)
    if data.size == 0:
        return SignalSeries(np.empty(0), np.empty(0), np.empty((0, 2)),
                            np.empty(0, dtype=int))
    return SignalSeries(times=data[:, 0], values=data[:, 1],
                        positions=data[:, 2:4],
                        layer_index=data[:, 4].astype(int))


def save_map(m: IntensityMap, path, provenance: dict | None = None) -> None:
    """Plain-text grid (one x-row per line) with a commented metadata header."""
    with open(path, "w") as fh:
        fh.write("# pbflab intensity map v1\n")
        for line in provenance_lines(provenance):
            fh.write(line)
        fh.write(f"# statistic={m.statistic}\n")
        fh.write(f"# cell_mm={m.cell_mm!r}\n")
        fh.write(f"# origin_x={m.origin_mm[0]!r}\n")
        fh.write(f"# origin_y={m.origin_mm[1]!r}\n")
        fh.write(f"# shape={m.values.shape[0]} {m.values.shape[1]}\n")
        for row in m.values:
            fh.write(" ".join(format_value(v) for v in row) + "\n")
        # counts ride along as comments so the body stays a plain grid
        fh.write("# counts:\n")
        for row in m.counts:
            fh.write("# " + " ".join(str(int(c)) for c in row) + "\n")


def load_map(path) -> IntensityMap:
    meta: dict[str, str] = {}
    values_rows: list[list[float]] = []
    counts_rows: list[list[float]] = []
    in_counts = False
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body == "counts:":
                    in_counts = True
                elif in_counts:
                    counts_rows.append([float(tok) for tok in body.split()])
                elif "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            values_rows.append([float(tok) for tok in line.split()])
    values = np.asarray(values_rows, dtype=float) if values_rows else np.zeros((0, 0))
    counts = (np.asarray(counts_rows, dtype=float).astype(int)
              if counts_rows else np.zeros_like(values, dtype=int))
    return IntensityMap(values=values, counts=counts,
                        cell_mm=float(meta["cell_mm"]),
                        origin_mm=(float(meta["origin_x"]), float(meta["origin_y"])),
                        statistic=meta["statistic"])
