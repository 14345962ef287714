"""Explicit time stepping: backend selection, single steps, and full runs.

The hot per-step kernel exists twice (compiled Cython and NumPy); the
compiled one is preferred when importable.  Override with the environment
variable ``PBFLAB_BACKEND=cython|numpy`` or the ``backend=`` argument.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from ..scanpath import ScanPattern
from .field import LaserState, ThermalField
from .material import MaterialProps
from .probes import ProbeHistory, probe_metrics
from .source import deposit_energy

__all__ = [
    "StabilityError",
    "PhotodiodeSamples",
    "SurfaceMetricMap",
    "ThermalRunResult",
    "available_backends",
    "get_backend",
    "get_backend_name",
    "max_stable_dt",
    "default_dt",
    "step",
    "run",
]

#: Safety factor applied to the 3-D explicit stability bound.
DEFAULT_SAFETY = 0.4


class StabilityError(ValueError):
    """Requested time step exceeds the explicit stability limit."""


from . import _stencil_np

try:
    from . import _stencil_cy
except ImportError:
    _stencil_cy = None


def available_backends() -> list[str]:
    names = ["numpy"]
    if _stencil_cy is not None:
        names.insert(0, "cython")
    return names


def get_backend(name: str | None = None):
    """Resolve a kernel module by name, env var, or availability."""
    name = name or os.environ.get("PBFLAB_BACKEND") or None
    if name is None:
        return _stencil_cy if _stencil_cy is not None else _stencil_np
    if name == "numpy":
        return _stencil_np
    if name == "cython":
        if _stencil_cy is None:
            raise RuntimeError("compiled stencil kernel is not available")
        return _stencil_cy
    raise ValueError(f"unknown backend {name!r} (expected 'cython' or 'numpy')")


def get_backend_name(name: str | None = None) -> str:
    return get_backend(name).name


def max_stable_dt(field: ThermalField) -> float:
    """Largest admissible explicit step dx^2 rho c_p / (6 lambda)."""
    m = field.material
    return field.dx ** 2 * m.density * m.heat_capacity / (6.0 * m.conductivity)


def default_dt(field: ThermalField, safety: float = DEFAULT_SAFETY) -> float:
    return safety * max_stable_dt(field)


def _check_dt(field: ThermalField, dt: float) -> None:
    limit = max_stable_dt(field)
    if dt > limit:
        raise StabilityError(
            f"dt={dt!r} exceeds the explicit stability limit; "
            f"maximum admissible dt is {limit!r} s")
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")


def _kernel_args(mat: MaterialProps) -> tuple:
    return (mat.density, mat.conductivity, mat.heat_capacity,
            mat.t_solidus, mat.t_liquidus, mat.latent_heat)


def step(field: ThermalField, laser: LaserState, dt: float,
         backend: str | None = None) -> ThermalField:
    """One explicit step with the beam held at ``laser.focus``.

    Returns a new field; ``dt`` above the stability bound raises
    :class:`StabilityError` naming the maximum admissible step.
    """
    _check_dt(field, dt)
    kern = get_backend(backend)
    nx, ny, _ = field.shape
    deposit = np.zeros((nx, ny))
    if laser.power > 0:
        deposit_energy(deposit, field, laser.focus[:2],
                       laser.absorptivity * laser.power * dt, laser.r_spot)
    out = field.copy()
    kern.step_kernel(field.temperatures, out.temperatures, deposit,
                     laser.power > 0, dt, field.dx, *_kernel_args(field.material))
    out.apply_fixed_faces()
    return out


@dataclass
class PhotodiodeSamples:
    """Raw on-axis samples recorded during a run (laser-on only)."""

    times: np.ndarray      # s
    values: np.ndarray     # intensity units
    x: np.ndarray          # part-frame mm
    y: np.ndarray          # part-frame mm
    layer: np.ndarray      # int


@dataclass
class SurfaceMetricMap:
    """Per-cell scalar over the top surface (part-frame mm grid)."""

    values: np.ndarray          # (nx, ny)
    cell_mm: float
    origin_mm: tuple[float, float]  # part-frame position of the grid corner

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.values.shape
        xs = self.origin_mm[0] + (np.arange(nx) + 0.5) * self.cell_mm
        ys = self.origin_mm[1] + (np.arange(ny) + 0.5) * self.cell_mm
        return xs, ys

    def save(self, path, provenance: dict | None = None) -> None:
        from .._tabular import provenance_lines, format_value
        with open(path, "w") as fh:
            fh.write("# pbflab surface metric map v1\n")
            for line in provenance_lines(provenance):
                fh.write(line)
            fh.write(f"# cell_mm={self.cell_mm!r}\n")
            fh.write(f"# origin_x={self.origin_mm[0]!r}\n")
            fh.write(f"# origin_y={self.origin_mm[1]!r}\n")
            fh.write(f"# shape={self.values.shape[0]} {self.values.shape[1]}\n")
            for row in self.values:
                fh.write(" ".join(format_value(v) for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "SurfaceMetricMap":
        meta: dict[str, str] = {}
        rows = []
        with open(path) as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        key, _, val = body.partition("=")
                        meta[key.strip()] = val.strip()
                    continue
                rows.append([float(tok) for tok in line.split()])
        values = np.asarray(rows, dtype=float)
        return cls(values=values,
                   cell_mm=float(meta["cell_mm"]),
                   origin_mm=(float(meta["origin_x"]), float(meta["origin_y"])))


@dataclass
class ThermalRunResult:
    field: ThermalField
    histories: list[ProbeHistory]
    samples: PhotodiodeSamples | None = None
    liquidus_map: SurfaceMetricMap | None = None
    dt: float = 0.0
    t_final: float = 0.0
    deposited_energy: float = 0.0


class _SegmentCursor:
    """Monotone-time lookup over the flattened segment list."""

    def __init__(self, patterns: list[ScanPattern]):
        self.entries = []
        for p in patterns:
            for s in p.segments:
                self.entries.append((s.t_start, s.t_end, s, p))
        self.entries.sort(key=lambda e: e[0])
        self.idx = 0

    def locate(self, t: float):
        """(segment, pattern) containing time t, else None.  t must not decrease."""
        while self.idx < len(self.entries) and self.entries[self.idx][1] < t:
            self.idx += 1
        if self.idx < len(self.entries):
            t0, t1, seg, pat = self.entries[self.idx]
            if t0 <= t <= t1:
                return seg, pat
        return None

    def on_overlaps(self, t0: float, t1: float):
        """Laser-on (sub)intervals overlapping [t0, t1).  Windows must not move backwards."""
        out = []
        i = self.idx
        while i < len(self.entries) and self.entries[i][1] <= t0:
            i += 1
        self.idx = i
        while i < len(self.entries) and self.entries[i][0] < t1:
            a0, a1, seg, _ = self.entries[i]
            if seg.laser_on:
                lo, hi = max(a0, t0), min(a1, t1)
                if hi > lo:
                    out.append((lo, hi, seg))
            i += 1
        return out


def _segment_position(seg, t: float) -> tuple[float, float]:
    frac = (t - seg.t_start) / (seg.t_end - seg.t_start)
    frac = min(max(frac, 0.0), 1.0)
    return (seg.start[0] + frac * (seg.end[0] - seg.start[0]),
            seg.start[1] + frac * (seg.end[1] - seg.start[1]))


def run(
    patterns: list[ScanPattern],
    field: ThermalField,
    laser: LaserState,
    probes_mm=None,
    sample_dt: float = 1e-5,
    *,
    origin_mm: tuple[float, float] = (0.0, 0.0),
    dt: float | None = None,
    settle_time: float = 0.0,
    photodiode=None,
    track_liquidus: bool = False,
    backend: str | None = None,
) -> ThermalRunResult:
    """Drive the field along the scan patterns and record observables.

    The focus follows each pattern's segments with the beam on only during
    laser-on segments; deposition is integrated exactly over sub-step
    on-intervals, so the total deposited energy equals absorptivity * P *
    t_on.  Probes (part-frame mm, z from the grid bottom) are sampled every
    ``sample_dt`` by trilinear interpolation.  ``photodiode`` is an optional
    callable (top_plane, dx_m, focus_xy_m) -> value evaluated at sample
    times while the laser is on.  ``origin_mm`` places the grid corner in
    the part frame.
    """
    live = [p for p in patterns if not p.is_empty]
    if not live:
        raise ValueError("no non-empty patterns to run")
    for a, b in zip(live, live[1:]):
        if b.t_start < a.t_end:
            raise ValueError("patterns must be time-ordered and non-overlapping")
    mat = field.material
    if dt is None:
        dt = default_dt(field)
    _check_dt(field, dt)

    probes_grid_m = np.empty((0, 3))
    if probes_mm is not None and len(probes_mm):
        probes_mm = np.atleast_2d(np.asarray(probes_mm, dtype=float))
        probes_grid_m = np.column_stack([
            (probes_mm[:, 0] - origin_mm[0]) * 1e-3,
            (probes_mm[:, 1] - origin_mm[1]) * 1e-3,
            probes_mm[:, 2] * 1e-3,
        ])
        inside = field.contains(probes_grid_m)
        if not np.all(inside):
            bad = np.flatnonzero(~inside).tolist()
            raise ValueError(f"probe(s) {bad} outside the simulated domain")

    t0 = live[0].t_start
    t_end = live[-1].t_end + settle_time
    n_steps = int(math.ceil((t_end - t0) / dt - 1e-12))

    kern = get_backend(backend)
    k_args = _kernel_args(mat)
    cur = field.copy()
    cur.apply_fixed_faces()
    nxt = cur.copy()
    nx, ny, _ = field.shape
    deposit = np.zeros((nx, ny))

    dep_cursor = _SegmentCursor(live)
    pos_cursor = _SegmentCursor(live)

    probe_times: list[float] = []
    probe_temps: list[np.ndarray] = []
    pd_rows: list[tuple] = [] if photodiode is not None else None
    liq = np.zeros((nx, ny)) if track_liquidus else None

    eta_p = laser.absorptivity * laser.power
    deposited = 0.0
    sample_idx = 0  # next sample time is t0 + sample_idx * sample_dt
    t = t0
    for _ in range(n_steps):
        t_next = t + dt
        has_dep = False
        if eta_p > 0:
            deposit[:, :] = 0.0
            for lo, hi, seg in dep_cursor.on_overlaps(t, t_next):
                pos = _segment_position(seg, 0.5 * (lo + hi))
                grid_xy = ((pos[0] - origin_mm[0]) * 1e-3,
                           (pos[1] - origin_mm[1]) * 1e-3)
                deposit_energy(deposit, cur, grid_xy, eta_p * (hi - lo), laser.r_spot)
                deposited += eta_p * (hi - lo)
                has_dep = True
        kern.step_kernel(cur.temperatures, nxt.temperatures, deposit, has_dep,
                         dt, field.dx, *k_args)
        nxt.apply_fixed_faces()
        cur, nxt = nxt, cur
        t = t_next
        if liq is not None:
            liq += dt * (cur.top > mat.t_liquidus)
        # at most one record per step; sample marks are t0 + k * sample_dt
        if t >= t0 + sample_idx * sample_dt - 1e-15:
            if len(probes_grid_m):
                probe_times.append(t)
                probe_temps.append(cur.interpolate(probes_grid_m))
            if pd_rows is not None:
                hit = pos_cursor.locate(t)
                if hit is not None and hit[0].laser_on:
                    seg, pat = hit
                    pos = _segment_position(seg, t)
                    focus_m = ((pos[0] - origin_mm[0]) * 1e-3,
                               (pos[1] - origin_mm[1]) * 1e-3)
                    value = photodiode(cur.top, field.dx, focus_m)
                    pd_rows.append((t, value, pos[0], pos[1], pat.layer_index))
            sample_idx = int(math.floor((t - t0) / sample_dt + 1e-12)) + 1

    histories = []
    if len(probes_grid_m):
        times = np.asarray(probe_times)
        temps = np.asarray(probe_temps)
        for i in range(probes_grid_m.shape[0]):
            h = ProbeHistory(
                position=(probes_mm[i, 0] * 1e-3, probes_mm[i, 1] * 1e-3,
                          probes_mm[i, 2] * 1e-3),
                times=times.copy(),
                temperatures=temps[:, i].copy(),
            )
            h.metrics = probe_metrics(h, mat)
            histories.append(h)

    samples = None
    if pd_rows is not None:
        arr = np.asarray(pd_rows, dtype=float) if pd_rows else np.empty((0, 5))
        samples = PhotodiodeSamples(
            times=arr[:, 0], values=arr[:, 1], x=arr[:, 2], y=arr[:, 3],
            layer=arr[:, 4].astype(int))

    liq_map = None
    if liq is not None:
        liq_map = SurfaceMetricMap(values=liq, cell_mm=field.dx * 1e3,
                                   origin_mm=origin_mm)

    return ThermalRunResult(field=cur, histories=histories, samples=samples,
                            liquidus_map=liq_map, dt=dt, t_final=t,
                            deposited_energy=deposited)
