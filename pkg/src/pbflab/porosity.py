"""Radial porosity profiles from defect records.

Defects (pore centroids plus volumes, part-frame mm / mm^3) are ingested
from headered delimited text, banded by height, assigned to concentric
rings by centroid radius, and turned into per-ring relative densities

    RD = (V_ring - sum V_defect) / V_ring.

A synthetic defect generator seeds pores from a surface melt metric so the
thermal stage can close the loop without measured data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .thermal.stepper import SurfaceMetricMap

__all__ = [
    "DefectRecord",
    "IngestResult",
    "RingProfile",
    "RateModel",
    "ingest_defects",
    "save_defects",
    "ring_profile",
    "band_compare",
    "synth_defects",
    "save_ring_profile",
]

#: Allowed overshoot (mm) of a defect's radius beyond the part radius
#: before it is counted as overflow instead of assigned to the last ring.
RADIUS_TOLERANCE_MM = 1e-6


@dataclass(frozen=True)
class DefectRecord:
    """One detected pore: centroid (part-frame mm) and volume (mm^3)."""

    centroid: tuple[float, float, float]
    volume: float
    equivalent_diameter: float | None = None

    def __post_init__(self):
        if not self.volume > 0:
            raise ValueError(f"volume must be > 0, got {self.volume!r}")

    @classmethod
    def from_volume(cls, centroid, volume: float) -> "DefectRecord":
        d = (6.0 * volume / math.pi) ** (1.0 / 3.0)
        return cls(tuple(float(c) for c in centroid), float(volume), d)


@dataclass
class IngestResult:
    records: list[DefectRecord]
    rejects: list[tuple[int, str, str]]  # (line number, reason, raw line)


def ingest_defects(path, frame_transform=(0.0, 0.0, 0.0)) -> IngestResult:
    """Read defect records and apply the part-frame offset.

    ``frame_transform`` is the (dx, dy, dz) translation (mm) taking file
    coordinates into the part frame.  Malformed rows are collected in the
    rejects report, never silently dropped; a file whose every data row is
    malformed raises.
    """
    dx, dy, dz = (float(v) for v in frame_transform)
    if not all(math.isfinite(v) for v in (dx, dy, dz)):
        raise ValueError("frame transform must be finite")
    records: list[DefectRecord] = []
    rejects: list[tuple[int, str, str]] = []
    n_data_rows = 0
    try:
        fh = open(path)
    except OSError as exc:
        raise ValueError(f"cannot read defect file {path}: {exc}") from exc
    with fh:
        columns = None
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            toks = line.replace(",", " ").split()
            if columns is None and any(not _is_number(t) for t in toks):
                columns = [t.lower() for t in toks]
                missing = [c for c in ("x", "y", "z", "volume") if c not in columns]
                if missing:
                    raise ValueError(f"defect file header lacks column(s) {missing}")
                continue
            n_data_rows += 1
            if columns is None:
                columns = ["x", "y", "z", "volume"]
            if len(toks) != len(columns):
                rejects.append((lineno, f"expected {len(columns)} fields, got {len(toks)}", line))
                continue
            try:
                row = {c: float(t) for c, t in zip(columns, toks)}
            except ValueError:
                rejects.append((lineno, "non-numeric field", line))
                continue
            if not row["volume"] > 0:
                rejects.append((lineno, "volume must be > 0", line))
                continue
            records.append(DefectRecord.from_volume(
                (row["x"] + dx, row["y"] + dy, row["z"] + dz), row["volume"]))
    if n_data_rows > 0 and not records:
        raise ValueError(f"defect file {path} contains no valid rows "
                         f"({len(rejects)} rejected)")
    return IngestResult(records=records, rejects=rejects)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def save_defects(records, path, provenance: dict | None = None) -> None:
    """Write records in the ingestable format (units mm / mm^3)."""
    from ._tabular import provenance_lines
    with open(path, "w") as fh:
        fh.write("# pbflab defect records v1\n")
        for line in provenance_lines(provenance):
            fh.write(line)
        fh.write("# units: x y z in mm, volume in mm^3\n")
        fh.write("x y z volume\n")
        for r in records:
            fh.write(f"{r.centroid[0]!r} {r.centroid[1]!r} "
                     f"{r.centroid[2]!r} {r.volume!r}\n")


@dataclass
class RingProfile:
    """Ring-dissected relative density over one height band."""

    center: tuple[float, float]
    dr: float
    band: tuple[float, float]
    r_inner: np.ndarray
    r_outer: np.ndarray
    ring_volume: np.ndarray       # mm^3
    defect_volume: np.ndarray     # mm^3 per ring
    relative_density: np.ndarray
    overflow_count: int = 0
    overflow_volume: float = 0.0

    @property
    def n_rings(self) -> int:
        return len(self.r_inner)

    @property
    def r_mid(self) -> np.ndarray:
        return 0.5 * (self.r_inner + self.r_outer)


def _ring_edges(radius: float, dr: float) -> np.ndarray:
    n_full = int(math.floor(radius / dr + 1e-12))
    edges = [k * dr for k in range(n_full + 1)]
    if edges[-1] < radius - 1e-12 * max(radius, 1.0):
        edges.append(radius)
    else:
        edges[-1] = radius
    return np.asarray(edges)


def ring_profile(
    defects,
    center=(0.0, 0.0),
    radius: float = 1.5,
    dr: float = 0.2,
    band: tuple[float, float] = (0.0, 1.0),
) -> RingProfile:
    """Per-ring relative density for defects inside one height band.

    Rings are contiguous from 0 to the part radius; the final ring may be
    partial and carries its true partial volume.  Each in-band defect is
    assigned wholly to the ring containing its centroid radius; centroids
    beyond radius + tolerance land in the overflow bucket.  The band is
    half-open: z_lo <= z < z_hi.
    """
    if not dr > 0:
        raise ValueError(f"dr must be > 0, got {dr!r}")
    if not radius > 0:
        raise ValueError(f"radius must be > 0, got {radius!r}")
    z_lo, z_hi = band
    if not z_hi > z_lo:
        raise ValueError(f"band must satisfy z_hi > z_lo, got {band!r}")

    edges = _ring_edges(radius, dr)
    n = len(edges) - 1
    height = z_hi - z_lo
    ring_vol = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2) * height
    defect_vol = np.zeros(n)
    overflow_count = 0
    overflow_volume = 0.0

    for d in defects:
        x, y, z = d.centroid
        if not (z_lo <= z < z_hi):
            continue
        r = math.hypot(x - center[0], y - center[1])
        if r > radius + RADIUS_TOLERANCE_MM:
            overflow_count += 1
            overflow_volume += d.volume
            continue
        k = min(int(r / dr), n - 1)
        defect_vol[k] += d.volume

    rd = (ring_vol - defect_vol) / ring_vol
    return RingProfile(center=tuple(center), dr=dr, band=(z_lo, z_hi),
                       r_inner=edges[:-1], r_outer=edges[1:],
                       ring_volume=ring_vol, defect_volume=defect_vol,
                       relative_density=rd,
                       overflow_count=overflow_count,
                       overflow_volume=overflow_volume)


def band_compare(defects, bands, center=(0.0, 0.0), radius: float = 1.5,
                 dr: float = 0.2) -> list[RingProfile]:
    """One profile per height band with identical ring geometry.

    Bands must not overlap (half-open, so touching bands are fine).
    """
    spans = sorted((float(lo), float(hi)) for lo, hi in bands)
    for (lo0, hi0), (lo1, _) in zip(spans, spans[1:]):
        if lo1 < hi0 - 1e-12:
            raise ValueError(f"bands overlap: [{lo0}, {hi0}) and [{lo1}, ...)")
    return [ring_profile(defects, center=center, radius=radius, dr=dr, band=b)
            for b in bands]


@dataclass(frozen=True)
class RateModel:
    """Pore seeding rate p0 * exp(-k * t_above_liquidus), pores per mm^3."""

    p0: float
    k: float

    def __post_init__(self):
        if self.p0 < 0:
            raise ValueError(f"p0 must be >= 0, got {self.p0!r}")


def synth_defects(
    metric_map: SurfaceMetricMap,
    rate_model: RateModel,
    seed: int,
    *,
    center=(0.0, 0.0),
    radius: float = 1.5,
    z_range: tuple[float, float] = (0.0, 1.0),
    volume_median: float = 1e-5,
    volume_sigma: float = 0.5,
) -> list[DefectRecord]:
    """Poisson-seeded pores thinned by the local melt metric.

    Per fused map cell inside the footprint the expected count is
    p0 * exp(-k * metric) * cell_volume; positions are uniform in the cell
    and the z range, volumes lognormal around ``volume_median``.
    Cells that never melted (metric == 0) host no solid and therefore no
    internal pores; a zero-power map yields an empty list.  Deterministic
    for a fixed seed.
    """
    xs, ys = metric_map.cell_centers()
    if not (xs.min() <= center[0] - radius + metric_map.cell_mm
            and xs.max() >= center[0] + radius - metric_map.cell_mm
            and ys.min() <= center[1] - radius + metric_map.cell_mm
            and ys.max() >= center[1] + radius - metric_map.cell_mm):
        raise ValueError("metric map does not cover the part footprint")
    z_lo, z_hi = z_range
    if not z_hi > z_lo:
        raise ValueError(f"z_range must satisfy z_hi > z_lo, got {z_range!r}")

    rng = np.random.default_rng(seed)
    cell = metric_map.cell_mm
    r = np.hypot(xs[:, None] - center[0], ys[None, :] - center[1])
    inside = (r <= radius) & (metric_map.values > 0.0)
    rate = rate_model.p0 * np.exp(-rate_model.k * metric_map.values)
    lam = rate * inside * cell * cell * (z_hi - z_lo)
    counts = rng.poisson(lam)
    total = int(counts.sum())
    if total == 0:
        return []

    ii, jj = np.nonzero(counts)
    reps = counts[ii, jj]
    cx = np.repeat(xs[ii] - 0.5 * cell, reps)
    cy = np.repeat(ys[jj] - 0.5 * cell, reps)
    px = cx + rng.random(total) * cell
    py = cy + rng.random(total) * cell
    pz = z_lo + rng.random(total) * (z_hi - z_lo)
    vols = rng.lognormal(mean=math.log(volume_median), sigma=volume_sigma,
                         size=total)
    return [DefectRecord.from_volume((x, y, z), v)
            for x, y, z, v in zip(px, py, pz, vols)]


def save_ring_profile(profile: RingProfile, path,
                      provenance: dict | None = None) -> None:
    """Tabular export: ring midpoint radius vs relative density (plus volumes)."""
    from ._tabular import write_table
    rows = zip(profile.r_mid, profile.r_inner, profile.r_outer,
               profile.ring_volume, profile.defect_volume,
               profile.relative_density)
    prov = dict(provenance or {})
    prov.update({
        "band_lo": repr(profile.band[0]),
        "band_hi": repr(profile.band[1]),
        "overflow_count": str(profile.overflow_count),
        "overflow_volume": repr(profile.overflow_volume),
    })
    write_table(path, ["r_mid", "r_inner", "r_outer", "ring_volume",
                       "defect_volume", "relative_density"],
                rows, kind="ring profile", provenance=prov)
