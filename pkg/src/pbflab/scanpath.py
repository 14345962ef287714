"""Layer-wise line-hatch scan patterns and trajectory queries.

Coordinates are millimetres, times seconds, angles degrees.  A layer is a
serpentine sequence of laser-on hatch chords clipped to a circular part
footprint, connected by laser-off traverses; the hatch orientation rotates
by a fixed increment per layer.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace

__all__ = [
    "MachineParams",
    "CircleDomain",
    "ScanSegment",
    "ScanPattern",
    "TurnEvent",
    "PatternRangeError",
    "DEFAULT_MACHINE",
    "generate_layer",
    "generate_build",
    "position_at",
    "turning_points",
    "laser_on_path_length",
    "save_patterns",
    "load_patterns",
]

# Chords shorter than this are dropped (degenerate tangent lines).
_MIN_CHORD_MM = 1e-9

_SPEED_RTOL = 1e-9


class PatternRangeError(ValueError):
    """Query time lies outside the pattern's time span."""


@dataclass(frozen=True)
class MachineParams:
    """Build-process kinematics and beam geometry.

    laser_power W, scan_speed mm/s, hatch_distance mm, layer_thickness mm,
    rotation_increment deg/layer, spot_radius um (1/e^2 radius),
    base_angle deg (layer-0 hatch orientation).
    """

    laser_power: float
    scan_speed: float
    hatch_distance: float
    layer_thickness: float
    rotation_increment: float = 67.0
    spot_radius: float = 80.0
    base_angle: float = 0.0

    def __post_init__(self):
        problems = []
        for name in ("laser_power", "scan_speed", "hatch_distance",
                     "layer_thickness", "spot_radius"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not 0.0 <= self.base_angle < 180.0:
            problems.append(f"base_angle must be in [0, 180), got {self.base_angle!r}")
        if not 0.0 < self.rotation_increment < 180.0:
            problems.append(
                f"rotation_increment must be in (0, 180), got {self.rotation_increment!r}")
        if problems:
            raise ValueError("; ".join(problems))


#: Nominal 170 W / 1085 mm/s / 0.1 mm hatch / 20 um layer process.
DEFAULT_MACHINE = MachineParams(
    laser_power=170.0,
    scan_speed=1085.0,
    hatch_distance=0.1,
    layer_thickness=0.02,
)


@dataclass(frozen=True)
class CircleDomain:
    """Circular part footprint in the build plane (mm)."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius!r}")


@dataclass(frozen=True)
class ScanSegment:
    """One straight constant-speed move of the laser focus."""

    start: tuple[float, float]
    end: tuple[float, float]
    t_start: float
    t_end: float
    laser_on: bool

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end must exceed t_start ({self.t_start!r} -> {self.t_end!r})")

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def speed(self) -> float:
        return self.length / (self.t_end - self.t_start)


@dataclass(frozen=True)
class TurnEvent:
    """Laser departure from / re-entry onto the hatch at a line end."""

    time: float
    position: tuple[float, float]
    kind: str  # "re-entry" | "departure"


@dataclass(frozen=True)
class ScanPattern:
    """Time-parameterised scan trajectory for one layer."""

    layer_index: int
    z: float
    angle: float
    segments: tuple[ScanSegment, ...]
    _t_starts: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_t_starts", tuple(s.t_start for s in self.segments))

    @property
    def t_start(self) -> float:
        if not self.segments:
            raise PatternRangeError("pattern is empty")
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        if not self.segments:
            raise PatternRangeError("pattern is empty")
        return self.segments[-1].t_end

    @property
    def is_empty(self) -> bool:
        return not self.segments

    def shifted(self, dt: float) -> "ScanPattern":
        """Copy with all segment times offset by ``dt``."""
        segs = tuple(
            replace(s, t_start=s.t_start + dt, t_end=s.t_end + dt) for s in self.segments
        )
        return ScanPattern(self.layer_index, self.z, self.angle, segs)

    def validate(self, scan_speed: float | None = None) -> None:
        """Check time contiguity and, when given, the on-segment speed."""
        for k in range(1, len(self.segments)):
            if self.segments[k].t_start != self.segments[k - 1].t_end:
                raise ValueError(
                    f"segments {k - 1} and {k} are not contiguous in time")
        if scan_speed is not None:
            for k, s in enumerate(self.segments):
                if s.laser_on and abs(s.speed - scan_speed) > _SPEED_RTOL * scan_speed:
                    raise ValueError(
                        f"segment {k} speed {s.speed} != scan speed {scan_speed}")


def _hatch_angle(params: MachineParams, layer_index: int) -> float:
    return (params.base_angle + layer_index * params.rotation_increment) % 180.0


def generate_layer(
    params: MachineParams,
    domain: CircleDomain,
    layer_index: int,
    t0: float = 0.0,
) -> ScanPattern:
    """Serpentine hatch for one layer, clipped to the circular footprint.

    Hatch chords sit at signed multiples of the hatch distance from the
    line through the circle center, oriented at
    ``(base_angle + layer_index * rotation_increment) mod 180``; consecutive
    chords alternate direction and are joined by laser-off traverses at scan
    speed.  A footprint too small to host a single chord yields an explicit
    empty pattern (no segments) rather than an error.
    """
    if layer_index < 0:
        raise ValueError(f"layer_index must be >= 0, got {layer_index}")
    angle = _hatch_angle(params, layer_index)
    z = layer_index * params.layer_thickness
    a = math.radians(angle)
    ux, uy = math.cos(a), math.sin(a)      # along-chord direction
    nx, ny = -math.sin(a), math.cos(a)     # hatch-normal direction
    cx, cy = domain.center
    R, h = domain.radius, params.hatch_distance

    n_max = int(math.floor(R / h))
    lines: list[tuple[tuple[float, float], tuple[float, float]]] = []
    for n in range(-n_max, n_max + 1):
        d = n * h
        half_sq = R * R - d * d
        if half_sq <= 0.0:
            continue
        half = math.sqrt(half_sq)
        if 2.0 * half < _MIN_CHORD_MM:
            continue
        mx, my = cx + d * nx, cy + d * ny
        lines.append(((mx - half * ux, my - half * uy),
                      (mx + half * ux, my + half * uy)))

    segments: list[ScanSegment] = []
    t = t0
    v = params.scan_speed
    for k, (p_lo, p_hi) in enumerate(lines):
        start, end = (p_lo, p_hi) if k % 2 == 0 else (p_hi, p_lo)
        if segments:
            prev_end = segments[-1].end
            gap = math.hypot(start[0] - prev_end[0], start[1] - prev_end[1])
            t_next = t + gap / v
            segments.append(ScanSegment(prev_end, start, t, t_next, laser_on=False))
            t = t_next
        length = math.hypot(end[0] - start[0], end[1] - start[1])
        t_next = t + length / v
        segments.append(ScanSegment(start, end, t, t_next, laser_on=True))
        t = t_next

    return ScanPattern(layer_index, z, angle, tuple(segments))


def generate_build(
    params: MachineParams,
    domain: CircleDomain,
    n_layers: int,
    dead_time: float = 0.0,
) -> list[ScanPattern]:
    """Time-ordered patterns for ``n_layers`` consecutive layers.

    ``dead_time`` is the idle gap inserted between layers (seconds).
    """
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    if dead_time < 0:
        raise ValueError(f"dead_time must be >= 0, got {dead_time}")
    patterns = []
    t = 0.0
    for k in range(n_layers):
        p = generate_layer(params, domain, k, t0=t)
        patterns.append(p)
        if not p.is_empty:
            t = p.t_end + dead_time
    return patterns


def position_at(pattern: ScanPattern, t: float) -> tuple[tuple[float, float], bool]:
    """Focus position and laser state at time ``t``.

    Linear interpolation along the active segment; ``t`` outside
    ``[t_start, t_end]`` raises :class:`PatternRangeError`.
    """
    if pattern.is_empty:
        raise PatternRangeError("pattern is empty")
    if not pattern.t_start <= t <= pattern.t_end:
        raise PatternRangeError(
            f"t={t!r} outside pattern span [{pattern.t_start!r}, {pattern.t_end!r}]")
    k = bisect.bisect_right(pattern._t_starts, t) - 1
    k = max(k, 0)
    seg = pattern.segments[k]
    frac = (t - seg.t_start) / (seg.t_end - seg.t_start)
    frac = min(max(frac, 0.0), 1.0)
    x = seg.start[0] + frac * (seg.end[0] - seg.start[0])
    y = seg.start[1] + frac * (seg.end[1] - seg.start[1])
    return (x, y), seg.laser_on


def turning_points(pattern: ScanPattern) -> list[TurnEvent]:
    """Departure/re-entry events at the ends of the laser-on chords.

    Every laser-on segment except the first starts with a re-entry; every
    one except the last ends with a departure.
    """
    on_segs = [s for s in pattern.segments if s.laser_on]
    events: list[TurnEvent] = []
    for k, s in enumerate(on_segs):
        if k > 0:
            events.append(TurnEvent(s.t_start, s.start, "re-entry"))
        if k < len(on_segs) - 1:
            events.append(TurnEvent(s.t_end, s.end, "departure"))
    events.sort(key=lambda e: (e.time, e.kind))
    return events


def laser_on_path_length(pattern: ScanPattern) -> float:
    """Total length of the laser-on chords (mm)."""
    return sum(s.length for s in pattern.segments if s.laser_on)


# ---------------------------------------------------------------------------
# Tabular pattern files: one row per segment,
# columns (layer, t_start, t_end, x0, y0, x1, y1, laser_on).
# ---------------------------------------------------------------------------

def save_patterns(patterns: list[ScanPattern], path, provenance: dict | None = None) -> None:
    from ._tabular import provenance_lines

    with open(path, "w") as fh:
        fh.write("# pbflab scan pattern v1\n")
        for line in provenance_lines(provenance):
            fh.write(line)
        for p in patterns:
            fh.write(f"# layer {p.layer_index}: z={p.z!r} angle={p.angle!r}\n")
        fh.write("# columns: layer t_start t_end x0 y0 x1 y1 laser_on\n")
        for p in patterns:
            for s in p.segments:
                fh.write(
                    f"{p.layer_index} {s.t_start!r} {s.t_end!r} "
                    f"{s.start[0]!r} {s.start[1]!r} {s.end[0]!r} {s.end[1]!r} "
                    f"{int(s.laser_on)}\n")


def load_patterns(path) -> list[ScanPattern]:
    meta: dict[int, tuple[float, float]] = {}
    rows: list[tuple[int, ScanSegment]] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("layer ") and ":" in body:
                    head, _, tail = body.partition(":")
                    idx = int(head.split()[1])
                    kv = dict(item.split("=") for item in tail.split())
                    meta[idx] = (float(kv.get("z", 0.0)), float(kv.get("angle", 0.0)))
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ValueError(f"malformed pattern row: {line!r}")
            layer = int(parts[0])
            seg = ScanSegment(
                start=(float(parts[3]), float(parts[4])),
                end=(float(parts[5]), float(parts[6])),
                t_start=float(parts[1]),
                t_end=float(parts[2]),
                laser_on=bool(int(parts[7])),
            )
            rows.append((layer, seg))

    patterns = []
    for layer in sorted({layer for layer, _ in rows}):
        segs = tuple(s for l, s in rows if l == layer)
        z, angle = meta.get(layer, (0.0, _angle_from_segments(segs)))
        patterns.append(ScanPattern(layer, z, angle, segs))
    patterns.sort(key=lambda p: p.t_start)
    return patterns


def _angle_from_segments(segments: tuple[ScanSegment, ...]) -> float:
    for s in segments:
        if s.laser_on and s.length > 0:
            ang = math.degrees(math.atan2(s.end[1] - s.start[1], s.end[0] - s.start[0]))
            return ang % 180.0
    return 0.0
