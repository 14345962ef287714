"""Regular-grid temperature field, boundary conditions and laser state.

All thermal quantities are SI (metres, seconds, kelvin).  The grid is
cell-centered: cell (i, j, k) has its center at ((i+0.5)dx, (j+0.5)dx,
(k+0.5)dx); the laser acts on the top face (largest z index).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .material import MaterialProps

__all__ = ["FaceCondition", "BoundarySpec", "ThermalField", "LaserState", "uniform_field"]

_FACES = ("x_lo", "x_hi", "y_lo", "y_hi", "z_lo", "z_hi")


@dataclass(frozen=True)
class FaceCondition:
    """Per-face boundary condition: 'adiabatic' or 'fixed' at a temperature."""

    kind: str = "adiabatic"
    temperature: float | None = None

    def __post_init__(self):
        if self.kind not in ("adiabatic", "fixed"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "fixed":
            if self.temperature is None or not self.temperature >= 0:
                raise ValueError(f"fixed face needs a temperature >= 0 K, got {self.temperature!r}")

    @classmethod
    def parse(cls, text: str) -> "FaceCondition":
        """Parse 'adiabatic' or 'fixed:<kelvin>'."""
        text = text.strip()
        if text == "adiabatic":
            return cls("adiabatic")
        if text.startswith("fixed:"):
            return cls("fixed", float(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse boundary condition {text!r}")

    def __str__(self) -> str:
        if self.kind == "adiabatic":
            return "adiabatic"
        return f"fixed:{self.temperature!r}"


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary conditions for the six grid faces."""

    x_lo: FaceCondition = FaceCondition()
    x_hi: FaceCondition = FaceCondition()
    y_lo: FaceCondition = FaceCondition()
    y_hi: FaceCondition = FaceCondition()
    z_lo: FaceCondition = FaceCondition()
    z_hi: FaceCondition = FaceCondition()

    @classmethod
    def all_adiabatic(cls) -> "BoundarySpec":
        return cls()

    @classmethod
    def fixed_bottom(cls, temperature: float) -> "BoundarySpec":
        """Build-plate style: bottom held at a temperature, all else adiabatic."""
        return cls(z_lo=FaceCondition("fixed", temperature))

    def faces(self):
        return [(name, getattr(self, name)) for name in _FACES]


@dataclass
class ThermalField:
    """Temperatures on a uniform cell-centered grid plus metadata."""

    dx: float
    temperatures: np.ndarray  # (nx, ny, nz) float64, K
    boundary: BoundarySpec
    material: MaterialProps

    def __post_init__(self):
        self.temperatures = np.ascontiguousarray(self.temperatures, dtype=np.float64)
        if not self.dx > 0:
            raise ValueError(f"dx must be > 0, got {self.dx!r}")
        if self.temperatures.ndim != 3:
            raise ValueError("temperatures must be a 3-D array")
        if min(self.temperatures.shape) < 2:
            raise ValueError(f"grid extents must be >= 2, got {self.temperatures.shape}")
        if np.any(self.temperatures < 0):
            raise ValueError("temperatures must be >= 0 K")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.temperatures.shape

    @property
    def extent(self) -> tuple[float, float, float]:
        """Physical size (m) along x, y, z."""
        nx, ny, nz = self.shape
        return nx * self.dx, ny * self.dx, nz * self.dx

    @property
    def top(self) -> np.ndarray:
        """View of the top-surface temperature plane."""
        return self.temperatures[:, :, -1]

    def copy(self) -> "ThermalField":
        return replace(self, temperatures=self.temperatures.copy())

    def apply_fixed_faces(self) -> None:
        """Clamp cell planes on 'fixed' faces to their temperatures."""
        T = self.temperatures
        for name, cond in self.boundary.faces():
            if cond.kind != "fixed":
                continue
            if name == "x_lo":
                T[0, :, :] = cond.temperature
            elif name == "x_hi":
                T[-1, :, :] = cond.temperature
            elif name == "y_lo":
                T[:, 0, :] = cond.temperature
            elif name == "y_hi":
                T[:, -1, :] = cond.temperature
            elif name == "z_lo":
                T[:, :, 0] = cond.temperature
            elif name == "z_hi":
                T[:, :, -1] = cond.temperature

    def interpolate(self, points_m: np.ndarray) -> np.ndarray:
        """Trilinear interpolation of temperature at (n, 3) points (m)."""
        pts = np.atleast_2d(np.asarray(points_m, dtype=float))
        nx, ny, nz = self.shape
        out = np.empty(len(pts))
        frac = pts / self.dx - 0.5  # cell-center index space
        for axis, n in enumerate((nx, ny, nz)):
            frac[:, axis] = np.clip(frac[:, axis], 0.0, n - 1 - 1e-12)
        i0 = np.floor(frac).astype(int)
        w = frac - i0
        T = self.temperatures
        out = np.zeros(len(pts))
        for dx_ in (0, 1):
            for dy_ in (0, 1):
                for dz_ in (0, 1):
                    wx = w[:, 0] if dx_ else 1.0 - w[:, 0]
                    wy = w[:, 1] if dy_ else 1.0 - w[:, 1]
                    wz = w[:, 2] if dz_ else 1.0 - w[:, 2]
                    out += wx * wy * wz * T[np.minimum(i0[:, 0] + dx_, nx - 1),
                                            np.minimum(i0[:, 1] + dy_, ny - 1),
                                            np.minimum(i0[:, 2] + dz_, nz - 1)]
        return out

    def contains(self, points_m: np.ndarray) -> np.ndarray:
        """True where points (n, 3) lie inside the grid box."""
        pts = np.atleast_2d(np.asarray(points_m, dtype=float))
        lx, ly, lz = self.extent
        return ((pts[:, 0] >= 0) & (pts[:, 0] <= lx)
                & (pts[:, 1] >= 0) & (pts[:, 1] <= ly)
                & (pts[:, 2] >= 0) & (pts[:, 2] <= lz))


@dataclass(frozen=True)
class LaserState:
    """Beam parameters and focus position (SI)."""

    focus: tuple[float, float, float]  # m
    power: float                       # W
    r_spot: float                      # m, 1/e^2 radius
    absorptivity: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.r_spot > 0:
            problems.append(f"r_spot must be > 0, got {self.r_spot!r}")
        if self.power < 0:
            problems.append(f"power must be >= 0, got {self.power!r}")
        if not 0.0 < self.absorptivity <= 1.0:
            problems.append(f"absorptivity must be in (0, 1], got {self.absorptivity!r}")
        if problems:
            raise ValueError("; ".join(problems))


def uniform_field(
    nx: int,
    ny: int,
    nz: int,
    dx: float,
    temperature: float,
    material: MaterialProps,
    boundary: BoundarySpec | None = None,
) -> ThermalField:
    """Field at a uniform temperature with fixed faces already clamped."""
    f = ThermalField(
        dx=dx,
        temperatures=np.full((nx, ny, nz), float(temperature)),
        boundary=boundary or BoundarySpec.all_adiabatic(),
        material=material,
    )
    f.apply_fixed_faces()
    return f
