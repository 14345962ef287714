"""Field snapshots: flat binary grid plus a text sidecar descriptor.

Layout of ``<path>``: 16-byte magic, three little-endian int64 extents,
two little-endian float64 (dx, time), then the temperatures as C-order
little-endian float64.  ``<path>.meta.txt`` repeats the geometry and adds
material and boundary information so the field can be reconstructed.
"""

from __future__ import annotations

import numpy as np

from .field import BoundarySpec, FaceCondition, ThermalField
from .material import MaterialProps

__all__ = ["save_field_snapshot", "load_field_snapshot"]

MAGIC = b"PBFLAB_FIELD_v1\n"

_MAT_KEYS = ("density", "conductivity", "heat_capacity",
             "t_solidus", "t_liquidus", "latent_heat")
_FACE_KEYS = ("x_lo", "x_hi", "y_lo", "y_hi", "z_lo", "z_hi")


def save_field_snapshot(field: ThermalField, path, time: float = 0.0,
                        provenance: dict | None = None) -> None:
    nx, ny, nz = field.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.asarray([nx, ny, nz], dtype="<i8").tobytes())
        fh.write(np.asarray([field.dx, time], dtype="<f8").tobytes())
        fh.write(field.temperatures.astype("<f8", copy=False).tobytes(order="C"))

    from .._tabular import provenance_lines
    with open(str(path) + ".meta.txt", "w") as fh:
        fh.write("# pbflab field snapshot sidecar v1\n")
        for line in provenance_lines(provenance):
            fh.write(line)
        fh.write(f"nx={nx}\nny={ny}\nnz={nz}\n")
        fh.write(f"dx={field.dx!r}\n")
        fh.write(f"time={float(time)!r}\n")
        fh.write("dtype=float64\nbyte_order=little\norder=C\n")
        fh.write(f"header_bytes={len(MAGIC) + 3 * 8 + 2 * 8}\n")
        for key in _MAT_KEYS:
            fh.write(f"material.{key}={getattr(field.material, key)!r}\n")
        for name, cond in field.boundary.faces():
            fh.write(f"boundary.{name}={cond}\n")


def load_field_snapshot(path) -> tuple[ThermalField, float]:
    meta: dict[str, str] = {}
    with open(str(path) + ".meta.txt") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            meta[key] = val

    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path} is not a field snapshot (bad magic)")
        dims = np.frombuffer(fh.read(3 * 8), dtype="<i8")
        dx, time = np.frombuffer(fh.read(2 * 8), dtype="<f8")
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(tuple(dims))

    material = MaterialProps(**{k: float(meta[f"material.{k}"]) for k in _MAT_KEYS})
    boundary = BoundarySpec(**{name: FaceCondition.parse(meta[f"boundary.{name}"])
                               for name in _FACE_KEYS})
    field = ThermalField(dx=float(dx), temperatures=data.copy(),
                         boundary=boundary, material=material)
    return field, float(time)
