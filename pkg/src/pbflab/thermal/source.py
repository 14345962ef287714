"""Gaussian surface source of the moving laser spot.

The beam deposits a surface flux on the top grid face with the lateral
profile

    q(r) = eta * (2 P / (pi r_spot^2)) * exp(-2 r^2 / r_spot^2)   [W/m^2]

where r is the lateral distance from the focus.  For time stepping the
flux is integrated into a per-step energy-per-area window and renormalized
so the discrete deposit equals eta * P * dt exactly, independent of grid
resolution.
"""

from __future__ import annotations

import math

import numpy as np

from .field import LaserState, ThermalField

__all__ = ["source_flux", "deposit_energy"]

# Deposit window half-width in spot radii; the truncated tail carries
# exp(-2 * 4^2) ~ 1e-14 of the power.
_WINDOW_SPOTS = 4.0


def source_flux(laser: LaserState, surface_point: tuple[float, float]) -> float:
    """Surface heat flux (W/m^2) at a point on the top face."""
    dx = surface_point[0] - laser.focus[0]
    dy = surface_point[1] - laser.focus[1]
    r_sq = dx * dx + dy * dy
    peak = 2.0 * laser.power / (math.pi * laser.r_spot ** 2)
    return laser.absorptivity * peak * math.exp(-2.0 * r_sq / laser.r_spot ** 2)


def deposit_energy(
    buffer: np.ndarray,
    field: ThermalField,
    focus_xy: tuple[float, float],
    energy: float,
    r_spot: float,
) -> None:
    """Accumulate ``energy`` (J) into the top-face deposit buffer (J/m^2).

    The Gaussian is evaluated on a local window around the focus and scaled
    so the cell sum times the cell area equals ``energy`` exactly (energy
    from a beam entirely outside the grid is dropped).
    """
    if energy <= 0.0:
        return
    nx, ny = buffer.shape
    dx = field.dx
    half = int(math.ceil(_WINDOW_SPOTS * r_spot / dx)) + 1
    ic = int(math.floor(focus_xy[0] / dx))
    jc = int(math.floor(focus_xy[1] / dx))
    i0, i1 = max(ic - half, 0), min(ic + half + 1, nx)
    j0, j1 = max(jc - half, 0), min(jc + half + 1, ny)
    if i0 >= i1 or j0 >= j1:
        return
    xs = (np.arange(i0, i1) + 0.5) * dx - focus_xy[0]
    ys = (np.arange(j0, j1) + 0.5) * dx - focus_xy[1]
    g = np.exp(-2.0 * (xs[:, None] ** 2 + ys[None, :] ** 2) / r_spot ** 2)
    total = g.sum() * dx * dx
    if total <= 0.0:
        return
    buffer[i0:i1, j0:j1] += g * (energy / total)
