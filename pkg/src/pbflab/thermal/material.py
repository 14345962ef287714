"""Material properties and the apparent-heat-capacity phase change model.

The latent heat of fusion is spread over the mushy zone [T_sol, T_liq] as a
raised-cosine bump added to the baseline heat capacity:

    c_app(T) = c_p + (2 L_f / dT) * sin^2(pi * (T - T_sol) / dT),  dT = T_liq - T_sol

whose integral over the mushy zone is exactly L_f.  The corresponding
specific enthalpy (reference u = 0 at T = 0) is

    u(T) = c_p * T + L_f * (xi - sin(2 pi xi) / (2 pi)),  xi = clamp((T - T_sol)/dT, 0, 1)

which is strictly increasing and therefore invertible; the inverse is used
by the enthalpy-form time stepper so that latent heat is booked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialProps",
    "DEFAULT_MATERIAL",
    "apparent_heat_capacity",
    "specific_enthalpy",
    "temperature_from_enthalpy",
]


@dataclass(frozen=True)
class MaterialProps:
    """SI thermophysical constants of the alloy (one set for solid and powder)."""

    density: float            # kg/m^3
    conductivity: float       # W/(m K)
    heat_capacity: float      # J/(kg K)
    t_solidus: float          # K
    t_liquidus: float         # K
    latent_heat: float        # J/kg

    def __post_init__(self):
        problems = []
        for name in ("density", "conductivity", "heat_capacity",
                     "t_solidus", "t_liquidus", "latent_heat"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.t_liquidus > self.t_solidus:
            problems.append(
                f"t_liquidus ({self.t_liquidus!r}) must exceed t_solidus ({self.t_solidus!r})")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def diffusivity(self) -> float:
        """Baseline thermal diffusivity lambda / (rho c_p), m^2/s."""
        return self.conductivity / (self.density * self.heat_capacity)

    @property
    def mushy_width(self) -> float:
        return self.t_liquidus - self.t_solidus


#: 15-5 PH-type stainless steel set used throughout the default studies.
DEFAULT_MATERIAL = MaterialProps(
    density=7800.0,
    conductivity=13.8,
    heat_capacity=460.0,
    t_solidus=1677.0,
    t_liquidus=1713.0,
    latent_heat=247e3,
)


def apparent_heat_capacity(T, mat: MaterialProps):
    """Heat capacity with the latent-heat bump, J/(kg K).

    Accepts scalars or arrays; outside the mushy zone this is exactly
    ``mat.heat_capacity``.
    """
    T = np.asarray(T, dtype=float)
    dT = mat.mushy_width
    xi = (T - mat.t_solidus) / dT
    in_zone = (xi > 0.0) & (xi < 1.0)
    bump = np.zeros_like(T)
    if np.any(in_zone):
        s = np.sin(np.pi * xi[in_zone])
        bump[in_zone] = (2.0 * mat.latent_heat / dT) * s * s
    out = mat.heat_capacity + bump
    return float(out) if out.ndim == 0 else out


def _melt_enthalpy_fraction(xi):
    """Integral of the normalized bump from 0 to xi (xi already clipped)."""
    return xi - np.sin(2.0 * np.pi * xi) / (2.0 * np.pi)


def specific_enthalpy(T, mat: MaterialProps):
    """Specific enthalpy u(T), J/kg, with u(0) = 0."""
    T = np.asarray(T, dtype=float)
    xi = np.clip((T - mat.t_solidus) / mat.mushy_width, 0.0, 1.0)
    out = mat.heat_capacity * T + mat.latent_heat * _melt_enthalpy_fraction(xi)
    return float(out) if out.ndim == 0 else out


def temperature_from_enthalpy(u, mat: MaterialProps):
    """Inverse of :func:`specific_enthalpy`.

    Linear inversion outside the mushy band; inside, bisection on the melt
    fraction (the map is strictly increasing, so the root is unique).
    """
    u = np.asarray(u, dtype=float)
    cp, lf = mat.heat_capacity, mat.latent_heat
    t_sol, dT = mat.t_solidus, mat.mushy_width
    u_sol = cp * t_sol
    u_liq = cp * (t_sol + dT) + lf

    T = np.where(u <= u_sol, u / cp, (u - lf) / cp)
    mushy = (u > u_sol) & (u < u_liq)
    if np.any(mushy):
        target = u[mushy] - u_sol if u.ndim else np.array([u - u_sol])
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        a, b = cp * dT, lf
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            g = a * mid + b * _melt_enthalpy_fraction(mid) - target
            high = g > 0.0
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        xi = 0.5 * (lo + hi)
        if u.ndim:
            T[mushy] = t_sol + dT * xi
        else:
            T = np.asarray(t_sol + dT * float(xi[0]))
    return float(T) if T.ndim == 0 else T
