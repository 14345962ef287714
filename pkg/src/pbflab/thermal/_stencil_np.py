"""NumPy implementation of the per-step stencil update.

Semantics shared with the compiled kernel (`_stencil_cy`): one explicit
step of heat conduction in specific-enthalpy form,

    u_new = u(T) + dt * lam * lap(T) / rho + deposit / (rho * dx)
    T_new = u^-1(u_new)

with mirror (zero-flux) neighbor closure at every face; 'fixed' faces are
clamped by the caller after the step.  ``deposit`` is the per-step
energy-per-area (J/m^2) on the top face.
"""

from __future__ import annotations

import numpy as np

name = "numpy"


def _neighbor_sum(T: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Sum of the six face neighbors with mirror closure, minus 6T."""
    np.multiply(T, -6.0, out=out)
    out[1:, :, :] += T[:-1, :, :]
    out[0, :, :] += T[0, :, :]
    out[:-1, :, :] += T[1:, :, :]
    out[-1, :, :] += T[-1, :, :]
    out[:, 1:, :] += T[:, :-1, :]
    out[:, 0, :] += T[:, 0, :]
    out[:, :-1, :] += T[:, 1:, :]
    out[:, -1, :] += T[:, -1, :]
    out[:, :, 1:] += T[:, :, :-1]
    out[:, :, 0] += T[:, :, 0]
    out[:, :, :-1] += T[:, :, 1:]
    out[:, :, -1] += T[:, :, -1]
    return out


def _melt_fraction_integral(xi: np.ndarray) -> np.ndarray:
    return xi - np.sin(2.0 * np.pi * xi) / (2.0 * np.pi)


def _invert_enthalpy(u: np.ndarray, cp: float, t_sol: float, d_t: float, lf: float) -> np.ndarray:
    """Temperature from specific enthalpy (bisection inside the mushy band)."""
    u_sol = cp * t_sol
    u_liq = cp * (t_sol + d_t) + lf
    T = np.where(u >= u_liq, (u - lf) / cp, u / cp)
    mushy = (u > u_sol) & (u < u_liq)
    if np.any(mushy):
        target = u[mushy] - u_sol
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        a = cp * d_t
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            g = a * mid + lf * _melt_fraction_integral(mid) - target
            high = g > 0.0
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        T[mushy] = t_sol + d_t * 0.5 * (lo + hi)
    return T


def step_kernel(
    t_old: np.ndarray,
    t_new: np.ndarray,
    deposit: np.ndarray,
    has_deposit: bool,
    dt: float,
    dx: float,
    rho: float,
    lam: float,
    cp: float,
    t_sol: float,
    t_liq: float,
    lf: float,
) -> None:
    d_t = t_liq - t_sol
    u_sol = cp * t_sol

    du = np.empty_like(t_old)
    _neighbor_sum(t_old, du)
    du *= dt * lam / (rho * dx * dx)
    if has_deposit:
        du[:, :, -1] += deposit / (rho * dx)

    # Fast path: pretend u = cp*T everywhere, then repair cells that touch
    # the mushy band on either side of the step.
    u = cp * t_old + du
    latent = (t_old > t_sol) | (u > u_sol)
    if np.any(latent):
        told = t_old[latent]
        xi = np.clip((told - t_sol) / d_t, 0.0, 1.0)
        u_full = cp * told + lf * _melt_fraction_integral(xi) + du[latent]
        u[latent] = u_full
        np.divide(u, cp, out=t_new)
        t_new[latent] = _invert_enthalpy(u_full, cp, t_sol, d_t, lf)
    else:
        np.divide(u, cp, out=t_new)
