# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step stencil update; same semantics as `_stencil_np`."""

from libc.math cimport sin, cos, fabs, M_PI

name = "cython"


cdef inline double _melt_fraction_integral(double xi) nogil:
    return xi - sin(2.0 * M_PI * xi) / (2.0 * M_PI)


cdef inline double _invert_enthalpy(double u, double cp, double t_sol,
                                    double d_t, double lf) nogil:
    """Temperature from specific enthalpy; safeguarded Newton in the mushy band."""
    cdef double u_sol = cp * t_sol
    cdef double u_liq = cp * (t_sol + d_t) + lf
    cdef double a, target, lo, hi, xi, g, gp, xn
    cdef int it
    if u <= u_sol:
        return u / cp
    if u >= u_liq:
        return (u - lf) / cp
    a = cp * d_t
    target = u - u_sol
    lo = 0.0
    hi = 1.0
    xi = target / (a + lf)
    for it in range(80):
        g = a * xi + lf * _melt_fraction_integral(xi) - target
        if g > 0.0:
            hi = xi
        else:
            lo = xi
        gp = a + lf * (1.0 - cos(2.0 * M_PI * xi))
        xn = xi - g / gp
        if xn <= lo or xn >= hi:
            xn = 0.5 * (lo + hi)
        if fabs(xn - xi) < 1e-14:
            xi = xn
            break
        xi = xn
    return t_sol + d_t * xi


def step_kernel(double[:, :, ::1] t_old, double[:, :, ::1] t_new,
                double[:, ::1] deposit, bint has_deposit,
                double dt, double dx, double rho, double lam,
                double cp, double t_sol, double t_liq, double lf):
    cdef Py_ssize_t nx = t_old.shape[0]
    cdef Py_ssize_t ny = t_old.shape[1]
    cdef Py_ssize_t nz = t_old.shape[2]
    cdef Py_ssize_t i, j, k, im, ip, jm, jp
    cdef double d_t = t_liq - t_sol
    cdef double u_sol = cp * t_sol
    cdef double cond = dt * lam / (rho * dx * dx)
    cdef double inv_rho_dx = 1.0 / (rho * dx)
    cdef double tc, lap, du, u, xi

    with nogil:
        for i in range(nx):
            im = i - 1 if i > 0 else 0
            ip = i + 1 if i < nx - 1 else nx - 1
            for j in range(ny):
                jm = j - 1 if j > 0 else 0
                jp = j + 1 if j < ny - 1 else ny - 1
                for k in range(nz):
                    tc = t_old[i, j, k]
                    lap = (t_old[im, j, k] + t_old[ip, j, k]
                           + t_old[i, jm, k] + t_old[i, jp, k]
                           - 6.0 * tc)
                    # mirror closure along z
                    lap += t_old[i, j, k - 1] if k > 0 else tc
                    lap += t_old[i, j, k + 1] if k < nz - 1 else tc
                    du = cond * lap
                    if has_deposit and k == nz - 1:
                        du += deposit[i, j] * inv_rho_dx
                    u = cp * tc + du
                    if tc <= t_sol and u <= u_sol:
                        t_new[i, j, k] = u / cp
                    else:
                        if tc > t_sol:
                            xi = (tc - t_sol) / d_t
                            if xi > 1.0:
                                xi = 1.0
                            u += lf * _melt_fraction_integral(xi)
                        t_new[i, j, k] = _invert_enthalpy(u, cp, t_sol, d_t, lf)
