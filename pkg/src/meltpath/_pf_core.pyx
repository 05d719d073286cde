# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled phase-field kernel: fused bulk + Laplacian explicit Euler step.

Mirrors ``_pf_numpy.step_tdgl`` (same stencil, same zero-flux boundaries).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def step_tdgl(cnp.ndarray[cnp.float64_t, ndim=4] eta,
              cnp.ndarray[cnp.float64_t, ndim=3] zeta,
              double m_g, double gamma, double kappa_g, double L_g,
              double dt_s, double dx_m):
    """One explicit Euler step; returns (eta_next, first bad voxel or -1)."""
    cdef Py_ssize_t n = eta.shape[0]
    cdef Py_ssize_t nx = eta.shape[1]
    cdef Py_ssize_t ny = eta.shape[2]
    cdef Py_ssize_t nz = eta.shape[3]
    cdef cnp.ndarray[cnp.float64_t, ndim=4] out = np.empty_like(eta)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] sum_sq = np.zeros((nx, ny, nz))
    cdef double inv_dx2 = 1.0 / (dx_m * dx_m)
    cdef Py_ssize_t i, x, y, z, xl, xr, yl, yr, zl, zr
    cdef double e, lap, bulk, melt, s, v
    cdef Py_ssize_t bad = -1

    for i in range(n):
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    e = eta[i, x, y, z]
                    sum_sq[x, y, z] += e * e

    for i in range(n):
        for x in range(nx):
            xl = x - 1 if x > 0 else 0
            xr = x + 1 if x < nx - 1 else nx - 1
            for y in range(ny):
                yl = y - 1 if y > 0 else 0
                yr = y + 1 if y < ny - 1 else ny - 1
                for z in range(nz):
                    zl = z - 1 if z > 0 else 0
                    zr = z + 1 if z < nz - 1 else nz - 1
                    e = eta[i, x, y, z]
                    s = sum_sq[x, y, z]
                    melt = 1.0 - zeta[x, y, z]
                    melt = 2.0 * melt * melt
                    lap = (eta[i, xr, y, z] + eta[i, xl, y, z]
                           + eta[i, x, yr, z] + eta[i, x, yl, z]
                           + eta[i, x, y, zr] + eta[i, x, y, zl]
                           - 6.0 * e) * inv_dx2
                    bulk = m_g * (e * e * e - e + 2.0 * gamma * e * (s - e * e) + melt * e)
                    v = e - dt_s * L_g * (bulk - kappa_g * lap)
                    out[i, x, y, z] = v
                    if bad < 0 and not (v == v and -1e300 < v < 1e300):
                        bad = (x * ny + y) * nz + z
    return out, int(bad)
