"""Pure-NumPy phase-field kernel (fallback when the extension is missing).

Kept operation-for-operation parallel to ``_pf_core.pyx`` so both backends
produce matching trajectories.
"""

import numpy as np


def _laplacian(e, inv_dx2):
    """7-point Laplacian with zero-flux (mirror) boundaries."""
    p = np.pad(e, 1, mode="edge")
    return (
        p[2:, 1:-1, 1:-1] + p[:-2, 1:-1, 1:-1]
        + p[1:-1, 2:, 1:-1] + p[1:-1, :-2, 1:-1]
        + p[1:-1, 1:-1, 2:] + p[1:-1, 1:-1, :-2]
        - 6.0 * e
    ) * inv_dx2


def step_tdgl(eta, zeta, m_g, gamma, kappa_g, L_g, dt_s, dx_m):
    """One explicit Euler step of the multi-order-parameter evolution.

    Returns ``(eta_next, first_bad_voxel_flat_index)`` where the index is -1
    when every value is finite.
    """
    inv_dx2 = 1.0 / (dx_m * dx_m)
    sum_sq = np.einsum("i...,i...->...", eta, eta)
    melt = 2.0 * (1.0 - zeta) ** 2
    out = np.empty_like(eta)
    for i in range(eta.shape[0]):
        e = eta[i]
        bulk = m_g * (e * e * e - e + 2.0 * gamma * e * (sum_sq - e * e) + melt * e)
        out[i] = e - dt_s * L_g * (bulk - kappa_g * _laplacian(e, inv_dx2))
    bad = ~np.isfinite(out)
    if bad.any():
        # Channel-major scan order, matching the compiled kernel.
        n_vox = out[0].size
        return out, int(np.argmax(bad.ravel()) % n_vox)
    return out, -1


def bulk_energy_density(eta, zeta, m_g, gamma):
    """Bulk free-energy density per voxel (J/m^3), pair term single-counted."""
    sum_sq = np.einsum("i...,i...->...", eta, eta)
    sum_q = np.einsum("i...,i...,i...,i...->...", eta, eta, eta, eta)
    quartic = 0.25 * sum_q - 0.5 * sum_sq
    pairs = 0.5 * (sum_sq * sum_sq - sum_q)
    return m_g * (quartic + gamma * pairs + 0.25 + (1.0 - zeta) ** 2 * sum_sq)


def gradient_energy(eta, kappa_g, dx_m):
    """Gradient energy (J) summed over internal bonds, zero-flux consistent."""
    dV = dx_m ** 3
    total = 0.0
    for axis in (1, 2, 3):
        d = np.diff(eta, axis=axis)
        total += float(np.sum(d * d))
    return 0.5 * kappa_g * total / (dx_m * dx_m) * dV


def discrete_energy(eta, zeta, m_g, gamma, kappa_g, dx_m):
    """Total discrete free energy (J); the exact Lyapunov functional of step_tdgl."""
    dV = dx_m ** 3
    return float(np.sum(bulk_energy_density(eta, zeta, m_g, gamma))) * dV + gradient_energy(
        eta, kappa_g, dx_m
    )
