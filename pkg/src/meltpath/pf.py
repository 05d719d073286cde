"""Multi-order-parameter grain growth solver.

Evolves n_ori non-conserved order parameters by explicit Euler gradient
flow,

    d eta_i / dt = -L_g * (df/d eta_i - kappa_g * lap eta_i),

with the bulk derivative

    df/d eta_i = m_g * (eta_i^3 - eta_i
                        + 2 gamma eta_i * sum_{j != i} eta_j^2
                        + 2 (1 - zeta)^2 eta_i),

a 7-point Laplacian, and zero-flux boundaries. The solid indicator zeta is a
diagnostic of temperature (1 in solid, 0 at/above the melting point, linear
over a configurable band); voxels at zeta = 0 have their order parameters
zeroed, which is how melting erases prior solid structure.

Parameters follow the gamma = 1.5 parameterization

    kappa_g = (3/4) sigma l,   m_g = 6 sigma / l,   L_g = (4/3) M_gb / l

for interface energy sigma, boundary width l and mobility M_gb. At these
choices the flat-interface profile is eta = (1 -+ tanh(2 x / l)) / 2, so the
10-90 crossing distance equals l * ln(3) (that factor is the documented
width convention used by the tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .domain import DomainSpec, GrainField
from .errors import NumericFailure
from .scanpath import ScanPath
from .thermal import LaserParams, MaterialThermal, MeltMask, TemperatureField, field_at_time

#: 10-90 crossing distance of the equilibrium profile, in units of l.
WIDTH_10_90_FACTOR = float(np.log(3.0))


@dataclass(frozen=True)
class PFParams:
    """Solver coefficients (SI) plus grid/time discretization."""

    m_g: float
    gamma: float
    kappa_g: float
    L_g: float
    boundary_width_um: float
    n_ori: int
    dx_um: float
    dt_s: float
    stability_factor: float = 0.1

    def __post_init__(self):
        for name in ("m_g", "kappa_g", "L_g", "boundary_width_um", "dx_um", "dt_s", "gamma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_ori < 2:
            raise ValueError("n_ori must be >= 2")
        if not 0 < self.stability_factor <= 0.25:
            raise ValueError("stability_factor must be in (0, 0.25]")
        if self.dt_s > self.stability_bound_s * (1.0 + 1e-12):
            raise ValueError(
                f"dt_s={self.dt_s} exceeds the stability bound {self.stability_bound_s}"
            )

    @property
    def dx_m(self) -> float:
        return self.dx_um * 1e-6

    @property
    def stability_bound_s(self) -> float:
        return self.stability_factor * self.dx_m ** 2 / (self.L_g * self.kappa_g)

    @classmethod
    def from_materials(
        cls,
        dx_um: float,
        sigma_J_m2: float = 0.5,
        mobility_m4_Js: float = 1.0e-12,
        boundary_width_um: float = 9.6,
        gamma: float = 1.5,
        n_ori: int = 20,
        dt_s: Optional[float] = None,
        stability_factor: float = 0.1,
    ) -> "PFParams":
        l_m = boundary_width_um * 1e-6
        kappa = 0.75 * sigma_J_m2 * l_m
        m_g = 6.0 * sigma_J_m2 / l_m
        L_g = (4.0 / 3.0) * mobility_m4_Js / l_m
        if dt_s is None:
            dt_s = stability_factor * (dx_um * 1e-6) ** 2 / (L_g * kappa)
        return cls(
            m_g=m_g, gamma=gamma, kappa_g=kappa, L_g=L_g,
            boundary_width_um=boundary_width_um, n_ori=n_ori,
            dx_um=dx_um, dt_s=dt_s, stability_factor=stability_factor,
        )


@dataclass
class SolidIndicator:
    """zeta field: 0 at/above the melt point, 1 in cold solid, linear between."""

    spec: DomainSpec
    zeta: np.ndarray

    def __post_init__(self):
        self.zeta = np.ascontiguousarray(self.zeta, dtype=np.float64)
        if self.zeta.shape != self.spec.dims:
            raise ValueError("zeta shape differs from spec dims")

    @classmethod
    def solid(cls, spec: DomainSpec) -> "SolidIndicator":
        return cls(spec=spec, zeta=np.ones(spec.dims))


def zeta_from_temperature(T: TemperatureField, mat: MaterialThermal) -> SolidIndicator:
    z = (mat.melt_K - T.T.astype(np.float64)) / mat.transition_band_K
    return SolidIndicator(spec=T.spec, zeta=np.clip(z, 0.0, 1.0))


def apply_liquid_reset(field: GrainField, zeta: SolidIndicator) -> None:
    """Zero order parameters wherever zeta = 0 (melting erases solid order)."""
    if field.eta is None:
        raise ValueError("field has no order parameters")
    field.eta[:, zeta.zeta == 0.0] = 0.0


def bulk_derivative(eta_v: np.ndarray, zeta: float, p: PFParams) -> np.ndarray:
    """df/d eta_i at a single voxel, for tests and diagnostics."""
    e = np.asarray(eta_v, dtype=np.float64)
    sum_sq = float(e @ e)
    melt = 2.0 * (1.0 - zeta) ** 2
    return p.m_g * (e ** 3 - e + 2.0 * p.gamma * e * (sum_sq - e ** 2) + melt * e)


def step(field: GrainField, zeta: SolidIndicator, p: PFParams) -> GrainField:
    """One explicit time step; returns a new field with labels refreshed."""
    if field.eta is None:
        raise ValueError("field has no order parameters; call allocate_eta() first")
    if field.spec.dims != zeta.spec.dims:
        raise ValueError("field/zeta spec mismatch")
    eta_next, bad = kernels.step_tdgl(
        field.eta, zeta.zeta, p.m_g, p.gamma, p.kappa_g, p.L_g, p.dt_s, p.dx_m
    )
    if bad >= 0:
        voxel = np.unravel_index(bad, field.spec.dims)
        raise NumericFailure("non-finite order parameter", voxel=voxel)
    out = GrainField(spec=field.spec, labels=field.labels, n_ori=field.n_ori, eta=eta_next)
    out.refresh_labels()
    return out


def discrete_energy(field: GrainField, zeta: SolidIndicator, p: PFParams) -> float:
    """Total free energy (J) of the discrete functional the solver descends."""
    if field.eta is None:
        raise ValueError("field has no order parameters")
    return kernels.discrete_energy(field.eta, zeta.zeta, p.m_g, p.gamma, p.kappa_g, p.dx_m)


@dataclass
class Trajectory:
    """Sampled (grain, temperature) pairs from a tracked run."""

    samples: list = field(default_factory=list)  # (step, GrainField, TemperatureField)
    laser_mm: list = field(default_factory=list)
    times_s: list = field(default_factory=list)
    mask: Optional[MeltMask] = None
    final: Optional[GrainField] = None
    n_steps: int = 0


def run_track(
    initial: GrainField,
    path: ScanPath,
    laser: LaserParams,
    mat: MaterialThermal,
    p: PFParams,
    sample_every: int = 100,
    n_steps: Optional[int] = None,
    cooldown_steps: int = 0,
) -> Trajectory:
    """Advance the solver while the source moves along ``path``.

    The source follows the path for ceil(duration / dt) steps (or an explicit
    ``n_steps``), then the laser switches off for ``cooldown_steps`` so the
    pool can re-solidify. Fields are sampled every ``sample_every`` steps,
    including step 0 and the final step; the melt mask accumulates at every
    step.
    """
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    spec = initial.spec
    field_now = initial.copy()
    if field_now.eta is None:
        field_now.allocate_eta()

    duration = path.duration_s
    path_steps = n_steps if n_steps is not None else int(np.ceil(duration / p.dt_s - 1e-12))
    total_steps = path_steps + cooldown_steps
    traj = Trajectory(mask=MeltMask.empty(spec), n_steps=total_steps)
    ambient = TemperatureField.ambient(spec, mat)

    for k in range(total_steps + 1):
        t = k * p.dt_s
        if k <= path_steps:
            t_laser = min(t, duration)
            temp = field_at_time(path, t_laser, spec, laser, mat)
            laser_pos = path.position_at(t_laser)
        else:
            temp = ambient
            laser_pos = None
        traj.mask.melted |= temp.T >= mat.melt_K
        zeta = zeta_from_temperature(temp, mat)
        apply_liquid_reset(field_now, zeta)
        if k % sample_every == 0 or k == total_steps:
            field_now.refresh_labels()
            traj.samples.append((k, field_now.copy(), temp.copy()))
            traj.times_s.append(t)
            traj.laser_mm.append(None if laser_pos is None else tuple(laser_pos))
        if k == total_steps:
            break
        eta_next, bad = kernels.step_tdgl(
            field_now.eta, zeta.zeta, p.m_g, p.gamma, p.kappa_g, p.L_g, p.dt_s, p.dx_m
        )
        if bad >= 0:
            raise NumericFailure(
                f"non-finite order parameter at step {k + 1}",
                voxel=np.unravel_index(bad, spec.dims),
            )
        field_now.eta = eta_next

    field_now.refresh_labels()
    traj.final = field_now
    return traj
