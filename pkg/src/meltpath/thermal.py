"""Steady-state moving point-source (Rosenthal) temperature fields.

The temperature around a source of absorbed power Q moving at speed v is

    T = T0 + Q / (2 pi k R') * exp(-v (xi + R') / (2 alpha))

with ``xi`` the signed distance along the travel direction, ``R`` the
3D distance to the source, and ``R' = max(R, clamp_radius)`` removing the
point-source singularity. The field is re-evaluated analytically at every
query; residual heat between passes is deliberately not modeled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec
from .scanpath import ScanPath


@dataclass(frozen=True)
class LaserParams:
    """Absorbed power (W) and scan speed (m/s)."""

    power_W: float = 25.0
    speed_m_s: float = 0.5

    def __post_init__(self):
        if self.power_W <= 0 or self.speed_m_s <= 0:
            raise ValueError("laser power and speed must be positive")


@dataclass(frozen=True)
class MaterialThermal:
    """Thermal constants; generic steel-like defaults, config-overridable."""

    conductivity_W_mK: float = 30.0
    diffusivity_m2_s: float = 1.0e-5
    ambient_K: float = 293.0
    melt_K: float = 1700.0
    clamp_radius_um: float = 1.0
    transition_band_K: float = 50.0

    def __post_init__(self):
        if min(self.conductivity_W_mK, self.diffusivity_m2_s, self.ambient_K,
               self.melt_K, self.clamp_radius_um, self.transition_band_K) <= 0:
            raise ValueError("material constants must be strictly positive")
        if self.melt_K <= self.ambient_K:
            raise ValueError("melt_K must exceed ambient_K")


@dataclass
class TemperatureField:
    """Per-voxel temperature in K (float32, the on-disk precision)."""

    spec: DomainSpec
    T: np.ndarray

    def __post_init__(self):
        self.T = np.ascontiguousarray(self.T, dtype=np.float32)
        if self.T.shape != self.spec.dims:
            raise ValueError(f"T shape {self.T.shape} != spec dims {self.spec.dims}")

    @classmethod
    def ambient(cls, spec: DomainSpec, mat: MaterialThermal) -> "TemperatureField":
        return cls(spec=spec, T=np.full(spec.dims, mat.ambient_K, dtype=np.float32))

    def copy(self) -> "TemperatureField":
        return TemperatureField(spec=self.spec, T=self.T.copy())


@dataclass
class MeltMask:
    """Ever-melted flags; accumulation is monotone (never un-melts)."""

    spec: DomainSpec
    melted: np.ndarray

    def __post_init__(self):
        self.melted = np.ascontiguousarray(self.melted, dtype=bool)
        if self.melted.shape != self.spec.dims:
            raise ValueError("melted shape differs from spec dims")

    @classmethod
    def empty(cls, spec: DomainSpec) -> "MeltMask":
        return cls(spec=spec, melted=np.zeros(spec.dims, dtype=bool))

    def copy(self) -> "MeltMask":
        return MeltMask(spec=self.spec, melted=self.melted.copy())

    @property
    def count(self) -> int:
        return int(self.melted.sum())


def rosenthal_point(point_mm, laser_pos_mm, travel_dir_unit, laser: LaserParams,
                    mat: MaterialThermal) -> float:
    """Temperature (K) at one point for a source at ``laser_pos_mm``."""
    rel_m = (np.asarray(point_mm, dtype=float) - np.asarray(laser_pos_mm, dtype=float)) * 1e-3
    d = np.asarray(travel_dir_unit, dtype=float)
    xi = float(rel_m @ d)
    R = float(np.linalg.norm(rel_m))
    Rc = max(R, mat.clamp_radius_um * 1e-6)
    dT = laser.power_W / (2.0 * np.pi * mat.conductivity_W_mK * Rc)
    dT *= np.exp(-laser.speed_m_s * (xi + Rc) / (2.0 * mat.diffusivity_m2_s))
    return mat.ambient_K + dT


def _rosenthal_grid(spec: DomainSpec, laser_pos_mm, travel_dir_unit, laser: LaserParams,
                    mat: MaterialThermal) -> np.ndarray:
    """Vectorized Rosenthal evaluation at every voxel center (float64)."""
    pos = np.asarray(laser_pos_mm, dtype=float)
    d = np.asarray(travel_dir_unit, dtype=float)
    axes = [(spec.voxel_centers_mm(a) - pos[a]) * 1e-3 for a in range(3)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    xi = X * d[0] + Y * d[1] + Z * d[2]
    R = np.sqrt(X * X + Y * Y + Z * Z)
    Rc = np.maximum(R, mat.clamp_radius_um * 1e-6)
    dT = laser.power_W / (2.0 * np.pi * mat.conductivity_W_mK * Rc)
    dT *= np.exp(-laser.speed_m_s * (xi + Rc) / (2.0 * mat.diffusivity_m2_s))
    return mat.ambient_K + dT


def field_at_time(path: ScanPath, t_s: float, spec: DomainSpec, laser: LaserParams,
                  mat: MaterialThermal) -> TemperatureField:
    """Temperature field with the source interpolated along the path at ``t_s``."""
    pos = path.position_at(t_s)  # raises outside [0, duration]
    direction = path.direction_at(t_s)
    T = _rosenthal_grid(spec, pos, direction, laser, mat)
    return TemperatureField(spec=spec, T=T.astype(np.float32))


def accumulate_melt(mask: MeltMask, field: TemperatureField, mat: MaterialThermal) -> MeltMask:
    """OR the mask with the currently molten voxels."""
    if mask.spec.dims != field.spec.dims:
        raise ValueError("mask and field specs differ")
    out = mask.copy()
    out.melted |= field.T >= mat.melt_K
    return out
