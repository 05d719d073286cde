"""Roll the surrogate along a scan path in ML time steps.

One ML step spans ``sample_every`` simulator steps. Per step: evaluate the
analytic moving-point-source temperature field at the current and next laser
position, extract the VOI around the laser, predict the next orientation
map, and write it back. Windows near the domain boundary slide inward so
their dims stay fixed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import torch

from .data import LIQUID, assemble_input


@dataclass(frozen=True)
class ThermalConfig:
    power_W: float = 30.0
    speed_m_s: float = 0.05
    conductivity_W_mK: float = 30.0
    diffusivity_m2_s: float = 1.0e-5
    ambient_K: float = 293.0
    melt_K: float = 1700.0
    clamp_radius_um: float = 10.0


def rosenthal_field(dims, voxel_um: float, laser_mm, direction, tc: ThermalConfig):
    """Temperature (K, float32) at every voxel center for one source position."""
    pos = np.asarray(laser_mm, dtype=float)
    d = np.asarray(direction, dtype=float)
    axes = [((np.arange(n) + 0.5) * voxel_um / 1000.0 - pos[k]) * 1e-3
            for k, n in enumerate(dims)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    xi = X * d[0] + Y * d[1] + Z * d[2]
    R = np.sqrt(X * X + Y * Y + Z * Z)
    Rc = np.maximum(R, tc.clamp_radius_um * 1e-6)
    dT = tc.power_W / (2.0 * np.pi * tc.conductivity_W_mK * Rc)
    dT *= np.exp(-tc.speed_m_s * (xi + Rc) / (2.0 * tc.diffusivity_m2_s))
    return (tc.ambient_K + dT).astype(np.float32)


class PolylinePath:
    """Constant-speed traversal of waypoints (mm)."""

    def __init__(self, waypoints_mm, speed_m_s: float):
        self.waypoints = np.atleast_2d(np.asarray(waypoints_mm, dtype=float))
        self.speed = speed_m_s
        seg = np.diff(self.waypoints, axis=0)
        self.lengths = np.linalg.norm(seg, axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(self.lengths)])
        self.dirs = seg / self.lengths[:, None] if len(seg) else np.zeros((0, 3))

    @property
    def duration_s(self) -> float:
        return float(self.cum[-1]) * 1e-3 / self.speed

    def at(self, t_s: float):
        if len(self.lengths) == 0:
            return self.waypoints[0].copy(), np.array([1.0, 0.0, 0.0])
        s = np.clip(t_s * self.speed * 1e3, 0.0, self.cum[-1])
        i = min(int(np.searchsorted(self.cum, s, side="right") - 1), len(self.lengths) - 1)
        i = max(i, 0)
        return self.waypoints[i] + self.dirs[i] * (s - self.cum[i]), self.dirs[i].copy()


def clamp_window(center_mm, voi_dims, dims, voxel_um):
    center_vox = np.asarray(center_mm) * 1000.0 / voxel_um
    origin = np.floor(center_vox - np.asarray(voi_dims) / 2.0 + 0.5).astype(int)
    origin = np.clip(origin, 0, np.asarray(dims) - np.asarray(voi_dims))
    return tuple(slice(int(o), int(o + d)) for o, d in zip(origin, voi_dims))


@dataclass
class RolloutResult:
    labels: np.ndarray
    melted: np.ndarray
    ml_steps: int
    seconds_per_step: float


def rollout(model, labels: np.ndarray, voxel_um: float, waypoints_mm, tc: ThermalConfig,
            voi_dims, dt_s: float, sample_every: int = 100,
            n_ori: int = 20, device: str = "cpu") -> RolloutResult:
    """Advance ``labels`` along the path; returns final labels and melt mask."""
    labels = np.array(labels, dtype=np.int32)
    dims = labels.shape
    path = PolylinePath(waypoints_mm, tc.speed_m_s)
    step_s = dt_s * sample_every
    n_steps = int(np.ceil(path.duration_s / step_s - 1e-12)) if path.duration_s > 0 else 0
    melted = np.zeros(dims, dtype=bool)
    model.eval()
    forward_seconds = 0.0
    pos0, dir0 = path.at(0.0)
    T_now = rosenthal_field(dims, voxel_um, pos0, dir0, tc)
    melted |= T_now >= tc.melt_K
    for k in range(n_steps):
        t_next = min((k + 1) * step_s, path.duration_s)
        pos1, dir1 = path.at(t_next)
        T_next = rosenthal_field(dims, voxel_um, pos1, dir1, tc)
        melted |= T_next >= tc.melt_K
        window = clamp_window(pos0[:3], voi_dims, dims, voxel_um)
        x = assemble_input(labels[window], T_now[window], T_next[window], n_ori,
                           tc.ambient_K, tc.melt_K)
        t0 = time.perf_counter()
        with torch.no_grad():
            pred = model.predict_labels(torch.from_numpy(x[None]).to(device))
        forward_seconds += time.perf_counter() - t0
        labels[window] = pred[0].cpu().numpy().astype(np.int32)
        T_now, pos0 = T_next, pos1
    return RolloutResult(labels=labels, melted=melted, ml_steps=max(n_steps, 1),
                         seconds_per_step=forward_seconds / max(n_steps, 1))
