"""Scan-path objects, heuristic pattern generators, and DRL action decoding.

Paths are polylines traversed at constant speed with the laser always on;
jogs between passes are executed like any other segment (laser-off travel is
not modeled).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import DomainSpec
from .errors import InvalidPathError

ACTIONS = ("Up", "Down", "Left", "Right")

#: (drow, dcol) per action; rows advance along +y, columns along +x.
ACTION_DELTAS = {"Up": (1, 0), "Down": (-1, 0), "Left": (0, -1), "Right": (0, 1)}


@dataclass
class ScanPath:
    """Timed waypoint sequence with constant laser power and speed."""

    waypoints: np.ndarray  # (n, 3) mm
    speed_m_s: float
    power_W: float

    def __post_init__(self):
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if self.waypoints.shape[0] < 1 or self.waypoints.shape[1] != 3:
            raise ValueError("waypoints must be a non-empty (n, 3) array")
        if self.speed_m_s <= 0 or self.power_W <= 0:
            raise ValueError("speed and power must be positive")
        seg = np.diff(self.waypoints, axis=0)
        self._seg_len_mm = np.linalg.norm(seg, axis=1)
        if np.any(self._seg_len_mm == 0.0):
            raise ValueError("consecutive waypoints must be distinct")
        self._cum_len_mm = np.concatenate([[0.0], np.cumsum(self._seg_len_mm)])
        with np.errstate(invalid="ignore"):
            self._seg_dir = seg / self._seg_len_mm[:, None] if len(seg) else np.zeros((0, 3))

    @property
    def total_length_mm(self) -> float:
        return float(self._cum_len_mm[-1])

    @property
    def duration_s(self) -> float:
        return self.total_length_mm * 1e-3 / self.speed_m_s

    def _segment_index(self, s_mm: float) -> int:
        i = int(np.searchsorted(self._cum_len_mm, s_mm, side="right") - 1)
        return min(max(i, 0), max(len(self._seg_len_mm) - 1, 0))

    def position_at(self, t_s: float) -> np.ndarray:
        """Laser position (mm) at time ``t_s`` within [0, duration]."""
        if t_s < 0 or t_s > self.duration_s + 1e-12:
            raise ValueError(f"t={t_s} outside path duration {self.duration_s}")
        if len(self._seg_len_mm) == 0:
            return self.waypoints[0].copy()
        s = min(t_s * self.speed_m_s * 1e3, self.total_length_mm)
        i = self._segment_index(s)
        local = s - self._cum_len_mm[i]
        return self.waypoints[i] + self._seg_dir[i] * local

    def direction_at(self, t_s: float) -> np.ndarray:
        """Unit travel direction of the active segment; +x for a point path."""
        if t_s < 0 or t_s > self.duration_s + 1e-12:
            raise ValueError(f"t={t_s} outside path duration {self.duration_s}")
        if len(self._seg_len_mm) == 0:
            return np.array([1.0, 0.0, 0.0])
        s = min(t_s * self.speed_m_s * 1e3, self.total_length_mm)
        return self._seg_dir[self._segment_index(s)].copy()

    def segment_times_s(self) -> np.ndarray:
        """Cumulative arrival time (s) at each waypoint."""
        return self._cum_len_mm * 1e-3 / self.speed_m_s

    def write_csv(self, path, config_hash: str | None = None) -> None:
        times = self.segment_times_s()
        with open(path, "w", newline="") as fh:
            if config_hash is not None:
                fh.write(f"# config_hash={config_hash}\n")
            writer = csv.writer(fh)
            writer.writerow(["x_mm", "y_mm", "z_mm", "t_s", "power_W"])
            for wp, t in zip(self.waypoints, times):
                writer.writerow([f"{wp[0]:.9g}", f"{wp[1]:.9g}", f"{wp[2]:.9g}", f"{t:.9g}", f"{self.power_W:.9g}"])


def read_path_csv(path) -> ScanPath:
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("x_mm"):
                continue
            if line.strip():
                rows.append([float(v) for v in line.strip().split(",")])
    if not rows:
        raise ValueError(f"no waypoints in {path}")
    arr = np.asarray(rows)
    waypoints = arr[:, :3]
    power = arr[0, 4]
    times = arr[:, 3]
    length_mm = float(np.sum(np.linalg.norm(np.diff(waypoints, axis=0), axis=1)))
    if times[-1] > 0 and length_mm > 0:
        speed = length_mm * 1e-3 / times[-1]
    else:
        speed = 0.5
    return ScanPath(waypoints=waypoints, speed_m_s=speed, power_W=power)


@dataclass(frozen=True)
class GridSpec:
    """Uniform n x n grid of scan targets on one build plane.

    Point ``index = row * n + col`` sits at
    ``origin_mm + (col * hatch, row * hatch)``; the DRL agent starts at
    index 0 (the grid origin).
    """

    n: int
    hatch_mm: float
    origin_mm: tuple
    z_mm: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs at least 2 points per side")
        if self.hatch_mm <= 0:
            raise ValueError("hatch_mm must be positive")

    @classmethod
    def centered(cls, domain: DomainSpec, n: int, hatch_mm: float, z_mm: float | None = None) -> "GridSpec":
        extent = (n - 1) * hatch_mm
        margins = [(domain.size_mm[k] - extent) / 2.0 for k in (0, 1)]
        if margins[0] < 0 or margins[1] < 0:
            raise ValueError(f"{n}x{n} grid at hatch {hatch_mm} does not fit in {domain.size_mm}")
        return cls(n=n, hatch_mm=hatch_mm, origin_mm=(margins[0], margins[1]),
                   z_mm=domain.size_mm[2] if z_mm is None else z_mm)

    def point_mm(self, index: int) -> np.ndarray:
        row, col = divmod(index, self.n)
        return np.array([
            self.origin_mm[0] + col * self.hatch_mm,
            self.origin_mm[1] + row * self.hatch_mm,
            self.z_mm,
        ])

    def neighbor(self, index: int, action: str) -> int | None:
        """Target index for an action, or None when it leaves the grid."""
        row, col = divmod(index, self.n)
        drow, dcol = ACTION_DELTAS[action]
        row, col = row + drow, col + dcol
        if not (0 <= row < self.n and 0 <= col < self.n):
            return None
        return row * self.n + col


def _pass_columns(width_mm: float, hatch_mm: float, margin_mm: float | None):
    """Column x-positions: floor(width/hatch)+1 columns, centered by default."""
    if hatch_mm <= 0:
        raise ValueError("hatch_mm must be positive")
    if hatch_mm > width_mm:
        raise ValueError(f"hatch {hatch_mm} wider than domain {width_mm}")
    n_cols = int(np.floor(width_mm / hatch_mm + 1e-9)) + 1
    extent = (n_cols - 1) * hatch_mm
    if margin_mm is None:
        margin_mm = (width_mm - extent) / 2.0
    return margin_mm + np.arange(n_cols) * hatch_mm


def vertical_serpentine(
    domain: DomainSpec,
    hatch_mm: float,
    speed_m_s: float = 0.5,
    power_W: float = 25.0,
    margin_mm: float | None = None,
    z_mm: float | None = None,
) -> ScanPath:
    """Vertical zigzag: full-height columns, alternating y-direction."""
    z = domain.size_mm[2] if z_mm is None else z_mm
    xs = _pass_columns(domain.size_mm[0], hatch_mm, margin_mm)
    y0, y1 = 0.0, domain.size_mm[1]
    pts = []
    for i, x in enumerate(xs):
        lo, hi = (y0, y1) if i % 2 == 0 else (y1, y0)
        pts.append((x, lo, z))
        pts.append((x, hi, z))
    return ScanPath(waypoints=np.asarray(pts), speed_m_s=speed_m_s, power_W=power_W)


def spiral_clockwise(
    domain: DomainSpec,
    hatch_mm: float,
    speed_m_s: float = 0.5,
    power_W: float = 25.0,
    margin_mm: float = 0.0,
    z_mm: float | None = None,
) -> ScanPath:
    """Rectangular inward spiral, clockwise when viewed from +z."""
    if hatch_mm <= 0:
        raise ValueError("hatch_mm must be positive")
    if hatch_mm > min(domain.size_mm[0], domain.size_mm[1]):
        raise ValueError("hatch wider than domain")
    z = domain.size_mm[2] if z_mm is None else z_mm
    x0, x1 = margin_mm, domain.size_mm[0] - margin_mm
    y0, y1 = margin_mm, domain.size_mm[1] - margin_mm
    eps = 1e-12
    # Clockwise from the top-left corner: east, south, west, north. Each leg
    # consumes its edge and pulls the corresponding bound inward by one
    # hatch, so parallel rings stay exactly one hatch apart and legs never
    # cross previously drawn ones.
    cx, cy = x0, y1
    pts = [(cx, cy, z)]
    while True:
        if x1 - cx <= eps:
            break
        cx = x1
        pts.append((cx, cy, z))
        y1 -= hatch_mm
        if cy - y0 <= eps:
            break
        cy = y0
        pts.append((cx, cy, z))
        x1 -= hatch_mm
        if cx - x0 <= eps:
            break
        cx = x0
        pts.append((cx, cy, z))
        y0 += hatch_mm
        if y1 - cy <= eps:
            break
        cy = y1
        pts.append((cx, cy, z))
        x0 += hatch_mm
    return ScanPath(waypoints=np.asarray(pts), speed_m_s=speed_m_s, power_W=power_W)


def diagonal(
    domain: DomainSpec,
    hatch_mm: float,
    speed_m_s: float = 0.5,
    power_W: float = 25.0,
    z_mm: float | None = None,
) -> ScanPath:
    """45-degree passes with perpendicular spacing ``hatch_mm``, serpentine-linked.

    Passes are the intersections of lines ``x + y = c`` with the build
    rectangle; the family of c-values is centered on the main anti-diagonal.
    """
    if hatch_mm <= 0:
        raise ValueError("hatch_mm must be positive")
    W, H = domain.size_mm[0], domain.size_mm[1]
    z = domain.size_mm[2] if z_mm is None else z_mm
    diag_extent = (W + H) / np.sqrt(2.0)  # perpendicular extent of the c-family
    n_pass = int(np.ceil(diag_extent / hatch_mm - 1e-9))
    c_center = (W + H) / 2.0
    c_step = hatch_mm * np.sqrt(2.0)
    cs = c_center + (np.arange(n_pass) - (n_pass - 1) / 2.0) * c_step
    pts = []
    for i, c in enumerate(cs):
        # Clip line x + y = c to the rectangle [0,W] x [0,H].
        xa, xb = max(0.0, c - H), min(W, c)
        if xb - xa <= 1e-12:
            continue
        p_lo = (xa, c - xa, z)  # upper-left end
        p_hi = (xb, c - xb, z)  # lower-right end
        pair = (p_lo, p_hi) if i % 2 == 0 else (p_hi, p_lo)
        for p in pair:
            if not pts or not np.allclose(p, pts[-1]):
                pts.append(p)
    if not pts:
        raise ValueError("hatch too wide: no diagonal passes intersect the domain")
    return ScanPath(waypoints=np.asarray(pts), speed_m_s=speed_m_s, power_W=power_W)


def path_from_actions(
    grid: GridSpec,
    actions: Sequence[str],
    speed_m_s: float = 0.5,
    power_W: float = 25.0,
) -> ScanPath:
    """Decode an action string into the visited-grid-point polyline.

    Starts at the grid origin. Re-validates bounds and revisits so malformed
    sequences fail loudly with the offending step index.
    """
    index = 0
    visited = {0}
    indices = [0]
    for step, action in enumerate(actions):
        if action not in ACTION_DELTAS:
            raise InvalidPathError(f"unknown action {action!r}", step=step)
        nxt = grid.neighbor(index, action)
        if nxt is None:
            raise InvalidPathError(f"action {action} leaves the grid", step=step)
        if nxt in visited:
            raise InvalidPathError(f"action {action} revisits point {nxt}", step=step)
        visited.add(nxt)
        indices.append(nxt)
        index = nxt
    waypoints = np.asarray([grid.point_mm(i) for i in indices])
    return ScanPath(waypoints=waypoints, speed_m_s=speed_m_s, power_W=power_W)


def serpentine_actions(n: int) -> list:
    """Row-by-row coverage action string for an n x n grid (the zigzag baseline)."""
    actions = []
    for row in range(n):
        actions.extend(["Right" if row % 2 == 0 else "Left"] * (n - 1))
        if row < n - 1:
            actions.append("Up")
    return actions
