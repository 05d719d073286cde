"""Per-movement reward precomputation.

For every directed movement between neighboring grid points, a single-segment
scan is simulated on a fresh copy of the initial microstructure and the
melted-region morphology (mean aspect ratio, mean grain volume, melted voxel
count) is recorded. History independence is by construction: each movement
starts from the same pristine field, which is what lets one table serve every
training episode.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import GrainField
from .errors import PartialTableError
from .morphology import label_grains, stats
from .pf import PFParams, run_track
from .scanpath import ACTIONS, GridSpec, ScanPath
from .thermal import LaserParams, MaterialThermal

OUT_OF_BOUNDS = -1


@dataclass(frozen=True)
class Movement:
    """One directed grid movement; ``to_index`` is OUT_OF_BOUNDS when it exits."""

    from_index: int
    action: str
    to_index: int

    @property
    def in_bounds(self) -> bool:
        return self.to_index != OUT_OF_BOUNDS


@dataclass(frozen=True)
class MovementMetrics:
    avg_aspect_ratio: float
    avg_grain_volume_um3: float
    melted_voxels: int
    valid: bool


EMPTY_METRICS = MovementMetrics(0.0, 0.0, 0, False)


@dataclass
class RewardTable:
    grid: GridSpec
    entries: dict  # Movement -> MovementMetrics
    backend: str = "dns"
    config_hash: str = ""

    def metrics_for(self, from_index: int, action: str) -> MovementMetrics:
        to_index = self.grid.neighbor(from_index, action)
        m = Movement(from_index, action, OUT_OF_BOUNDS if to_index is None else to_index)
        return self.entries[m]


def enumerate_movements(grid: GridSpec) -> list:
    """All 4*n^2 (point, action) pairs in row-major point, fixed action order."""
    moves = []
    for index in range(grid.n * grid.n):
        for action in ACTIONS:
            to_index = grid.neighbor(index, action)
            moves.append(Movement(index, action, OUT_OF_BOUNDS if to_index is None else to_index))
    return moves


def movement_metrics(
    movement: Movement,
    grid: GridSpec,
    base: GrainField,
    laser: LaserParams,
    mat: MaterialThermal,
    pf_params: PFParams,
    cooldown_steps: int = 150,
    min_volume_um3: float = 500.0,
) -> MovementMetrics:
    """Morphology of the melted region after scanning one segment.

    Runs on a copy of ``base``; a movement whose segment never melts anything
    yields the empty-metrics flag rather than NaNs.
    """
    if not movement.in_bounds:
        raise ValueError(f"movement {movement} leaves the grid")
    a = grid.point_mm(movement.from_index)
    b = grid.point_mm(movement.to_index)
    path = ScanPath(waypoints=np.stack([a, b]), speed_m_s=laser.speed_m_s, power_W=laser.power_W)
    # Only the end state matters here; a huge stride keeps just first/last.
    traj = run_track(base, path, laser, mat, pf_params,
                     sample_every=10 ** 9, cooldown_steps=cooldown_steps)
    if traj.mask.count == 0:
        return EMPTY_METRICS
    grains = label_grains(traj.final, mask=traj.mask)
    if not grains:
        return EMPTY_METRICS
    s = stats(grains, min_volume_um3=min_volume_um3)
    mean_ar = s.mean_aspect_ratio
    if not np.isfinite(mean_ar):
        # All melted grains below the aspect-ratio volume filter: fall back
        # to the unfiltered mean so the movement still carries a reward.
        mean_ar = float(np.mean([g.aspect_ratio for g in grains]))
    return MovementMetrics(
        avg_aspect_ratio=float(mean_ar),
        avg_grain_volume_um3=float(s.mean_volume_um3),
        melted_voxels=traj.mask.count,
        valid=True,
    )


def _compute_one(args):
    movement, grid, base, laser, mat, pf_params, cooldown = args
    return movement, movement_metrics(movement, grid, base, laser, mat, pf_params, cooldown)


def default_parallelism() -> int:
    env = os.environ.get("MELTPATH_THREADS")
    if env:
        return max(1, int(env))
    return 1


def build_table(
    grid: GridSpec,
    base: GrainField,
    laser: LaserParams,
    mat: MaterialThermal,
    pf_params: PFParams,
    parallelism: Optional[int] = None,
    cooldown_steps: int = 150,
    backend: str = "dns",
    config_hash: str = "",
    progress=None,
) -> RewardTable:
    """Compute metrics for every in-bounds movement.

    The table content is a pure map over movements, so results are identical
    at any parallelism level; entries are assembled in enumeration order
    regardless of completion order.
    """
    if backend != "dns":
        raise ValueError(f"unknown backend {backend!r}; the surrogate writes its own tables")
    movements = enumerate_movements(grid)
    workers = default_parallelism() if parallelism is None else max(1, parallelism)
    entries = {}
    in_bounds = [m for m in movements if m.in_bounds]
    failures = []
    if workers == 1:
        results = {}
        for m in in_bounds:
            try:
                results[m] = movement_metrics(m, grid, base, laser, mat, pf_params, cooldown_steps)
            except Exception as exc:  # pragma: no cover - solver failures are rare
                failures.append((m, repr(exc)))
            if progress is not None:
                progress(m)
    else:
        args = [(m, grid, base, laser, mat, pf_params, cooldown_steps) for m in in_bounds]
        results = {}
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for m, metrics in pool.map(_compute_one, args):
                results[m] = metrics
                if progress is not None:
                    progress(m)
    if failures:
        raise PartialTableError(
            f"{len(failures)} movements failed: {failures[:3]}",
            failed_movements=[m for m, _ in failures],
        )
    for m in movements:
        entries[m] = results[m] if m.in_bounds else EMPTY_METRICS
    return RewardTable(grid=grid, entries=entries, backend=backend, config_hash=config_hash)


# ---------------------------------------------------------------------------
# CSV round trip. Columns and row order are the cross-backend contract.
# ---------------------------------------------------------------------------

CSV_HEADER = "from_index,action,to_index,avg_aspect_ratio,avg_grain_volume_um3,melted_voxels,valid"


def write_table_csv(path, table: RewardTable) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# backend={table.backend} config_hash={table.config_hash} "
                 f"grid_n={table.grid.n} hatch_mm={table.grid.hatch_mm:.9g} "
                 f"origin_mm={table.grid.origin_mm[0]:.9g},{table.grid.origin_mm[1]:.9g} "
                 f"z_mm={table.grid.z_mm:.9g}\n")
        fh.write(CSV_HEADER + "\n")
        for m in enumerate_movements(table.grid):
            e = table.entries[m]
            fh.write(
                f"{m.from_index},{m.action},{m.to_index},"
                f"{e.avg_aspect_ratio:.9g},{e.avg_grain_volume_um3:.9g},"
                f"{e.melted_voxels},{int(e.valid)}\n"
            )


def read_table_csv(path) -> RewardTable:
    meta = {}
    entries = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            if not line or line.startswith("from_index"):
                continue
            f_idx, action, t_idx, ar, gv, melted, valid = line.split(",")
            m = Movement(int(f_idx), action, int(t_idx))
            entries[m] = MovementMetrics(float(ar), float(gv), int(melted), valid == "1")
    n = int(meta.get("grid_n", 0))
    hatch = float(meta.get("hatch_mm", 0.0))
    origin = tuple(float(v) for v in meta.get("origin_mm", "0,0").split(","))
    z = float(meta.get("z_mm", 0.0))
    if n < 2 or hatch <= 0:
        raise ValueError(f"table {path} lacks grid metadata")
    grid = GridSpec(n=n, hatch_mm=hatch, origin_mm=origin, z_mm=z)
    expected = {m for m in enumerate_movements(grid)}
    if set(entries) != expected:
        raise ValueError(f"table {path} does not cover all 4*n^2 movements")
    return RewardTable(grid=grid, entries=entries,
                       backend=meta.get("backend", "unknown"),
                       config_hash=meta.get("config_hash", ""))
