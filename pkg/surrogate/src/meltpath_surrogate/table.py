"""Reward-table emission in the simulator's CSV schema.

Movement metrics come from surrogate rollouts; the morphology numbers are
computed by the simulator's ``analyze`` command on the rolled-out field and
melt mask, so the two backends share one measurement path and one file
contract.
"""

from __future__ import annotations

import csv
import os
import subprocess
import tempfile

import numpy as np

from . import vgf
from .rollout import ThermalConfig, rollout

ACTIONS = ("Up", "Down", "Left", "Right")
ACTION_DELTAS = {"Up": (1, 0), "Down": (-1, 0), "Left": (0, -1), "Right": (0, 1)}
CSV_HEADER = "from_index,action,to_index,avg_aspect_ratio,avg_grain_volume_um3,melted_voxels,valid"
OUT_OF_BOUNDS = -1


def grid_point(n, hatch, origin, z, index):
    row, col = divmod(index, n)
    return np.array([origin[0] + col * hatch, origin[1] + row * hatch, z])


def neighbor(n, index, action):
    row, col = divmod(index, n)
    dr, dc = ACTION_DELTAS[action]
    row, col = row + dr, col + dc
    if not (0 <= row < n and 0 <= col < n):
        return None
    return row * n + col


def enumerate_movements(n):
    moves = []
    for index in range(n * n):
        for action in ACTIONS:
            to = neighbor(n, index, action)
            moves.append((index, action, OUT_OF_BOUNDS if to is None else to))
    return moves


def analyze_with_simulator(labels, melted, voxel_um, min_volume_um3=500.0,
                           simulator="meltpath"):
    """Invoke the simulator CLI on temp files; returns (count, mean GV, mean AR)."""
    with tempfile.TemporaryDirectory() as tmp:
        field_path = os.path.join(tmp, "field.vgf")
        mask_path = os.path.join(tmp, "mask.vgf")
        stats_path = os.path.join(tmp, "stats.csv")
        vgf.write(field_path, labels.astype(np.int32), voxel_um)
        vgf.write(mask_path, melted.astype(np.int32), voxel_um)
        subprocess.run(
            [simulator, "analyze", "--field", field_path, "--mask", mask_path,
             "--min-volume", str(min_volume_um3), "--out", stats_path],
            check=True, capture_output=True)
        with open(stats_path) as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, values = rows[0], rows[1]
    rec = dict(zip(header, values))
    return int(rec["grain_count"]), float(rec["mean_volume_um3"]), float(rec["mean_aspect_ratio"])


def build_surrogate_table(model, meta, base_labels, voxel_um, grid_n, hatch_mm,
                          origin_mm, z_mm, tc: ThermalConfig, voi_dims,
                          config_hash: str = "", simulator: str = "meltpath",
                          progress=None):
    """Per-movement rollout metrics for every in-bounds movement."""
    step_s = float(meta["dt_s"]) * int(meta["sample_every"])
    n_ori = int(meta["n_ori"])
    rows = []
    per_step_times = []
    for index, action, to in enumerate_movements(grid_n):
        if to == OUT_OF_BOUNDS:
            rows.append((index, action, to, 0.0, 0.0, 0, 0))
            continue
        a = grid_point(grid_n, hatch_mm, origin_mm, z_mm, index)
        b = grid_point(grid_n, hatch_mm, origin_mm, z_mm, to)
        result = rollout(model, base_labels, voxel_um, np.stack([a, b]), tc,
                         voi_dims=voi_dims, dt_s=float(meta["dt_s"]),
                         sample_every=int(meta["sample_every"]), n_ori=n_ori)
        per_step_times.append(result.seconds_per_step)
        melted_count = int(result.melted.sum())
        if melted_count == 0:
            rows.append((index, action, to, 0.0, 0.0, 0, 0))
        else:
            count, mean_gv, mean_ar = analyze_with_simulator(
                result.labels, result.melted, voxel_um, simulator=simulator)
            if count == 0 or not np.isfinite(mean_ar):
                rows.append((index, action, to, 0.0, 0.0, melted_count, 0))
            else:
                rows.append((index, action, to, mean_ar, mean_gv, melted_count, 1))
        if progress is not None:
            progress((index, action))
    return rows, (float(np.mean(per_step_times)) if per_step_times else 0.0)


def write_table_csv(path, rows, grid_n, hatch_mm, origin_mm, z_mm,
                    config_hash: str = "") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# backend=surrogate config_hash={config_hash} "
                 f"grid_n={grid_n} hatch_mm={hatch_mm:.9g} "
                 f"origin_mm={origin_mm[0]:.9g},{origin_mm[1]:.9g} "
                 f"z_mm={z_mm:.9g}\n")
        fh.write(CSV_HEADER + "\n")
        for index, action, to, ar, gv, melted, valid in rows:
            fh.write(f"{index},{action},{to},{ar:.9g},{gv:.9g},{melted},{valid}\n")
