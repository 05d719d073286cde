"""End-to-end experiment stages shared by the CLI.

Every stage appends wall-clock rows to ``timings.json`` in its output
directory; the ``ledger`` command collates those into CSV and, when both
DNS and surrogate per-step timings are present, their ratio.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .domain import GrainField, apply_augmentation, extract_voi, AUGMENTATION_NAMES
from .errors import ConfigError
from .morphology import label_grains, rank_matched_series, stats
from .pf import run_track
from .scanpath import ScanPath, path_from_actions, serpentine_actions
from .thermal import TemperatureField
from . import vgf

TIMINGS_FILE = "timings.json"


def record_timing(out_dir, stage: str, seconds: float, config_hash: str, **extra) -> None:
    path = os.path.join(out_dir, TIMINGS_FILE)
    rows = []
    if os.path.exists(path):
        with open(path) as fh:
            rows = json.load(fh)
    rows.append({"stage": stage, "seconds": seconds, "config_hash": config_hash, **extra})
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=1)


class StageTimer:
    def __init__(self, out_dir, stage: str, config_hash: str, **extra):
        self.out_dir, self.stage, self.config_hash, self.extra = out_dir, stage, config_hash, extra

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        if exc[0] is None:
            record_timing(self.out_dir, self.stage, time.perf_counter() - self.t0,
                          self.config_hash, **self.extra)
        return False


def field_hash(field: GrainField) -> str:
    return hashlib.sha256(field.labels.tobytes()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# simulate: one path on one field, trajectory written as .vgf pairs.
# ---------------------------------------------------------------------------


def simulate_path(cfg: ExperimentConfig, field: GrainField, path: ScanPath, out_dir,
                  sample_every: int = 100, cooldown_steps: Optional[int] = None) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    cooldown = cfg.cooldown_steps if cooldown_steps is None else cooldown_steps
    t0 = time.perf_counter()
    traj = run_track(field, path, cfg.laser, cfg.material, cfg.pf_params,
                     sample_every=sample_every, cooldown_steps=cooldown)
    seconds = time.perf_counter() - t0
    entries = []
    for (step, gf, tf), t_s, pos in zip(traj.samples, traj.times_s, traj.laser_mm):
        gpath = os.path.join(out_dir, f"grain_{step:06d}.vgf")
        tpath = os.path.join(out_dir, f"temp_{step:06d}.vgf")
        vgf.save_grain_field(gpath, gf)
        vgf.save_temperature_field(tpath, tf)
        entries.append({
            "step": step, "time_s": t_s, "laser_mm": pos,
            "grain": os.path.basename(gpath), "temperature": os.path.basename(tpath),
        })
    vgf.save_melt_mask(os.path.join(out_dir, "melt_mask.vgf"), traj.mask)
    vgf.save_grain_field(os.path.join(out_dir, "final.vgf"), traj.final)
    manifest = {
        "config_hash": cfg.config_hash,
        "n_steps": traj.n_steps,
        "dt_s": cfg.pf_params.dt_s,
        "sample_every": sample_every,
        "cooldown_steps": cooldown,
        "melted_voxels": traj.mask.count,
        "samples": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    record_timing(out_dir, "simulate", seconds, cfg.config_hash,
                  n_steps=traj.n_steps, backend="dns",
                  seconds_per_step=seconds / max(traj.n_steps, 1))
    return manifest


# ---------------------------------------------------------------------------
# export-voi: training dataset for the surrogate.
# ---------------------------------------------------------------------------

POWER_SWEEP_W = (20.0, 22.0, 24.0, 26.0, 28.0, 30.0)


def export_voi_dataset(cfg: ExperimentConfig, tracks: int, out_dir,
                       sample_every: int = 100, augment: bool = True,
                       track_steps: Optional[int] = None,
                       power_sweep_W=POWER_SWEEP_W) -> dict:
    """Single-track runs across the power sweep, sampled as VOI 4-tuples.

    Each sample pairs the VOI state at step k with the state at
    k + sample_every: (grain_k, T_k, T_k+s, grain_k+s), optionally expanded
    by the 19 pinned symmetry variants.
    """
    os.makedirs(out_dir, exist_ok=True)
    from dataclasses import replace as dc_replace

    samples = []
    t_start = time.perf_counter()
    sample_id = 0
    for track in range(tracks):
        power = power_sweep_W[track % len(power_sweep_W)]
        laser = dc_replace(cfg.laser, power_W=power)
        base = cfg.initial_field_for_track(track)
        sx, sy = cfg.grid.origin_mm
        ex = sx + (cfg.grid.n - 1) * cfg.grid.hatch_mm
        z = cfg.grid.z_mm
        path = ScanPath(waypoints=np.array([[sx, sy, z], [ex, sy, z]]),
                        speed_m_s=laser.speed_m_s, power_W=power)
        traj = run_track(base, path, laser, cfg.material, cfg.pf_params,
                         sample_every=sample_every, n_steps=track_steps,
                         cooldown_steps=0)
        recs = traj.samples
        for (k0, g0, t0f), (k1, g1, t1f), pos in zip(recs[:-1], recs[1:], traj.laser_mm):
            if k1 - k0 != sample_every:
                continue
            if pos is None:
                continue
            center = (pos[0], pos[1], z - cfg.voi_dims_mm[2] / 2.0)
            gp0, window = extract_voi(g0, center, cfg.voi_dims_mm)
            gp1 = GrainField(spec=gp0.spec, labels=g1.labels[_win(window)].copy(), n_ori=g1.n_ori)
            tp0 = TemperatureField(spec=gp0.spec, T=t0f.T[_win(window)].copy())
            tp1 = TemperatureField(spec=gp0.spec, T=t1f.T[_win(window)].copy())
            variants = [("identity", gp0.labels, tp0.T, tp1.T, gp1.labels)]
            if augment:
                for name in AUGMENTATION_NAMES:
                    variants.append((
                        name,
                        apply_augmentation(name, gp0.labels),
                        apply_augmentation(name, tp0.T),
                        apply_augmentation(name, tp1.T),
                        apply_augmentation(name, gp1.labels),
                    ))
            for name, l0, T0, T1, l1 in variants:
                files = {}
                spec = gp0.spec.with_dims(l0.shape)
                for tag, arr, writer in (
                    ("grain0", l0, "grain"), ("temp0", T0, "temp"),
                    ("temp1", T1, "temp"), ("grain1", l1, "grain"),
                ):
                    fname = f"sample_{sample_id:06d}_{tag}.vgf"
                    if writer == "grain":
                        vgf.save_grain_field(os.path.join(out_dir, fname),
                                             GrainField(spec=spec, labels=arr, n_ori=cfg.n_ori))
                    else:
                        vgf.save_temperature_field(os.path.join(out_dir, fname),
                                                   TemperatureField(spec=spec, T=arr))
                    files[tag] = fname
                samples.append({
                    "id": sample_id, "track": track, "power_W": power,
                    "step": k0, "transform": name, "files": files,
                })
                sample_id += 1
    manifest = {
        "config_hash": cfg.config_hash,
        "n_ori": cfg.n_ori,
        "voxel_um": cfg.domain.voxel_size_um,
        "sample_every": sample_every,
        "dt_s": cfg.pf_params.dt_s,
        "ambient_K": cfg.material.ambient_K,
        "melt_K": cfg.material.melt_K,
        "augmented": augment,
        "sample_count": len(samples),
        "samples": samples,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    record_timing(out_dir, "export-voi", time.perf_counter() - t_start, cfg.config_hash,
                  samples=len(samples))
    return manifest


def _win(window):
    return tuple(slice(o, o + d) for o, d in zip(window.origin_voxel, window.dims))


# ---------------------------------------------------------------------------
# compare: DRL path vs the zigzag baseline on the same initial field.
# ---------------------------------------------------------------------------


@dataclass
class ArmResult:
    name: str
    stats: object
    melted_voxels: int
    seconds: float
    grain_volumes: list
    grain_aspects: list


def evaluate_path_morphology(cfg: ExperimentConfig, field: GrainField, path: ScanPath,
                             name: str) -> ArmResult:
    t0 = time.perf_counter()
    traj = run_track(field, path, cfg.laser, cfg.material, cfg.pf_params,
                     sample_every=10 ** 9, cooldown_steps=cfg.cooldown_steps)
    grains = label_grains(traj.final, mask=traj.mask, connectivity=cfg.connectivity)
    s = stats(grains, min_volume_um3=cfg.min_volume_um3)
    return ArmResult(
        name=name, stats=s, melted_voxels=traj.mask.count,
        seconds=time.perf_counter() - t0,
        grain_volumes=[g.volume_um3 for g in grains],
        grain_aspects=[g.aspect_ratio for g in grains
                       if g.volume_um3 >= cfg.min_volume_um3],
    )


def run_compare(cfg: ExperimentConfig, drl_path: ScanPath, out_dir,
                drl_label: str = "drl") -> dict:
    """Simulate the DRL path and the zigzag baseline on one shared field."""
    os.makedirs(out_dir, exist_ok=True)
    base = cfg.initial_field()
    zig = path_from_actions(cfg.grid, serpentine_actions(cfg.grid.n),
                            speed_m_s=cfg.laser.speed_m_s, power_W=cfg.laser.power_W)
    arms = [
        evaluate_path_morphology(cfg, base, zig, "zigzag"),
        evaluate_path_morphology(cfg, base, drl_path, drl_label),
    ]
    for arm in arms:
        record_timing(out_dir, f"compare:{arm.name}", arm.seconds, cfg.config_hash,
                      backend="dns")
        _write_histogram_csv(os.path.join(out_dir, f"hist_volume_{arm.name}.csv"),
                             arm.stats.volume_histogram, cfg.config_hash)
        _write_histogram_csv(os.path.join(out_dir, f"hist_aspect_{arm.name}.csv"),
                             arm.stats.aspect_histogram, cfg.config_hash)
    zig_r, drl_r = arms
    vol_a, vol_b = rank_matched_series(drl_r.grain_volumes, zig_r.grain_volumes)
    asp_a, asp_b = rank_matched_series(drl_r.grain_aspects, zig_r.grain_aspects)
    report = {
        "config_hash": cfg.config_hash,
        "initial_field_hash": {a.name: field_hash(base) for a in arms},
        "mean_aspect_ratio": {a.name: a.stats.mean_aspect_ratio for a in arms},
        "mean_volume_um3": {a.name: a.stats.mean_volume_um3 for a in arms},
        "grain_count": {a.name: a.stats.grain_count for a in arms},
        "melted_voxels": {a.name: a.melted_voxels for a in arms},
        "delta_mean_aspect_ratio": drl_r.stats.mean_aspect_ratio - zig_r.stats.mean_aspect_ratio,
        "delta_mean_volume_um3": drl_r.stats.mean_volume_um3 - zig_r.stats.mean_volume_um3,
        "runtime_s": {a.name: a.seconds for a in arms},
        "rank_matched_counts": {"volume": len(vol_a), "aspect": len(asp_a)},
    }
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=1)
    return report


def _write_histogram_csv(path, histogram, config_hash: str) -> None:
    counts, edges = histogram
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            writer.writerow([f"{lo:.9g}", f"{hi:.9g}", int(c)])


# ---------------------------------------------------------------------------
# ledger: collate stage timings.
# ---------------------------------------------------------------------------


def write_ledger_csv(run_dirs, out_path) -> list:
    rows = []
    for run_dir in run_dirs:
        path = os.path.join(run_dir, TIMINGS_FILE)
        if not os.path.exists(path):
            continue
        with open(path) as fh:
            for row in json.load(fh):
                row = dict(row)
                row["run_dir"] = run_dir
                rows.append(row)
    dns = [r["seconds_per_step"] for r in rows
           if r.get("backend") == "dns" and "seconds_per_step" in r]
    rom = [r["seconds_per_step"] for r in rows
           if r.get("backend") == "surrogate" and "seconds_per_step" in r]
    ratio = ""
    if dns and rom:
        # DNS cost of one surrogate step (= sample_every DNS steps) over one
        # surrogate prediction.
        ratio = f"{np.mean(dns) * 100.0 / np.mean(rom):.6g}"
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_dir", "stage", "seconds", "config_hash",
                         "seconds_per_step", "backend", "dns_over_surrogate_ratio"])
        for i, r in enumerate(rows):
            writer.writerow([
                r.get("run_dir", ""), r.get("stage", ""), f"{r.get('seconds', 0.0):.6g}",
                r.get("config_hash", ""),
                f"{r['seconds_per_step']:.6g}" if "seconds_per_step" in r else "",
                r.get("backend", ""), ratio if i == 0 else "",
            ])
    return rows
