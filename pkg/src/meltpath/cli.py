"""Command-line interface.

Subcommands: gen-voronoi, gen-path, simulate, analyze, export-voi,
reward-table, train, compare, ledger. Exit codes: 0 success, 2 config error,
3 numeric failure, 4 field-file format error. MELTPATH_THREADS caps the
parallelism of reward-table construction.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import shutil
import subprocess
import sys
import time

import numpy as np

from . import vgf
from .config import load_config, write_config
from .domain import generate_voronoi_microstructure
from .dqn import (RewardConfig, TrainConfig, extract_greedy_path, load_policy, save_policy,
                  train, write_episode_log_csv)
from .errors import ConfigError, FormatError, NumericFailure
from .harness import (StageTimer, export_voi_dataset, record_timing, run_compare,
                      simulate_path, write_ledger_csv)
from .morphology import label_grains, stats
from .reward import build_table, read_table_csv, write_table_csv
from .scanpath import GridSpec, diagonal, read_path_csv, spiral_clockwise, vertical_serpentine


def _parse_vec3(text):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(parts)


def cmd_gen_voronoi(args):
    from .domain import DomainSpec

    spec = DomainSpec(size_mm=args.size, voxel_size_um=args.voxel_um)
    field = generate_voronoi_microstructure(spec, n_seeds=args.seeds,
                                            n_ori=args.orientations, seed=args.seed)
    vgf.save_grain_field(args.out, field)
    print(f"wrote {args.out}: dims={spec.dims} seeds={args.seeds} classes={args.orientations}")
    return 0


def cmd_gen_path(args):
    cfg = load_config(args.config)
    kwargs = dict(speed_m_s=cfg.laser.speed_m_s, power_W=cfg.laser.power_W, z_mm=args.z_mm)
    if args.pattern == "serpentine":
        path = vertical_serpentine(cfg.domain, args.hatch, **kwargs)
    elif args.pattern == "spiral":
        path = spiral_clockwise(cfg.domain, args.hatch, **kwargs)
    elif args.pattern == "diagonal":
        path = diagonal(cfg.domain, args.hatch, **kwargs)
    else:
        raise ConfigError(f"unknown pattern {args.pattern!r}")
    path.write_csv(args.out, config_hash=cfg.config_hash)
    print(f"wrote {args.out}: {len(path.waypoints)} waypoints, "
          f"{path.total_length_mm:.3f} mm, {path.duration_s * 1e3:.3f} ms")
    return 0


def cmd_simulate(args):
    cfg = load_config(args.config)
    field = vgf.load_grain_field(args.field, n_ori=cfg.n_ori) if args.field else cfg.initial_field()
    path = read_path_csv(args.path)
    manifest = simulate_path(cfg, field, path, args.out_dir,
                             sample_every=args.sample_every, cooldown_steps=args.cooldown)
    print(f"simulated {manifest['n_steps']} steps, {len(manifest['samples'])} samples, "
          f"{manifest['melted_voxels']} melted voxels -> {args.out_dir}")
    return 0


def cmd_analyze(args):
    cfg = load_config(args.config)
    field = vgf.load_grain_field(args.field)
    mask = vgf.load_melt_mask(args.mask) if args.mask else None
    grains = label_grains(field, mask=mask, connectivity=args.connectivity)
    s = stats(grains, min_volume_um3=args.min_volume)
    with open(args.out, "w", newline="") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["grain_count", "mean_volume_um3", "mean_aspect_ratio"])
        writer.writerow([s.grain_count, f"{s.mean_volume_um3:.9g}", f"{s.mean_aspect_ratio:.9g}"])
    if args.hist_out:
        from .harness import _write_histogram_csv

        base, ext = os.path.splitext(args.hist_out)
        _write_histogram_csv(f"{base}_volume{ext}", s.volume_histogram, cfg.config_hash)
        _write_histogram_csv(f"{base}_aspect{ext}", s.aspect_histogram, cfg.config_hash)
    print(f"{s.grain_count} grains, mean volume {s.mean_volume_um3:.6g} um^3, "
          f"mean aspect ratio {s.mean_aspect_ratio:.6g}")
    return 0


def cmd_export_voi(args):
    cfg = load_config(args.config)
    manifest = export_voi_dataset(cfg, tracks=args.tracks, out_dir=args.out_dir,
                                  sample_every=args.sample_every,
                                  augment=not args.no_augment,
                                  track_steps=args.track_steps)
    print(f"exported {manifest['sample_count']} samples -> {args.out_dir}")
    return 0


def cmd_reward_table(args):
    overrides = {}
    if args.grid is not None:
        overrides.setdefault("grid", {})["n"] = args.grid
    if args.hatch is not None:
        overrides.setdefault("grid", {})["hatch_mm"] = args.hatch
    cfg = load_config(args.config, overrides=overrides)
    if args.backend == "surrogate":
        exe = shutil.which("meltpath-surrogate")
        if exe is None:
            raise ConfigError(
                "backend 'surrogate' requires the meltpath-surrogate package on PATH"
            )
        if not args.model:
            raise ConfigError("backend 'surrogate' requires --model")
        cmd = [exe, "export-table", "--model", args.model, "--out", args.out]
        if args.config:
            cmd += ["--config", args.config]
        subprocess.run(cmd, check=True)
        print(f"wrote {args.out} (surrogate backend)")
        return 0
    base = cfg.initial_field()
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    done = []

    def progress(m):
        done.append(m)
        if len(done) % 10 == 0:
            print(f"  {len(done)} movements done", flush=True)

    with StageTimer(out_dir, "reward-table", cfg.config_hash, backend="dns"):
        table = build_table(cfg.grid, base, cfg.laser, cfg.material, cfg.pf_params,
                            parallelism=args.parallelism, cooldown_steps=cfg.cooldown_steps,
                            config_hash=cfg.config_hash, progress=progress)
    write_table_csv(args.out, table)
    n_valid = sum(1 for e in table.entries.values() if e.valid)
    print(f"wrote {args.out}: {len(table.entries)} movements, {n_valid} in-bounds valid")
    return 0


def cmd_train(args):
    cfg = load_config(args.config)
    table = read_table_csv(args.table)
    reward_overrides = {"case": args.case}
    if args.alpha is not None:
        reward_overrides["alpha"] = args.alpha
    if args.beta is not None:
        reward_overrides["beta"] = args.beta
    reward_cfg = RewardConfig(
        case=args.case,
        alpha=args.alpha if args.alpha is not None else cfg.reward_cfg.alpha,
        beta=args.beta if args.beta is not None else cfg.reward_cfg.beta,
        gv_scale_um3=args.gv_scale if args.gv_scale is not None else cfg.reward_cfg.gv_scale_um3,
    )
    tc = cfg.train_cfg
    train_cfg = TrainConfig(
        lr=tc.lr, gamma=tc.gamma, eps=tc.eps, eps_min=tc.eps_min, eps_decay=tc.eps_decay,
        batch_size=tc.batch_size, target_sync_every=tc.target_sync_every,
        max_episodes=args.episodes if args.episodes is not None else tc.max_episodes,
        snapshot_every=tc.snapshot_every, hidden=tc.hidden,
        buffer_capacity=tc.buffer_capacity, init_q_bias=tc.init_q_bias,
        seed_env=args.seed, seed_net=args.seed + 1,
        seed_action=args.seed + 2, seed_sampling=args.seed + 3,
        stop_at_reward=args.stop_at_reward,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    result = train(table.grid, table, reward_cfg, train_cfg)
    seconds = time.perf_counter() - t0
    write_episode_log_csv(os.path.join(args.out_dir, "episodes.csv"),
                          result.episodes, config_hash=cfg.config_hash)
    save_policy(os.path.join(args.out_dir, "policy.npz"), result.params, table.grid,
                config_hash=cfg.config_hash)
    for episode, report in result.snapshots:
        if report["actions"]:
            from .scanpath import path_from_actions

            snap = path_from_actions(table.grid, report["actions"],
                                     speed_m_s=cfg.laser.speed_m_s, power_W=cfg.laser.power_W)
            snap.write_csv(os.path.join(args.out_dir, f"toolpath_ep{episode:06d}.csv"),
                           config_hash=cfg.config_hash)
    path, report = extract_greedy_path(result.params, table.grid, table, reward_cfg,
                                       speed_m_s=cfg.laser.speed_m_s, power_W=cfg.laser.power_W)
    if path is not None:
        path.write_csv(os.path.join(args.out_dir, "toolpath_final.csv"),
                       config_hash=cfg.config_hash)
    with open(os.path.join(args.out_dir, "train_report.json"), "w") as fh:
        json.dump({
            "config_hash": cfg.config_hash,
            "episodes_run": len(result.episodes),
            "stopped_early_at": result.stopped_early_at,
            "greedy": {k: v for k, v in report.items() if k != "all_actions"},
        }, fh, indent=1)
    record_timing(args.out_dir, "train", seconds, cfg.config_hash,
                  episodes=len(result.episodes))
    if args.svg:
        _render_reward_curve_svg(os.path.join(args.out_dir, "episodes.csv"),
                                 os.path.join(args.out_dir, "reward_curve.svg"))
    print(f"trained {len(result.episodes)} episodes; greedy coverage: "
          f"{report['visited_count']} points, full={report['full_coverage']}")
    return 0


def cmd_compare(args):
    cfg = load_config(args.config)
    if args.path:
        drl_path = read_path_csv(args.path)
    elif args.policy:
        params, grid = load_policy(args.policy)
        table = read_table_csv(args.table)
        drl_path, report = extract_greedy_path(params, grid, table, cfg.reward_cfg,
                                               speed_m_s=cfg.laser.speed_m_s,
                                               power_W=cfg.laser.power_W)
        if drl_path is None:
            raise ConfigError("policy rollout produced no valid movements to compare")
    else:
        raise ConfigError("compare needs --path or --policy (with --table)")
    report = run_compare(cfg, drl_path, args.out_dir)
    if args.svg:
        for kind in ("volume", "aspect"):
            _render_histogram_svg(args.out_dir, kind)
    d = report["delta_mean_aspect_ratio"]
    print(f"mean AR zigzag={report['mean_aspect_ratio']['zigzag']:.4f} "
          f"drl={report['mean_aspect_ratio']['drl']:.4f} delta={d:+.4f}")
    return 0


def cmd_ledger(args):
    rows = write_ledger_csv(args.run_dirs, args.out)
    print(f"wrote {args.out}: {len(rows)} stage rows")
    return 0


def _render_reward_curve_svg(episodes_csv, out_svg):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    eps, rewards = [], []
    with open(episodes_csv) as fh:
        for row in csv.DictReader(filter(lambda l: not l.startswith("#"), fh)):
            eps.append(int(row["episode"]))
            rewards.append(float(row["cumulative_reward"]))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(eps, rewards, lw=0.5)
    ax.set_xlabel("episode")
    ax.set_ylabel("cumulative reward")
    fig.tight_layout()
    fig.savefig(out_svg)
    plt.close(fig)


def _render_histogram_svg(out_dir, kind):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, color in (("zigzag", "tab:blue"), ("drl", "tab:orange")):
        path = os.path.join(out_dir, f"hist_{kind}_{name}.csv")
        if not os.path.exists(path):
            continue
        lo, hi, counts = [], [], []
        with open(path) as fh:
            for row in csv.DictReader(filter(lambda l: not l.startswith("#"), fh)):
                lo.append(float(row["bin_lo"]))
                hi.append(float(row["bin_hi"]))
                counts.append(int(row["count"]))
        centers = [(a + b) / 2 for a, b in zip(lo, hi)]
        width = (hi[0] - lo[0]) * 0.4 if lo else 0.1
        offset = -width / 2 if name == "zigzag" else width / 2
        ax.bar([c + offset for c in centers], counts, width=width, label=name, color=color)
    ax.set_xlabel(kind)
    ax.set_ylabel("grain count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, f"hist_{kind}.svg"))
    plt.close(fig)


def build_parser():
    parser = argparse.ArgumentParser(prog="meltpath",
                                     description="L-PBF scan-path design toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-voronoi", help="generate a Voronoi microstructure")
    p.add_argument("--size", type=_parse_vec3, default=(1.0, 1.0, 0.2),
                   help="domain size in mm, e.g. 1,1,0.2")
    p.add_argument("--voxel-um", type=float, default=20.0)
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--orientations", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_voronoi)

    p = sub.add_parser("gen-path", help="generate a heuristic scan pattern")
    p.add_argument("--pattern", choices=["serpentine", "spiral", "diagonal"], required=True)
    p.add_argument("--hatch", type=float, default=0.15)
    p.add_argument("--config")
    p.add_argument("--z-mm", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_path)

    p = sub.add_parser("simulate", help="run the DNS along a path")
    p.add_argument("--config")
    p.add_argument("--field", help=".vgf initial grain field (default: config microstructure)")
    p.add_argument("--path", required=True, help="path CSV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sample-every", type=int, default=100)
    p.add_argument("--cooldown", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="grain morphology statistics of a field")
    p.add_argument("--config")
    p.add_argument("--field", required=True)
    p.add_argument("--mask")
    p.add_argument("--min-volume", type=float, default=500.0)
    p.add_argument("--connectivity", type=int, choices=[6, 26], default=6)
    p.add_argument("--out", required=True)
    p.add_argument("--hist-out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export-voi", help="export a VOI training dataset")
    p.add_argument("--config")
    p.add_argument("--tracks", type=int, default=6)
    p.add_argument("--sample-every", type=int, default=100)
    p.add_argument("--track-steps", type=int, default=None)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_export_voi)

    p = sub.add_parser("reward-table", help="precompute per-movement rewards")
    p.add_argument("--config")
    p.add_argument("--grid", type=int, default=None, help="grid points per side")
    p.add_argument("--hatch", type=float, default=None)
    p.add_argument("--backend", choices=["dns", "surrogate"], default="dns")
    p.add_argument("--model", help="surrogate model path (backend=surrogate)")
    p.add_argument("--parallelism", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reward_table)

    p = sub.add_parser("train", help="train the DQN on a reward table")
    p.add_argument("--config")
    p.add_argument("--table", required=True)
    p.add_argument("--case", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gv-scale", type=float, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stop-at-reward", type=float, default=None)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="DRL path vs zigzag on one initial field")
    p.add_argument("--config")
    p.add_argument("--path", help="DRL path CSV")
    p.add_argument("--policy", help="trained policy .npz")
    p.add_argument("--table", help="reward table (needed with --policy)")
    p.add_argument("--svg", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ledger", help="collate stage timings into CSV")
    p.add_argument("--run-dirs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ledger)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
