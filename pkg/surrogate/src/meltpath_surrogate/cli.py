"""Command-line interface: train, rollout, export-table."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import vgf
from .rollout import ThermalConfig, rollout
from .table import build_surrogate_table, write_table_csv
from .training import dataset_hash, load_model, save_model, train_unet, write_loss_curve

CONFIG_DEFAULTS = {
    "domain": {"size_mm": [1.0, 1.0, 0.2], "voxel_um": 20.0},
    "material": {"conductivity_W_mK": 30.0, "diffusivity_m2_s": 1.0e-5,
                 "ambient_K": 293.0, "melt_K": 1700.0, "clamp_radius_um": 10.0},
    "laser": {"power_W": 30.0, "speed_m_s": 0.05},
    "grid": {"n": 5, "hatch_mm": 0.15, "z_mm": None},
    "voi": {"dims_mm": [0.64, 0.64, 0.16]},
}


def load_sim_config(path):
    """Read the simulator's YAML config for the keys this package needs."""
    cfg = {k: dict(v) for k, v in CONFIG_DEFAULTS.items()}
    if path:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        for section, values in data.items():
            if section in cfg and isinstance(values, dict):
                cfg[section].update(values)
    return cfg


def thermal_from_config(cfg) -> ThermalConfig:
    mat, laser = cfg["material"], cfg["laser"]
    return ThermalConfig(
        power_W=laser["power_W"], speed_m_s=laser["speed_m_s"],
        conductivity_W_mK=mat["conductivity_W_mK"],
        diffusivity_m2_s=mat["diffusivity_m2_s"], ambient_K=mat["ambient_K"],
        melt_K=mat["melt_K"], clamp_radius_um=mat["clamp_radius_um"],
    )


def grid_geometry(cfg):
    g, d = cfg["grid"], cfg["domain"]
    extent = (g["n"] - 1) * g["hatch_mm"]
    origin = ((d["size_mm"][0] - extent) / 2.0, (d["size_mm"][1] - extent) / 2.0)
    z = d["size_mm"][2] if g.get("z_mm") is None else g["z_mm"]
    return g["n"], g["hatch_mm"], origin, z


def voi_dims_voxels(cfg):
    voxel = cfg["domain"]["voxel_um"]
    return tuple(int(np.floor(v * 1000.0 / voxel + 0.5)) for v in cfg["voi"]["dims_mm"])


def cmd_train(args):
    model, losses = train_unet(args.manifest, epochs=args.epochs,
                               base_channels=args.base_channels, depth=args.depth,
                               lr=args.lr, batch_size=args.batch_size, seed=args.seed)
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    fingerprint = dataset_hash(args.manifest)
    save_model(args.out, model, fingerprint, n_ori=manifest["n_ori"],
               voxel_um=manifest["voxel_um"],
               extra={"sample_every": manifest["sample_every"],
                      "dt_s": manifest["dt_s"],
                      "ambient_K": manifest.get("ambient_K", 293.0),
                      "melt_K": manifest.get("melt_K", 1700.0),
                      "config_hash": manifest.get("config_hash", "")})
    if args.loss_curve:
        write_loss_curve(args.loss_curve, losses, fingerprint)
    print(f"trained {args.epochs} epochs, final loss {losses[-1]:.5f} -> {args.out}")
    return 0


def cmd_rollout(args):
    model, meta = load_model(args.model)
    cfg = load_sim_config(args.config)
    _, labels = vgf.read(args.field)
    waypoints = _read_path_csv(args.path)
    tc = thermal_from_config(cfg)
    result = rollout(model, labels, float(meta["voxel_um"]), waypoints, tc,
                     voi_dims=voi_dims_voxels(cfg), dt_s=float(meta["dt_s"]),
                     sample_every=int(meta["sample_every"]), n_ori=int(meta["n_ori"]))
    vgf.write(args.out, result.labels, float(meta["voxel_um"]))
    if args.mask_out:
        vgf.write(args.mask_out, result.melted.astype(np.int32), float(meta["voxel_um"]))
    print(f"rolled {result.ml_steps} ML steps "
          f"({result.seconds_per_step * 1e3:.1f} ms/step) -> {args.out}")
    return 0


def _read_path_csv(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("x_mm") or not line.strip():
                continue
            rows.append([float(v) for v in line.split(",")][:3])
    return np.asarray(rows)


def cmd_export_table(args):
    model, meta = load_model(args.model)
    cfg = load_sim_config(args.config)
    n, hatch, origin, z = grid_geometry(cfg)
    if args.field:
        _, base = vgf.read(args.field)
    else:
        base = _base_field_from_simulator(cfg, args.simulator)
    tc = thermal_from_config(cfg)
    rows, per_step = build_surrogate_table(
        model, meta, base, float(meta["voxel_um"]), n, hatch, origin, z, tc,
        voi_dims=voi_dims_voxels(cfg), simulator=args.simulator)
    write_table_csv(args.out, rows, n, hatch, origin, z,
                    config_hash=str(meta.get("config_hash", "")))
    if args.timing_out:
        with open(args.timing_out, "w") as fh:
            json.dump([{"stage": "export-table", "backend": "surrogate",
                        "seconds_per_step": per_step,
                        "config_hash": str(meta.get("config_hash", ""))}], fh)
    n_valid = sum(1 for r in rows if r[6])
    print(f"wrote {args.out}: {len(rows)} movements, {n_valid} valid, "
          f"{per_step * 1e3:.1f} ms per ML step")
    return 0


def _base_field_from_simulator(cfg, simulator):
    """Generate the initial microstructure through the simulator CLI."""
    import subprocess
    import tempfile

    d = cfg["domain"]
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "base.vgf")
        subprocess.run(
            [simulator, "gen-voronoi",
             "--size", ",".join(str(v) for v in d["size_mm"]),
             "--voxel-um", str(d["voxel_um"]),
             "--seeds", str(cfg.get("microstructure", {}).get("n_seeds", 120)),
             "--orientations", "20",
             "--seed", str(cfg.get("microstructure", {}).get("seed", 7)),
             "--out", out],
            check=True, capture_output=True)
        _, labels = vgf.read(out)
    return labels


def build_parser():
    parser = argparse.ArgumentParser(prog="meltpath-surrogate",
                                     description="3D U-Net surrogate for meltpath")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on an exported VOI dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--base-channels", type=int, default=8)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss-curve")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rollout", help="advance a field along a path")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--field", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--mask-out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("export-table", help="emit a reward table CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--field", help="initial grain field (.vgf); default: via simulator")
    p.add_argument("--simulator", default="meltpath")
    p.add_argument("--timing-out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_table)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
