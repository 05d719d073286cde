"""Experiment configuration: one YAML file drives every pipeline stage.

The schema is versioned and fully defaulted; the resolved configuration is
canonicalized and hashed, and that hash is embedded in every artifact a run
produces so outputs can be traced back to their exact settings.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import yaml

from .domain import DEFAULT_N_ORI, DomainSpec
from .dqn import RewardConfig, TrainConfig
from .errors import ConfigError
from .pf import PFParams
from .scanpath import GridSpec
from .thermal import LaserParams, MaterialThermal

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "domain": {"size_mm": [1.0, 1.0, 0.2], "voxel_um": 20.0},
    "material": {
        "conductivity_W_mK": 30.0,
        "diffusivity_m2_s": 1.0e-5,
        "ambient_K": 293.0,
        "melt_K": 1700.0,
        "clamp_radius_um": 10.0,
        "transition_band_K": 50.0,
    },
    "laser": {"power_W": 30.0, "speed_m_s": 0.05},
    "pf": {
        "sigma_J_m2": 0.5,
        "mobility_m4_Js": 3.2e-6,
        "boundary_width_um": 60.0,
        "gamma": 1.5,
        "n_ori": DEFAULT_N_ORI,
        "stability_factor": 0.1,
        "dt_s": None,
        "cooldown_steps": 200,
    },
    "microstructure": {"n_seeds": 120, "seed": 7},
    "grid": {"n": 5, "hatch_mm": 0.15, "z_mm": None},
    "voi": {"dims_mm": [0.17, 0.17, 0.07]},
    "reward": {"case": 1, "alpha": 0.5, "beta": 0.9, "gv_scale_um3": None},
    "training": {
        "lr": 0.001,
        "gamma": 0.99,
        "eps": 1.0,
        "eps_min": 0.01,
        "eps_decay": 0.995,
        "batch_size": 64,
        "target_sync_every": 500,
        "max_episodes": 15000,
        "snapshot_every": 100,
        "hidden": 64,
        "buffer_capacity": 10000,
        "init_q_bias": 0.0,
        "seed_env": 0,
        "seed_net": 1,
        "seed_action": 2,
        "seed_sampling": 3,
    },
    "analysis": {"min_volume_um3": 500.0, "connectivity": 6},
    "output_dir": "out",
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _deep_merge(base[key], value)
        else:
            out[key] = value
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    domain: DomainSpec = field(init=False)
    material: MaterialThermal = field(init=False)
    laser: LaserParams = field(init=False)
    pf_params: PFParams = field(init=False)
    grid: GridSpec = field(init=False)
    reward_cfg: RewardConfig = field(init=False)
    train_cfg: TrainConfig = field(init=False)

    def __post_init__(self):
        raw = self.raw
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(
                f"schema_version {raw.get('schema_version')!r} unsupported "
                f"(expected {SCHEMA_VERSION})"
            )
        try:
            d = raw["domain"]
            self.domain = DomainSpec(size_mm=tuple(d["size_mm"]), voxel_size_um=d["voxel_um"])
            self.material = MaterialThermal(**raw["material"])
            self.laser = LaserParams(**raw["laser"])
            pf = dict(raw["pf"])
            cooldown = pf.pop("cooldown_steps")
            self.pf_params = PFParams.from_materials(dx_um=d["voxel_um"], **pf)
            self.cooldown_steps = int(cooldown)
            g = raw["grid"]
            self.grid = GridSpec.centered(self.domain, n=g["n"], hatch_mm=g["hatch_mm"],
                                          z_mm=g["z_mm"])
            r = dict(raw["reward"])
            if r.get("gv_scale_um3") is None:
                r["gv_scale_um3"] = self.mean_initial_grain_volume_um3()
            self.reward_cfg = RewardConfig(**r)
            self.train_cfg = TrainConfig(**raw["training"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid configuration: {exc}") from exc
        self.n_seeds = int(raw["microstructure"]["n_seeds"])
        self.micro_seed = int(raw["microstructure"]["seed"])
        self.n_ori = int(raw["pf"]["n_ori"])
        self.voi_dims_mm = tuple(raw["voi"]["dims_mm"])
        self.min_volume_um3 = float(raw["analysis"]["min_volume_um3"])
        self.connectivity = int(raw["analysis"]["connectivity"])
        self.output_dir = raw["output_dir"]
        if self.n_seeds < 1:
            raise ConfigError("microstructure.n_seeds must be >= 1")

    def mean_initial_grain_volume_um3(self) -> float:
        return self.domain.volume_um3 / max(int(self.raw["microstructure"]["n_seeds"]), 1)

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]

    def initial_field(self):
        from .domain import generate_voronoi_microstructure

        return generate_voronoi_microstructure(
            self.domain, n_seeds=self.n_seeds, n_ori=self.n_ori, seed=self.micro_seed
        )

    def initial_field_for_track(self, track: int):
        """Fresh microstructure per exported track (seed offset by track)."""
        from .domain import generate_voronoi_microstructure

        return generate_voronoi_microstructure(
            self.domain, n_seeds=self.n_seeds, n_ori=self.n_ori,
            seed=self.micro_seed + track,
        )


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Merge defaults <- file <- overrides and validate."""
    raw = DEFAULTS
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"config root in {path} must be a mapping")
        raw = _deep_merge(raw, data)
    if overrides:
        raw = _deep_merge(raw, overrides)
    return ExperimentConfig(raw=raw)


def write_config(path, cfg: ExperimentConfig) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.raw, fh, sort_keys=True)
