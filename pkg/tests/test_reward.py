import numpy as np
import pytest

from meltpath.domain import DomainSpec, GrainField, generate_voronoi_microstructure
from meltpath.pf import PFParams
from meltpath.reward import (
    EMPTY_METRICS,
    Movement,
    MovementMetrics,
    OUT_OF_BOUNDS,
    RewardTable,
    build_table,
    enumerate_movements,
    movement_metrics,
    read_table_csv,
    write_table_csv,
)
from meltpath.scanpath import ACTIONS, GridSpec
from meltpath.thermal import LaserParams, MaterialThermal

# Desk-scale setup small enough for test-time DNS.
SPEC = DomainSpec(size_mm=(0.6, 0.6, 0.16), voxel_size_um=20.0)
MAT = MaterialThermal(clamp_radius_um=10.0)
LASER = LaserParams(power_W=30.0, speed_m_s=0.05)
PF = PFParams.from_materials(dx_um=20.0, sigma_J_m2=0.5, mobility_m4_Js=3.2e-6,
                             boundary_width_um=60.0, n_ori=10)
GRID2 = GridSpec(n=2, hatch_mm=0.2, origin_mm=(0.2, 0.2), z_mm=0.16)


def base_field(seed=3, n_seeds=40):
    return generate_voronoi_microstructure(SPEC, n_seeds=n_seeds, n_ori=10, seed=seed)


class TestEnumerate:
    def test_counts_5x5_and_11x11(self):
        g5 = GridSpec(n=5, hatch_mm=0.15, origin_mm=(0.2, 0.2), z_mm=0.2)
        g11 = GridSpec(n=11, hatch_mm=0.16, origin_mm=(0.1, 0.1), z_mm=0.2)
        assert len(enumerate_movements(g5)) == 100
        assert len(enumerate_movements(g11)) == 484

    def test_2x2_in_bounds_count(self):
        moves = enumerate_movements(GRID2)
        assert len(moves) == 16
        assert sum(1 for m in moves if m.in_bounds) == 8

    def test_deterministic_order(self):
        moves = enumerate_movements(GRID2)
        assert [(m.from_index, m.action) for m in moves[:4]] == [
            (0, "Up"), (0, "Down"), (0, "Left"), (0, "Right")]

    def test_5x5_boundary_exits(self):
        g5 = GridSpec(n=5, hatch_mm=0.15, origin_mm=(0.2, 0.2), z_mm=0.2)
        moves = enumerate_movements(g5)
        assert sum(1 for m in moves if m.in_bounds) == 80
        assert sum(1 for m in moves if not m.in_bounds) == 20


class TestMovementMetrics:
    def test_out_of_bounds_rejected(self):
        m = Movement(0, "Down", OUT_OF_BOUNDS)
        with pytest.raises(ValueError):
            movement_metrics(m, GRID2, base_field(), LASER, MAT, PF)

    def test_power_below_melting_gives_empty_flag(self):
        cold = LaserParams(power_W=0.1, speed_m_s=0.05)
        m = Movement(0, "Right", 1)
        metrics = movement_metrics(m, GRID2, base_field(), cold, MAT, PF, cooldown_steps=10)
        assert metrics == EMPTY_METRICS
        assert not np.isnan(metrics.avg_aspect_ratio)

    def test_opposite_movements_same_melt_on_uniform_field(self):
        # A single-orientation field plus the symmetric thermal model makes
        # the two directions of one edge melt mirror-image regions.
        uniform = GrainField(spec=SPEC, labels=np.zeros(SPEC.dims, np.int32), n_ori=10)
        fwd = movement_metrics(Movement(0, "Right", 1), GRID2, uniform, LASER, MAT, PF,
                               cooldown_steps=50)
        rev = movement_metrics(Movement(1, "Left", 0), GRID2, uniform, LASER, MAT, PF,
                               cooldown_steps=50)
        assert fwd.melted_voxels == rev.melted_voxels

    def test_pure_function_of_inputs(self):
        base = base_field()
        m = Movement(0, "Right", 1)
        a = movement_metrics(m, GRID2, base, LASER, MAT, PF, cooldown_steps=50)
        movement_metrics(Movement(0, "Up", 2), GRID2, base, LASER, MAT, PF, cooldown_steps=50)
        b = movement_metrics(m, GRID2, base, LASER, MAT, PF, cooldown_steps=50)
        assert a == b

    def test_base_field_not_mutated(self):
        base = base_field()
        before = base.labels.copy()
        movement_metrics(Movement(0, "Right", 1), GRID2, base, LASER, MAT, PF,
                         cooldown_steps=20)
        assert np.array_equal(base.labels, before)


class TestBuildTable:
    def test_full_coverage_and_flags(self):
        table = build_table(GRID2, base_field(), LASER, MAT, PF, cooldown_steps=50)
        assert len(table.entries) == 16
        in_bounds = [m for m in table.entries if m.in_bounds]
        assert len(in_bounds) == 8
        assert all(table.entries[m].valid for m in in_bounds)
        assert all(not table.entries[m].valid for m in table.entries if not m.in_bounds)

    def test_positive_metrics_when_melted(self):
        table = build_table(GRID2, base_field(), LASER, MAT, PF, cooldown_steps=50)
        for m, e in table.entries.items():
            if e.valid and e.melted_voxels > 0:
                assert e.avg_aspect_ratio > 0
                assert e.avg_grain_volume_um3 > 0

    def test_parallelism_invariance_and_csv_bytes(self, tmp_path):
        base = base_field()
        t1 = build_table(GRID2, base, LASER, MAT, PF, parallelism=1, cooldown_steps=30)
        t2 = build_table(GRID2, base, LASER, MAT, PF, parallelism=2, cooldown_steps=30)
        f1, f2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
        write_table_csv(f1, t1)
        write_table_csv(f2, t2)
        assert f1.read_bytes() == f2.read_bytes()

    def test_csv_roundtrip(self, tmp_path):
        table = build_table(GRID2, base_field(), LASER, MAT, PF, cooldown_steps=30,
                            config_hash="cafe01")
        f = tmp_path / "table.csv"
        write_table_csv(f, table)
        loaded = read_table_csv(f)
        assert loaded.grid.n == 2
        assert loaded.config_hash == "cafe01"
        for m in enumerate_movements(GRID2):
            a, b = table.entries[m], loaded.entries[m]
            assert a.valid == b.valid
            assert a.melted_voxels == b.melted_voxels
            assert a.avg_aspect_ratio == pytest.approx(b.avg_aspect_ratio, rel=1e-8)

    def test_header_schema(self, tmp_path):
        table = build_table(GRID2, base_field(), LASER, MAT, PF, cooldown_steps=30)
        f = tmp_path / "t.csv"
        write_table_csv(f, table)
        lines = f.read_text().splitlines()
        assert lines[0].startswith("# backend=dns")
        assert lines[1] == ("from_index,action,to_index,avg_aspect_ratio,"
                            "avg_grain_volume_um3,melted_voxels,valid")
        assert len(lines) == 2 + 16


def test_metrics_lookup_by_from_and_action():
    entries = {}
    for m in enumerate_movements(GRID2):
        entries[m] = MovementMetrics(2.0, 3.0, 5, True) if m.in_bounds else EMPTY_METRICS
    table = RewardTable(grid=GRID2, entries=entries)
    assert table.metrics_for(0, "Right").valid
    assert not table.metrics_for(0, "Down").valid
    assert table.metrics_for(0, ACTIONS[3]).avg_aspect_ratio == 2.0
