import numpy as np
import pytest

from meltpath.domain import DomainSpec
from meltpath.scanpath import ScanPath
from meltpath.thermal import (
    LaserParams,
    MaterialThermal,
    MeltMask,
    TemperatureField,
    accumulate_melt,
    field_at_time,
    rosenthal_point,
)

MAT = MaterialThermal(conductivity_W_mK=30.0, diffusivity_m2_s=1e-5,
                      ambient_K=293.0, melt_K=1700.0, clamp_radius_um=1.0)
LASER = LaserParams(power_W=25.0, speed_m_s=0.5)
DIR_X = np.array([1.0, 0.0, 0.0])


class TestRosenthalPoint:
    def test_far_field_ambient(self):
        T = rosenthal_point((100.0, 0.0, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
        assert T == pytest.approx(MAT.ambient_K, abs=1e-6)

    def test_mirror_symmetry_across_travel_axis(self):
        a = rosenthal_point((0.1, 0.05, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
        b = rosenthal_point((0.1, -0.05, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
        assert a == pytest.approx(b, rel=1e-12)

    def test_point_behind_source_hand_value(self):
        # 50 um directly behind: xi = -R kills the exponential, so
        # dT = Q / (2 pi k R) = 25 / (2 pi * 30 * 5e-5) = 2652.582385 K.
        T = rosenthal_point((-0.05, 0.0, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
        assert T - MAT.ambient_K == pytest.approx(2652.582385, abs=0.01)

    def test_clamp_removes_singularity(self):
        T = rosenthal_point((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
        assert np.isfinite(T)

    def test_behind_hotter_than_ahead_at_equal_distance(self):
        behind = rosenthal_point((-0.03, 0.0, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
        ahead = rosenthal_point((0.03, 0.0, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
        side = rosenthal_point((0.0, 0.03, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
        assert behind >= side >= ahead

    def test_decreasing_along_fixed_direction(self):
        # Fixed xi/R ray: temperatures fall monotonically with distance.
        temps = [rosenthal_point((0.0, r, 0.0), (0.0, 0.0, 0.0), DIR_X, LASER, MAT)
                 for r in np.linspace(0.005, 0.2, 30)]
        assert all(a > b for a, b in zip(temps, temps[1:]))


@pytest.fixture
def spec():
    return DomainSpec(size_mm=(0.4, 0.2, 0.1), voxel_size_um=10.0)


def one_segment_path():
    return ScanPath(waypoints=np.array([[0.1, 0.1, 0.1], [0.3, 0.1, 0.1]]),
                    speed_m_s=0.5, power_W=25.0)


class TestFieldAtTime:
    def test_hottest_voxel_at_start(self, spec):
        # The start point sits on voxel boundaries, so the peak may land in
        # either adjacent voxel: its center must be within one voxel size.
        field = field_at_time(one_segment_path(), 0.0, spec, LASER, MAT)
        hottest = np.unravel_index(np.argmax(field.T), spec.dims)
        center_mm = (np.asarray(hottest) + 0.5) * 10.0 / 1000.0
        assert np.all(np.abs(center_mm - np.array([0.1, 0.1, 0.1])) <= 10.0 / 1000.0)

    def test_deterministic(self, spec):
        a = field_at_time(one_segment_path(), 1e-4, spec, LASER, MAT)
        b = field_at_time(one_segment_path(), 1e-4, spec, LASER, MAT)
        assert np.array_equal(a.T, b.T)

    def test_time_outside_duration_rejected(self, spec):
        with pytest.raises(ValueError):
            field_at_time(one_segment_path(), 1.0, spec, LASER, MAT)
        with pytest.raises(ValueError):
            field_at_time(one_segment_path(), -0.1, spec, LASER, MAT)

    def test_monotone_decay_behind_source(self, spec):
        # At the end of the segment, sampled temperatures along the scanned
        # line decay with distance behind the source.
        path = one_segment_path()
        field = field_at_time(path, path.duration_s, spec, LASER, MAT)
        j = int(0.1 * 1000 / 10)
        k = int(0.1 * 1000 / 10) - 1
        row = field.T[:, j, k]
        end_i = int(0.3 * 1000 / 10)
        behind = row[5:end_i][::-1]  # walking backwards from the source
        assert all(a >= b for a, b in zip(behind, behind[1:]))


class TestMeltMask:
    def test_ambient_leaves_mask_unchanged(self, spec):
        mask = MeltMask.empty(spec)
        ambient = TemperatureField.ambient(spec, MAT)
        out = accumulate_melt(mask, ambient, MAT)
        assert out.count == 0

    def test_idempotent(self, spec):
        field = field_at_time(one_segment_path(), 0.0, spec, LASER, MAT)
        once = accumulate_melt(MeltMask.empty(spec), field, MAT)
        twice = accumulate_melt(once, field, MAT)
        assert np.array_equal(once.melted, twice.melted)
        assert once.count > 0

    def test_monotone_never_unmelts(self, spec):
        path = one_segment_path()
        mask = MeltMask.empty(spec)
        counts = []
        for t in np.linspace(0, path.duration_s, 9):
            mask = accumulate_melt(mask, field_at_time(path, t, spec, LASER, MAT), MAT)
            counts.append(mask.count)
        assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_two_pass_superset_of_single_pass(self, spec):
        single = one_segment_path()
        double = ScanPath(
            waypoints=np.array([[0.1, 0.1, 0.1], [0.3, 0.1, 0.1],
                                [0.3, 0.14, 0.1], [0.1, 0.14, 0.1]]),
            speed_m_s=0.5, power_W=25.0)
        m1 = MeltMask.empty(spec)
        for t in np.linspace(0, single.duration_s, 40):
            m1 = accumulate_melt(m1, field_at_time(single, t, spec, LASER, MAT), MAT)
        m2 = MeltMask.empty(spec)
        for t in np.linspace(0, double.duration_s, 80):
            m2 = accumulate_melt(m2, field_at_time(double, t, spec, LASER, MAT), MAT)
        assert np.all(m2.melted[m1.melted])

    def test_spec_mismatch_rejected(self, spec):
        other = DomainSpec(size_mm=(0.2, 0.2, 0.1), voxel_size_um=10.0)
        with pytest.raises(ValueError):
            accumulate_melt(MeltMask.empty(other),
                            TemperatureField.ambient(spec, MAT), MAT)
