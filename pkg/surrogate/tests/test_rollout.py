import numpy as np
import pytest
import torch

from meltpath_surrogate.rollout import (PolylinePath, ThermalConfig, clamp_window,
                                        rosenthal_field, rollout)
from meltpath_surrogate.unet import UNet3D

TC = ThermalConfig()


class TestPolylinePath:
    def test_single_point(self):
        p = PolylinePath([[0.1, 0.2, 0.3]], speed_m_s=0.05)
        assert p.duration_s == 0.0
        pos, d = p.at(0.0)
        assert np.allclose(pos, [0.1, 0.2, 0.3])
        assert np.allclose(d, [1, 0, 0])

    def test_interpolation(self):
        p = PolylinePath([[0, 0, 0], [1.0, 0, 0]], speed_m_s=0.5)
        pos, d = p.at(1e-3)
        assert np.allclose(pos, [0.5, 0, 0])
        assert np.allclose(d, [1, 0, 0])


class TestRosenthal:
    def test_peak_at_source(self):
        T = rosenthal_field((16, 16, 8), 20.0, (0.16, 0.16, 0.16), (1, 0, 0), TC)
        peak = np.unravel_index(np.argmax(T), T.shape)
        center_mm = (np.asarray(peak) + 0.5) * 20.0 / 1000.0
        assert np.all(np.abs(center_mm - [0.16, 0.16, 0.16]) <= 0.02)

    def test_far_field_ambient(self):
        T = rosenthal_field((16, 16, 8), 20.0, (100.0, 0.0, 0.0), (1, 0, 0), TC)
        assert np.allclose(T, TC.ambient_K, atol=1e-3)


class TestClampWindow:
    def test_interior_centered(self):
        w = clamp_window((0.16, 0.16, 0.08), (8, 8, 4), (16, 16, 8), 20.0)
        assert [s.start for s in w] == [4, 4, 2]

    def test_corner_clamped(self):
        w = clamp_window((0.0, 0.0, 0.0), (8, 8, 4), (16, 16, 8), 20.0)
        assert [s.start for s in w] == [0, 0, 0]
        assert [s.stop - s.start for s in w] == [8, 8, 4]


class TestRollout:
    def test_zero_length_path_identity(self):
        torch.manual_seed(0)
        model = UNet3D(base_channels=4, depth=2)
        labels = np.random.default_rng(0).integers(0, 20, size=(16, 16, 8)).astype(np.int32)
        result = rollout(model, labels, 20.0, [[0.16, 0.16, 0.16]], TC,
                         voi_dims=(8, 8, 4), dt_s=2.5e-5, sample_every=100)
        assert np.array_equal(result.labels, labels)

    def test_rollout_touches_only_window_track(self):
        torch.manual_seed(0)
        model = UNet3D(base_channels=4, depth=2)
        labels = np.random.default_rng(1).integers(0, 20, size=(24, 24, 8)).astype(np.int32)
        result = rollout(model, labels, 20.0,
                         [[0.1, 0.24, 0.16], [0.2, 0.24, 0.16]], TC,
                         voi_dims=(8, 8, 8), dt_s=2.5e-5, sample_every=100)
        # Rows far from the scan line in y are outside every VOI window.
        assert np.array_equal(result.labels[:, :4, :], labels[:, :4, :])
        assert result.ml_steps >= 1

    def test_never_emits_liquid(self):
        torch.manual_seed(0)
        model = UNet3D(base_channels=4, depth=2)
        labels = np.full((16, 16, 8), -1, np.int32)
        result = rollout(model, labels, 20.0,
                         [[0.1, 0.16, 0.16], [0.2, 0.16, 0.16]], TC,
                         voi_dims=(16, 16, 8), dt_s=2.5e-5, sample_every=100)
        touched = result.labels != -1
        assert touched.any()
        assert result.labels[touched].min() >= 0
