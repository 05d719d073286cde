import json

import numpy as np
import pytest
import torch

from meltpath_surrogate import vgf
from meltpath_surrogate.data import VoiManifestDataset, assemble_input
from meltpath_surrogate.training import load_model, save_model, train_unet
from meltpath_surrogate.unet import UNet3D


def make_toy_manifest(tmp_path, n_samples=10, dims=(16, 16, 8), n_ori=20, seed=0,
                      n_classes_used=8):
    """Synthetic dataset: inputs and targets share structure so it is learnable."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n_samples):
        # Blocky label fields (few grains) rather than voxel noise.
        labels0 = np.zeros(dims, np.int32)
        for _ in range(6):
            x0, y0, z0 = (rng.integers(0, d) for d in dims)
            sx, sy, sz = (int(rng.integers(3, 9)) for _ in range(3))
            labels0[x0:x0 + sx, y0:y0 + sy, z0:z0 + sz] = rng.integers(0, n_classes_used)
        T0 = rng.uniform(300, 600, size=dims).astype(np.float32)
        T1 = rng.uniform(300, 600, size=dims).astype(np.float32)
        hot = T1 > 550.0
        labels1 = labels0.copy()
        labels1[hot] = (labels0[hot] + 1) % n_classes_used  # deterministic mapping
        files = {}
        for tag, arr in (("grain0", labels0), ("temp0", T0), ("temp1", T1),
                         ("grain1", labels1)):
            name = f"s{i:03d}_{tag}.vgf"
            vgf.write(tmp_path / name, arr, voxel_um=20.0)
            files[tag] = name
        samples.append({"id": i, "track": 0, "power_W": 25.0, "step": i * 100,
                        "transform": "identity", "files": files})
    manifest = {"config_hash": "toy", "n_ori": n_ori, "voxel_um": 20.0,
                "sample_every": 100, "dt_s": 2.5e-5, "ambient_K": 293.0,
                "melt_K": 1700.0, "augmented": False,
                "sample_count": n_samples, "samples": samples}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(manifest))
    return path


class TestArchitecture:
    def test_output_has_20_channels_and_input_dims(self):
        model = UNet3D(in_channels=3, n_classes=20, base_channels=4, depth=2)
        x = torch.randn(2, 3, 16, 16, 8)
        y = model(x)
        assert y.shape == (2, 20, 16, 16, 8)

    def test_probabilities_normalized(self):
        model = UNet3D(in_channels=3, n_classes=20, base_channels=4, depth=2)
        x = torch.randn(1, 3, 16, 16, 8)
        probs = model.log_probabilities(x).exp().sum(dim=1)
        assert torch.allclose(probs, torch.ones_like(probs), atol=1e-5)

    def test_indivisible_dims_rejected(self):
        model = UNet3D(base_channels=4, depth=2)
        with pytest.raises(ValueError):
            model(torch.randn(1, 3, 18, 16, 8))

    def test_labels_always_valid_classes(self):
        model = UNet3D(in_channels=3, n_classes=20, base_channels=4, depth=2)
        labels = model.predict_labels(torch.randn(1, 3, 16, 16, 8))
        assert int(labels.min()) >= 0
        assert int(labels.max()) < 20


class TestTraining:
    def test_overfit_ten_samples(self, tmp_path):
        manifest = make_toy_manifest(tmp_path)
        model, losses = train_unet(manifest, epochs=70, base_channels=16, depth=2,
                                   lr=2e-3, batch_size=2, seed=1, log=lambda *_: None)
        assert all(b < a for a, b in zip(losses[:5], losses[1:6]))  # early descent
        assert losses[-1] < 0.1

    def test_model_roundtrip(self, tmp_path):
        manifest = make_toy_manifest(tmp_path, n_samples=2)
        model, _ = train_unet(manifest, epochs=1, base_channels=4, depth=2,
                              batch_size=2, seed=0, log=lambda *_: None)
        out = tmp_path / "model.pt"
        save_model(out, model, "deadbeef", n_ori=20, voxel_um=20.0,
                   extra={"sample_every": 100, "dt_s": 2.5e-5})
        loaded, meta = load_model(out)
        assert meta["dataset_hash"] == "deadbeef"
        assert meta["n_ori"] == 20
        x = torch.randn(1, 3, 16, 16, 8)
        model.eval()
        assert torch.allclose(model(x), loaded(x), atol=1e-6)

    def test_dataset_assembles_channels(self, tmp_path):
        manifest = make_toy_manifest(tmp_path, n_samples=3)
        ds = VoiManifestDataset(manifest)
        x, y = ds[0]
        assert x.shape == (3, 16, 16, 8)
        assert y.dtype == torch.int64
        assert float(x[0].max()) <= 1.0


def test_input_scaling_handles_liquid():
    labels = np.array([[[-1, 0], [5, 19]]], dtype=np.int32)
    T = np.full((1, 2, 2), 293.0, np.float32)
    x = assemble_input(labels, T, T, n_ori=20)
    assert x[0, 0, 0, 0] == 0.0  # liquid enters as 0
    assert x[0, 0, 1, 1] == pytest.approx(1.0)
    assert np.allclose(x[1], 0.0)  # ambient normalizes to 0
