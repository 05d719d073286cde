"""Training loop: voxelwise cross-entropy on log-softmax outputs."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np
import torch
import torch.nn.functional as F

from .data import LIQUID, VoiManifestDataset, shape_groups
from .unet import UNet3D


def dataset_hash(manifest_path) -> str:
    with open(manifest_path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:12]


def train_unet(manifest_path, epochs: int = 50, base_channels: int = 8, depth: int = 2,
               lr: float = 1e-3, batch_size: int = 4, seed: int = 0,
               device: str = "cpu", log=print):
    """Train on an exported dataset; returns ``(model, per-epoch loss list)``.

    Deterministic for a fixed seed up to backend kernel nondeterminism (CPU
    torch is deterministic). Molten target voxels are excluded from the loss,
    so the model only ever learns (and emits) valid orientation classes.
    """
    torch.manual_seed(seed)
    dataset = VoiManifestDataset(manifest_path)
    model = UNet3D(in_channels=3, n_classes=dataset.n_ori,
                   base_channels=base_channels, depth=depth).to(device)
    pool = 2 ** depth
    groups = shape_groups(dataset)
    for shape in groups:
        if any(s % pool for s in shape):
            raise ValueError(f"sample dims {shape} not divisible by pooling factor {pool}")
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    losses = []
    order_rng = np.random.default_rng(seed)
    model.train()
    for epoch in range(epochs):
        total, count = 0.0, 0
        for shape, indices in sorted(groups.items()):
            idx = np.array(indices)
            order_rng.shuffle(idx)
            for start in range(0, len(idx), batch_size):
                chunk = idx[start:start + batch_size]
                xs, ys = zip(*(dataset[int(i)] for i in chunk))
                x = torch.stack(xs).to(device)
                y = torch.stack(ys).to(device)
                optimizer.zero_grad()
                logp = model.log_probabilities(x)
                loss = F.nll_loss(logp, y, ignore_index=LIQUID)
                loss.backward()
                optimizer.step()
                total += float(loss.detach())
                count += 1
        losses.append(total / max(count, 1))
        if epoch % max(1, epochs // 10) == 0:
            log(f"epoch {epoch}: loss {losses[-1]:.5f}")
    return model, losses


def save_model(path, model: UNet3D, dataset_fingerprint: str, n_ori: int,
               voxel_um: float, extra=None) -> None:
    meta = {"n_ori": n_ori, "voxel_um": voxel_um,
            "base_channels": model.encoders[0].block[0].out_channels,
            "depth": model.depth, "dataset_hash": dataset_fingerprint}
    if extra:
        meta.update(extra)
    torch.save({"state_dict": model.state_dict(), "meta": meta}, path)


def load_model(path, device: str = "cpu"):
    bundle = torch.load(path, map_location=device, weights_only=True)
    meta = bundle["meta"]
    model = UNet3D(in_channels=3, n_classes=int(meta["n_ori"]),
                   base_channels=int(meta["base_channels"]), depth=int(meta["depth"]))
    model.load_state_dict(bundle["state_dict"])
    model.eval()
    return model, meta


def write_loss_curve(path, losses, dataset_fingerprint: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# dataset_hash={dataset_fingerprint}\n")
        fh.write("epoch,loss\n")
        for i, l in enumerate(losses):
            fh.write(f"{i},{l:.9g}\n")


def write_manifest_note(out_dir, note: dict) -> None:
    with open(os.path.join(out_dir, "training_manifest.json"), "w") as fh:
        json.dump(note, fh, indent=1)
