"""Datasets over exported VOI manifests.

A sample provides a 3-channel float input (orientation labels scaled to
[0, 1], the two temperature channels normalized by the melt overheat scale)
and an int64 class target. Molten target voxels (label -1) are kept as -1 and
ignored by the loss.
"""

from __future__ import annotations

import json
import os

import numpy as np
import torch
from torch.utils.data import Dataset

from . import vgf

LIQUID = -1


def normalize_temperature(T: np.ndarray, ambient_K: float = 293.0,
                          melt_K: float = 1700.0) -> np.ndarray:
    return (np.asarray(T, dtype=np.float32) - ambient_K) / (melt_K - ambient_K)


def assemble_input(labels: np.ndarray, T_now: np.ndarray, T_next: np.ndarray,
                   n_ori: int, ambient_K: float = 293.0,
                   melt_K: float = 1700.0) -> np.ndarray:
    """Stack the 3 input channels; molten label voxels enter as 0."""
    lab = np.asarray(labels, dtype=np.float32)
    lab = np.where(lab == LIQUID, 0.0, lab) / max(n_ori - 1, 1)
    return np.stack([
        lab,
        normalize_temperature(T_now, ambient_K, melt_K),
        normalize_temperature(T_next, ambient_K, melt_K),
    ]).astype(np.float32)


class VoiManifestDataset(Dataset):
    """Lazy loader over an export manifest; groups of equal shape batch cleanly."""

    def __init__(self, manifest_path, ambient_K: float = 293.0, melt_K: float = 1700.0):
        with open(manifest_path) as fh:
            self.manifest = json.load(fh)
        self.root = os.path.dirname(os.path.abspath(manifest_path))
        self.n_ori = int(self.manifest["n_ori"])
        self.ambient_K = ambient_K
        self.melt_K = melt_K

    def __len__(self):
        return len(self.manifest["samples"])

    def sample_shape(self, index):
        rec = self.manifest["samples"][index]
        header, _ = vgf.read(os.path.join(self.root, rec["files"]["grain0"]))
        return tuple(header["dims"])

    def __getitem__(self, index):
        rec = self.manifest["samples"][index]
        files = rec["files"]
        _, labels0 = vgf.read(os.path.join(self.root, files["grain0"]))
        _, t0 = vgf.read(os.path.join(self.root, files["temp0"]))
        _, t1 = vgf.read(os.path.join(self.root, files["temp1"]))
        _, labels1 = vgf.read(os.path.join(self.root, files["grain1"]))
        x = assemble_input(labels0, t0, t1, self.n_ori, self.ambient_K, self.melt_K)
        y = labels1.astype(np.int64)
        return torch.from_numpy(x), torch.from_numpy(y)


def shape_groups(dataset: VoiManifestDataset):
    """Indices grouped by spatial shape (augmented permutations vary dims)."""
    groups = {}
    for i in range(len(dataset)):
        groups.setdefault(dataset.sample_shape(i), []).append(i)
    return groups
