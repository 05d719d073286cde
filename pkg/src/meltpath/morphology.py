"""Grain identification and shape statistics.

Grains are maximal connected components of equal non-liquid orientation
label, found by breadth-first search (layer-by-layer frontier expansion over
the voxel lattice). Shapes are summarized by the equivalent ellipsoid: the
ellipsoid sharing the grain's second spatial moments. Each diagonal moment
gets the per-voxel correction +dx^2/12 so single voxels and voxelized boxes
reproduce their continuum moments exactly; semi-axes are then
``a_i = sqrt(5 lambda_i)`` and the aspect ratio is ``2a / (b + c)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import LIQUID, DomainSpec, GrainField
from .thermal import MeltMask

_OFFSETS_6 = np.array([
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
])
_OFFSETS_26 = np.array(
    [(dx, dy, dz)
     for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
     if (dx, dy, dz) != (0, 0, 0)]
)


@dataclass
class Grain:
    """One connected same-orientation region."""

    orientation: int
    voxels: np.ndarray  # (n, 3) int indices
    volume_um3: float
    axes_um: tuple = (0.0, 0.0, 0.0)  # semi-axes, a >= b >= c
    aspect_ratio: float = 0.0

    @property
    def voxel_count(self) -> int:
        return len(self.voxels)


@dataclass
class MorphologyStats:
    grain_count: int
    mean_volume_um3: float
    mean_aspect_ratio: float
    volume_histogram: tuple = field(default=(np.zeros(0), np.zeros(0)))  # (counts, edges)
    aspect_histogram: tuple = field(default=(np.zeros(0), np.zeros(0)))


def equivalent_ellipsoid(voxels: np.ndarray, voxel_um: float) -> tuple:
    """Semi-axes (a >= b >= c, um) of the moment-equivalent ellipsoid."""
    coords = (np.asarray(voxels, dtype=np.float64) + 0.5) * voxel_um
    centered = coords - coords.mean(axis=0)
    cov = centered.T @ centered / len(coords)
    cov += np.eye(3) * (voxel_um ** 2 / 12.0)
    lam = np.linalg.eigvalsh(cov)  # ascending
    axes = np.sqrt(5.0 * np.clip(lam, 0.0, None))[::-1]
    return tuple(float(a) for a in axes)


def aspect_ratio(axes_um: Sequence[float]) -> float:
    a, b, c = axes_um
    return 2.0 * a / (b + c)


def _measure(grain: Grain, voxel_um: float) -> Grain:
    grain.axes_um = equivalent_ellipsoid(grain.voxels, voxel_um)
    grain.aspect_ratio = aspect_ratio(grain.axes_um)
    return grain


def label_grains(
    field: GrainField,
    mask: Optional[MeltMask] = None,
    connectivity: int = 6,
) -> list:
    """BFS connected-component labeling of same-orientation voxels.

    Liquid voxels never join a grain; when ``mask`` is given only masked
    voxels are considered. Each grain is measured (volume, semi-axes, aspect
    ratio) before being returned.
    """
    if connectivity == 6:
        offsets = _OFFSETS_6
    elif connectivity == 26:
        offsets = _OFFSETS_26
    else:
        raise ValueError("connectivity must be 6 or 26")
    labels = field.labels
    dims = labels.shape
    eligible = labels != LIQUID
    if mask is not None:
        if mask.spec.dims != field.spec.dims:
            raise ValueError("mask dims differ from field dims")
        eligible &= mask.melted
    visited = ~eligible
    voxel_um = field.spec.voxel_size_um
    grains = []
    # Deterministic seed order: C-order scan over the grid.
    for start in np.argwhere(eligible):
        sx, sy, sz = start
        if visited[sx, sy, sz]:
            continue
        ori = int(labels[sx, sy, sz])
        visited[sx, sy, sz] = True
        frontier = start[None, :]
        members = [frontier]
        while len(frontier):
            cand = (frontier[:, None, :] + offsets[None, :, :]).reshape(-1, 3)
            ok = np.all((cand >= 0) & (cand < dims), axis=1)
            cand = cand[ok]
            cx, cy, cz = cand[:, 0], cand[:, 1], cand[:, 2]
            keep = (~visited[cx, cy, cz]) & (labels[cx, cy, cz] == ori)
            cand = cand[keep]
            if len(cand) == 0:
                break
            cand = np.unique(cand, axis=0)
            visited[cand[:, 0], cand[:, 1], cand[:, 2]] = True
            members.append(cand)
            frontier = cand
        voxels = np.concatenate(members, axis=0)
        grain = Grain(
            orientation=ori,
            voxels=voxels,
            volume_um3=len(voxels) * field.spec.voxel_volume_um3,
        )
        grains.append(_measure(grain, voxel_um))
    return grains


def mask_components(mask: np.ndarray, connectivity: int = 6) -> list:
    """Connected components of a boolean mask (lists of voxel index arrays)."""
    dims = mask.shape
    spec = DomainSpec(size_mm=tuple(d / 1000.0 for d in dims), voxel_size_um=1.0)
    labels = np.where(mask, 0, LIQUID).astype(np.int32)
    field_like = GrainField(spec=spec, labels=labels, n_ori=1)
    return [g.voxels for g in label_grains(field_like, connectivity=connectivity)]


def stats(
    grains: Sequence[Grain],
    min_volume_um3: float = 500.0,
    volume_bin_edges: Optional[np.ndarray] = None,
    aspect_bin_edges: Optional[np.ndarray] = None,
) -> MorphologyStats:
    """Population statistics.

    The mean volume runs over every grain; the mean aspect ratio only over
    grains at or above ``min_volume_um3`` (small grains never grew beyond
    their seed and would bias the shape statistics).
    """
    volumes = np.array([g.volume_um3 for g in grains], dtype=float)
    big = [g for g in grains if g.volume_um3 >= min_volume_um3]
    aspects = np.array([g.aspect_ratio for g in big], dtype=float)

    if volume_bin_edges is None:
        hi = float(volumes.max()) if len(volumes) else 1.0
        volume_bin_edges = np.linspace(0.0, max(hi, 1.0), 21)
    if aspect_bin_edges is None:
        hi = float(aspects.max()) if len(aspects) else 1.0
        aspect_bin_edges = np.linspace(0.0, max(hi, 1.0), 21)

    vol_counts, _ = np.histogram(volumes, bins=volume_bin_edges)
    asp_counts, _ = np.histogram(aspects, bins=aspect_bin_edges)
    return MorphologyStats(
        grain_count=len(grains),
        mean_volume_um3=float(volumes.mean()) if len(volumes) else float("nan"),
        mean_aspect_ratio=float(aspects.mean()) if len(aspects) else float("nan"),
        volume_histogram=(vol_counts, np.asarray(volume_bin_edges, dtype=float)),
        aspect_histogram=(asp_counts, np.asarray(aspect_bin_edges, dtype=float)),
    )


def compare(series_a: Sequence[float], series_b: Sequence[float]) -> tuple:
    """(RMSE, NRMSE) of ``a`` against reference ``b``; NRMSE / range(b)."""
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 1:
        raise ValueError("series must be equal-length 1D with at least one entry")
    rmse = float(np.sqrt(np.mean((a - b) ** 2)))
    span = float(b.max() - b.min())
    if span == 0.0:
        raise ZeroDivisionError("reference series has zero range; NRMSE undefined")
    return rmse, rmse / span


def rank_matched_series(values_a: Sequence[float], values_b: Sequence[float]) -> tuple:
    """Sort both series descending and truncate to the common length.

    Grain identity cannot be matched across simulators, so population
    comparisons pair grains by rank.
    """
    a = np.sort(np.asarray(values_a, dtype=float))[::-1]
    b = np.sort(np.asarray(values_b, dtype=float))[::-1]
    n = min(len(a), len(b))
    return a[:n], b[:n]
