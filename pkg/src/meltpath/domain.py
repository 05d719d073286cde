"""Voxel-grid geometry, synthetic microstructures, VOI windowing and
augmentation.

Conventions used throughout the package:

* voxel ``(i, j, k)`` spans ``[i*h, (i+1)*h] x ... `` with ``h`` the voxel
  size; its center sits at ``(i + 0.5) * h``,
* grain labels are ``int32``; ``LIQUID`` (= -1) marks molten voxels,
* order parameters, when present, are stored channel-first,
  shape ``(n_ori, nx, ny, nz)``, float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

LIQUID = -1

#: Default VOI extent (mm): wide enough for a full melt pool cross-section.
DEFAULT_VOI_MM = (0.17, 0.17, 0.07)

#: Default number of orientation classes.
DEFAULT_N_ORI = 20


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(int)


@dataclass(frozen=True)
class DomainSpec:
    """Physical box plus its voxel discretization.

    ``dims[k] = round(size_mm[k] * 1000 / voxel_size_um)``, rounding half up.
    """

    size_mm: tuple
    voxel_size_um: float
    dims: tuple = field(init=False)

    def __post_init__(self):
        if self.voxel_size_um <= 0:
            raise ValueError("voxel_size_um must be positive")
        size = tuple(float(s) for s in self.size_mm)
        if len(size) != 3 or any(s <= 0 for s in size):
            raise ValueError("size_mm must be three positive lengths")
        object.__setattr__(self, "size_mm", size)
        dims = tuple(int(d) for d in _round_half_up(np.array(size) * 1000.0 / self.voxel_size_um))
        if any(d < 1 for d in dims):
            raise ValueError(f"domain smaller than one voxel: dims={dims}")
        # Rounding must not drift more than one voxel from the physical size.
        for k in range(3):
            if abs(dims[k] * self.voxel_size_um - size[k] * 1000.0) > self.voxel_size_um:
                raise ValueError("size_mm is inconsistent with voxel_size_um")
        object.__setattr__(self, "dims", dims)

    @property
    def voxel_volume_um3(self) -> float:
        return self.voxel_size_um ** 3

    @property
    def volume_um3(self) -> float:
        return float(np.prod(self.dims)) * self.voxel_volume_um3

    def voxel_centers_mm(self, axis: int) -> np.ndarray:
        """Centers of voxels along one axis, in mm."""
        return (np.arange(self.dims[axis]) + 0.5) * self.voxel_size_um / 1000.0

    def contains_mm(self, point_mm) -> bool:
        p = np.asarray(point_mm, dtype=float)
        return bool(np.all(p >= 0.0) and np.all(p <= np.asarray(self.size_mm)))

    def with_dims(self, dims) -> "DomainSpec":
        """Spec for a sub- or permuted grid at the same resolution."""
        size = tuple(d * self.voxel_size_um / 1000.0 for d in dims)
        return DomainSpec(size_mm=size, voxel_size_um=self.voxel_size_um)


@dataclass
class GrainField:
    """Voxel grid of orientation labels, optionally with order parameters.

    When ``eta`` is present, ``labels`` is derived from it: the argmax
    channel where the maximum exceeds 0.5, LIQUID elsewhere.
    """

    spec: DomainSpec
    labels: np.ndarray
    n_ori: int = DEFAULT_N_ORI
    eta: Optional[np.ndarray] = None

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.shape != self.spec.dims:
            raise ValueError(f"labels shape {self.labels.shape} != spec dims {self.spec.dims}")
        if self.eta is not None:
            self.eta = np.ascontiguousarray(self.eta, dtype=np.float64)
            if self.eta.shape != (self.n_ori,) + self.spec.dims:
                raise ValueError("eta must have shape (n_ori, nx, ny, nz)")

    def copy(self) -> "GrainField":
        return GrainField(
            spec=self.spec,
            labels=self.labels.copy(),
            n_ori=self.n_ori,
            eta=None if self.eta is None else self.eta.copy(),
        )

    def allocate_eta(self) -> None:
        """Initialize order parameters as the one-hot encoding of labels."""
        eta = np.zeros((self.n_ori,) + self.spec.dims, dtype=np.float64)
        for i in range(self.n_ori):
            eta[i][self.labels == i] = 1.0
        self.eta = eta

    def refresh_labels(self) -> None:
        """Recompute labels from eta (argmax where max >= 0.5, else LIQUID)."""
        if self.eta is None:
            raise ValueError("field has no order parameters")
        amax = self.eta.max(axis=0)
        labels = self.eta.argmax(axis=0).astype(np.int32)
        labels[amax < 0.5] = LIQUID
        self.labels = labels


@dataclass(frozen=True)
class VoiWindow:
    """An axis-aligned voxel window, fully inside its parent domain."""

    origin_voxel: tuple
    dims: tuple


def voi_dims_from_mm(spec: DomainSpec, voi_dims_mm=DEFAULT_VOI_MM) -> tuple:
    """Voxel counts of a VOI, using the same rounding rule as DomainSpec."""
    return tuple(int(d) for d in _round_half_up(np.asarray(voi_dims_mm) * 1000.0 / spec.voxel_size_um))


def _seed_positions_mm(spec: DomainSpec, n_seeds: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((n_seeds, 3)) * np.asarray(spec.size_mm)


def nearest_seed_indices(spec: DomainSpec, seeds_mm: np.ndarray) -> np.ndarray:
    """Index of the closest seed for every voxel center (ties: lowest index).

    Ties are resolved by querying the two closest seeds and preferring the
    lower index on exact distance equality.
    """
    tree = cKDTree(seeds_mm)
    grids = np.meshgrid(*(spec.voxel_centers_mm(a) for a in range(3)), indexing="ij")
    centers = np.stack([g.ravel() for g in grids], axis=1)
    k = min(2, len(seeds_mm))
    dist, idx = tree.query(centers, k=k)
    if k == 1:
        nearest = np.atleast_1d(idx)
    else:
        tied = dist[:, 0] == dist[:, 1]
        nearest = idx[:, 0].copy()
        nearest[tied] = np.minimum(idx[tied, 0], idx[tied, 1])
    return nearest.reshape(spec.dims)


def generate_voronoi_microstructure(
    spec: DomainSpec,
    n_seeds: int,
    n_ori: int = DEFAULT_N_ORI,
    seed: int = 0,
) -> GrainField:
    """Voronoi tessellation on the voxel lattice.

    Every voxel takes the orientation class of its nearest seed. Classes are
    assigned to seeds round-robin, then shuffled, so class populations stay
    balanced. Deterministic for a fixed ``seed``.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    if n_ori < 1:
        raise ValueError("n_ori must be >= 1")
    rng = np.random.default_rng(seed)
    seeds = _seed_positions_mm(spec, n_seeds, rng)
    classes = np.arange(n_seeds, dtype=np.int32) % n_ori
    rng.shuffle(classes)
    nearest = nearest_seed_indices(spec, seeds)
    return GrainField(spec=spec, labels=classes[nearest], n_ori=n_ori)


def extract_voi(field: GrainField, center_mm, voi_dims_mm=DEFAULT_VOI_MM):
    """Copy a VOI-sized subgrid centered (after clamping) at ``center_mm``.

    The window is shifted, never shrunk: dims are fixed by the surrogate's
    pooling requirements, so a window near the boundary slides inward.

    Returns ``(patch, window)``.
    """
    spec = field.spec
    if not spec.contains_mm(center_mm):
        raise ValueError(f"center {center_mm} outside domain {spec.size_mm}")
    vdims = np.asarray(voi_dims_from_mm(spec, voi_dims_mm))
    dims = np.asarray(spec.dims)
    if np.any(vdims > dims):
        raise ValueError(f"VOI dims {tuple(vdims)} exceed domain dims {tuple(dims)}")
    center_vox = np.asarray(center_mm) * 1000.0 / spec.voxel_size_um
    origin = _round_half_up(center_vox - vdims / 2.0)
    origin = np.clip(origin, 0, dims - vdims)
    window = VoiWindow(origin_voxel=tuple(int(o) for o in origin), dims=tuple(int(d) for d in vdims))
    patch = _slice_field(field, window)
    return patch, window


def _window_slices(window: VoiWindow):
    return tuple(slice(o, o + d) for o, d in zip(window.origin_voxel, window.dims))


def _slice_field(field: GrainField, window: VoiWindow) -> GrainField:
    sl = _window_slices(window)
    sub = DomainSpec(
        size_mm=tuple(d * field.spec.voxel_size_um / 1000.0 for d in window.dims),
        voxel_size_um=field.spec.voxel_size_um,
    )
    eta = None if field.eta is None else field.eta[(slice(None),) + sl].copy()
    return GrainField(spec=sub, labels=field.labels[sl].copy(), n_ori=field.n_ori, eta=eta)


def write_back_voi(field: GrainField, window: VoiWindow, patch: GrainField) -> GrainField:
    """Return a copy of ``field`` with ``window`` replaced by ``patch``."""
    if tuple(patch.spec.dims) != tuple(window.dims):
        raise ValueError(f"patch dims {patch.spec.dims} != window dims {window.dims}")
    out = field.copy()
    sl = _window_slices(window)
    out.labels[sl] = patch.labels
    if (out.eta is None) != (patch.eta is None):
        raise ValueError("field and patch must both (or neither) carry eta")
    if out.eta is not None:
        out.eta[(slice(None),) + sl] = patch.eta
    return out


# ---------------------------------------------------------------------------
# Augmentation: 19 pinned symmetry variants.
#
# The shape-preserving symmetries of a box with a square x-y section form a
# 16-element group (the 8 square symmetries times an optional z-flip); its 15
# non-identity elements are entries 1-15 below. The remaining 4 entries are
# the axis permutations that move z, which permute the array dims.
# ---------------------------------------------------------------------------


def _rot90_xy(a, k):
    return np.rot90(a, k=k, axes=(-3, -2))


_TRANSFORM_TABLE = [
    # (name, forward, inverse-name)
    ("rot90", lambda a: _rot90_xy(a, 1), "rot270"),
    ("rot180", lambda a: _rot90_xy(a, 2), "rot180"),
    ("rot270", lambda a: _rot90_xy(a, 3), "rot90"),
    ("flip_x", lambda a: np.flip(a, axis=-3), "flip_x"),
    ("flip_y", lambda a: np.flip(a, axis=-2), "flip_y"),
    ("transpose_xy", lambda a: np.swapaxes(a, -3, -2), "transpose_xy"),
    ("antitranspose_xy", lambda a: _rot90_xy(np.swapaxes(a, -3, -2), 2), "antitranspose_xy"),
    ("flip_z", lambda a: np.flip(a, axis=-1), "flip_z"),
    ("rot90+flip_z", lambda a: np.flip(_rot90_xy(a, 1), axis=-1), "rot270+flip_z"),
    ("rot180+flip_z", lambda a: np.flip(_rot90_xy(a, 2), axis=-1), "rot180+flip_z"),
    ("rot270+flip_z", lambda a: np.flip(_rot90_xy(a, 3), axis=-1), "rot90+flip_z"),
    ("flip_x+flip_z", lambda a: np.flip(np.flip(a, axis=-3), axis=-1), "flip_x+flip_z"),
    ("flip_y+flip_z", lambda a: np.flip(np.flip(a, axis=-2), axis=-1), "flip_y+flip_z"),
    ("transpose_xy+flip_z", lambda a: np.flip(np.swapaxes(a, -3, -2), axis=-1), "transpose_xy+flip_z"),
    (
        "antitranspose_xy+flip_z",
        lambda a: np.flip(_rot90_xy(np.swapaxes(a, -3, -2), 2), axis=-1),
        "antitranspose_xy+flip_z",
    ),
    ("swap_xz", lambda a: np.swapaxes(a, -3, -1), "swap_xz"),
    ("swap_yz", lambda a: np.swapaxes(a, -2, -1), "swap_yz"),
    ("cycle_xyz", lambda a: np.moveaxis(a, (-3, -2, -1), (-1, -3, -2)), "cycle_zxy"),
    ("cycle_zxy", lambda a: np.moveaxis(a, (-3, -2, -1), (-2, -1, -3)), "cycle_xyz"),
]

AUGMENTATION_NAMES = [name for name, _, _ in _TRANSFORM_TABLE]


def apply_augmentation(name: str, array: np.ndarray) -> np.ndarray:
    """Apply one pinned transform to a (..., nx, ny, nz) array."""
    for n, fwd, _ in _TRANSFORM_TABLE:
        if n == name:
            return np.ascontiguousarray(fwd(array))
    raise ValueError(f"unknown augmentation {name!r}")


def inverse_augmentation_name(name: str) -> str:
    for n, _, inv in _TRANSFORM_TABLE:
        if n == name:
            return inv
    raise ValueError(f"unknown augmentation {name!r}")


def augment_voi(patch: GrainField, temperature) -> list:
    """All 19 non-identity symmetry variants of a (patch, temperature) pair.

    Requires a square x-y cross-section so the in-plane rotations and the
    transpositions preserve dims. The last four variants permute the z axis
    and therefore permute dims for non-cubic patches.
    """
    from .thermal import TemperatureField  # local import to avoid a cycle

    nx, ny, nz = patch.spec.dims
    if nx != ny:
        raise ValueError(f"augmentation requires a square x-y section, got {nx}x{ny}")
    if temperature.T.shape != patch.spec.dims:
        raise ValueError("temperature dims differ from patch dims")
    out = []
    for name, fwd, _ in _TRANSFORM_TABLE:
        labels = np.ascontiguousarray(fwd(patch.labels))
        spec = patch.spec.with_dims(labels.shape)
        eta = None if patch.eta is None else np.ascontiguousarray(fwd(patch.eta))
        gf = GrainField(spec=spec, labels=labels, n_ori=patch.n_ori, eta=eta)
        tf = TemperatureField(spec=spec, T=np.ascontiguousarray(fwd(temperature.T)))
        out.append((gf, tf))
    return out
