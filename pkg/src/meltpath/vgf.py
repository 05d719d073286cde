"""The ``.vgf`` voxel-field file format.

One ASCII header line holding a JSON object

    {"magic": "VGF1", "dims": [nx, ny, nz], "voxel_um": h, "channels": c,
     "dtype": "i32"|"f32", "order": "x-fastest", "endian": "little"}

terminated by a newline, then the raw little-endian payload. Multi-channel
payloads are stored channel by channel, each channel x-fastest. Grain fields
are written as their int32 label grid (order parameters are runtime state and
are not serialized); temperature fields and melt masks are single-channel
f32 / i32 grids.
"""

from __future__ import annotations

import json

import numpy as np

from .domain import DomainSpec, GrainField
from .errors import FormatError
from .thermal import MeltMask, TemperatureField

MAGIC = "VGF1"
_DTYPES = {"i32": np.dtype("<i4"), "f32": np.dtype("<f4")}


def write_array(path, array: np.ndarray, voxel_um: float) -> None:
    """Write a (nx,ny,nz) or (c,nx,ny,nz) array in the documented format."""
    arr = np.asarray(array)
    if arr.ndim == 3:
        channels, dims = 1, arr.shape
    elif arr.ndim == 4:
        channels, dims = arr.shape[0], arr.shape[1:]
    else:
        raise ValueError("array must be 3D or channel-first 4D")
    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        dtype_name = "i32"
    elif np.issubdtype(arr.dtype, np.floating):
        dtype_name = "f32"
    else:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    header = {
        "magic": MAGIC,
        "dims": [int(d) for d in dims],
        "voxel_um": float(voxel_um),
        "channels": int(channels),
        "dtype": dtype_name,
        "order": "x-fastest",
        "endian": "little",
    }
    flat = arr.astype(_DTYPES[dtype_name]).reshape((channels,) + tuple(dims))
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("ascii"))
        for c in range(channels):
            fh.write(flat[c].tobytes(order="F"))


def read_array(path):
    """Read a .vgf file; returns ``(header dict, array)``.

    Single-channel files come back 3D, multi-channel files channel-first 4D.
    Raises FormatError (with the byte offset of the problem) on malformed
    input.
    """
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    if not line.endswith(b"\n"):
        raise FormatError("missing newline-terminated header", offset=len(line))
    try:
        header = json.loads(line.decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unparseable header: {exc}", offset=0) from exc
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise FormatError(f"bad magic {header.get('magic')!r}, expected {MAGIC!r}", offset=0)
    if header.get("endian") != "little":
        raise FormatError(f"unsupported endianness {header.get('endian')!r}", offset=0)
    if header.get("order") != "x-fastest":
        raise FormatError(f"unsupported order {header.get('order')!r}", offset=0)
    if header.get("dtype") not in _DTYPES:
        raise FormatError(f"unsupported dtype {header.get('dtype')!r}", offset=0)
    dims = header.get("dims")
    if (not isinstance(dims, list) or len(dims) != 3
            or any(not isinstance(d, int) or d < 1 for d in dims)):
        raise FormatError(f"bad dims {dims!r}", offset=0)
    channels = header.get("channels")
    if not isinstance(channels, int) or channels < 1:
        raise FormatError(f"bad channel count {channels!r}", offset=0)
    dtype = _DTYPES[header["dtype"]]
    expected = int(np.prod(dims)) * channels * dtype.itemsize
    if len(payload) != expected:
        raise FormatError(
            f"payload is {len(payload)} bytes, header implies {expected}",
            offset=len(line) + min(len(payload), expected),
        )
    per_channel = expected // channels
    chans = [
        np.frombuffer(payload[c * per_channel:(c + 1) * per_channel], dtype=dtype)
        .reshape(dims, order="F").copy()
        for c in range(channels)
    ]
    array = chans[0] if channels == 1 else np.stack(chans, axis=0)
    return header, array


def _spec_from_header(header) -> DomainSpec:
    dims = header["dims"]
    h = header["voxel_um"]
    return DomainSpec(size_mm=tuple(d * h / 1000.0 for d in dims), voxel_size_um=h)


def save_grain_field(path, field: GrainField) -> None:
    write_array(path, field.labels, field.spec.voxel_size_um)


def load_grain_field(path, n_ori: int | None = None) -> GrainField:
    header, arr = read_array(path)
    if header["dtype"] != "i32" or header["channels"] != 1:
        raise FormatError("grain field must be a single-channel i32 file", offset=0)
    labels = arr.astype(np.int32)
    inferred = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 1
    return GrainField(spec=_spec_from_header(header), labels=labels,
                      n_ori=n_ori if n_ori is not None else max(inferred, 1))


def save_temperature_field(path, field: TemperatureField) -> None:
    write_array(path, field.T, field.spec.voxel_size_um)


def load_temperature_field(path) -> TemperatureField:
    header, arr = read_array(path)
    if header["dtype"] != "f32" or header["channels"] != 1:
        raise FormatError("temperature field must be a single-channel f32 file", offset=0)
    return TemperatureField(spec=_spec_from_header(header), T=arr)


def save_melt_mask(path, mask: MeltMask) -> None:
    write_array(path, mask.melted.astype(np.int32), mask.spec.voxel_size_um)


def load_melt_mask(path) -> MeltMask:
    header, arr = read_array(path)
    if header["dtype"] != "i32" or header["channels"] != 1:
        raise FormatError("melt mask must be a single-channel i32 file", offset=0)
    return MeltMask(spec=_spec_from_header(header), melted=arr != 0)
