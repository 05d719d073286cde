"""Reader/writer for the ``.vgf`` voxel-field format.

Implemented against the published format description (ASCII JSON header line
plus raw little-endian x-fastest payload) so this package interoperates with
the simulator through files alone.
"""

from __future__ import annotations

import json

import numpy as np

MAGIC = "VGF1"
_DTYPES = {"i32": np.dtype("<i4"), "f32": np.dtype("<f4")}


def read(path):
    """Returns ``(header, array)``; 3D for one channel, 4D channel-first else."""
    with open(path, "rb") as fh:
        line = fh.readline()
        payload = fh.read()
    header = json.loads(line.decode("ascii"))
    if header.get("magic") != MAGIC:
        raise ValueError(f"{path}: bad magic {header.get('magic')!r}")
    if header.get("endian") != "little" or header.get("order") != "x-fastest":
        raise ValueError(f"{path}: unsupported layout")
    dims = header["dims"]
    channels = header.get("channels", 1)
    dtype = _DTYPES[header["dtype"]]
    expected = int(np.prod(dims)) * channels * dtype.itemsize
    if len(payload) != expected:
        raise ValueError(f"{path}: payload {len(payload)} != expected {expected}")
    per = expected // channels
    chans = [np.frombuffer(payload[c * per:(c + 1) * per], dtype=dtype)
             .reshape(dims, order="F").copy() for c in range(channels)]
    return header, (chans[0] if channels == 1 else np.stack(chans))


def write(path, array: np.ndarray, voxel_um: float) -> None:
    arr = np.asarray(array)
    if arr.ndim == 3:
        channels, dims = 1, arr.shape
    else:
        channels, dims = arr.shape[0], arr.shape[1:]
    dtype_name = "i32" if np.issubdtype(arr.dtype, np.integer) else "f32"
    header = {"magic": MAGIC, "dims": [int(d) for d in dims], "voxel_um": float(voxel_um),
              "channels": int(channels), "dtype": dtype_name, "order": "x-fastest",
              "endian": "little"}
    flat = arr.astype(_DTYPES[dtype_name]).reshape((channels,) + tuple(dims))
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("ascii"))
        for c in range(channels):
            fh.write(flat[c].tobytes(order="F"))
