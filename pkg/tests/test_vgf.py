import json

import numpy as np
import pytest

from meltpath import vgf
from meltpath.domain import DomainSpec, GrainField
from meltpath.errors import FormatError
from meltpath.thermal import MeltMask, TemperatureField


@pytest.fixture
def spec():
    return DomainSpec(size_mm=(0.12, 0.08, 0.04), voxel_size_um=10.0)


def test_grain_field_roundtrip(tmp_path, spec):
    rng = np.random.default_rng(0)
    field = GrainField(spec=spec, labels=rng.integers(-1, 20, size=spec.dims).astype(np.int32),
                       n_ori=20)
    path = tmp_path / "f.vgf"
    vgf.save_grain_field(path, field)
    loaded = vgf.load_grain_field(path, n_ori=20)
    assert np.array_equal(loaded.labels, field.labels)
    assert loaded.spec.dims == spec.dims
    assert loaded.spec.voxel_size_um == spec.voxel_size_um


def test_temperature_roundtrip(tmp_path, spec):
    rng = np.random.default_rng(1)
    T = TemperatureField(spec=spec, T=rng.uniform(293, 2500, size=spec.dims).astype(np.float32))
    path = tmp_path / "t.vgf"
    vgf.save_temperature_field(path, T)
    loaded = vgf.load_temperature_field(path)
    assert np.array_equal(loaded.T, T.T)


def test_melt_mask_roundtrip(tmp_path, spec):
    rng = np.random.default_rng(2)
    mask = MeltMask(spec=spec, melted=rng.random(spec.dims) > 0.5)
    path = tmp_path / "m.vgf"
    vgf.save_melt_mask(path, mask)
    loaded = vgf.load_melt_mask(path)
    assert np.array_equal(loaded.melted, mask.melted)


def test_payload_length_mismatch(tmp_path, spec):
    path = tmp_path / "bad.vgf"
    field = GrainField(spec=spec, labels=np.zeros(spec.dims, np.int32), n_ori=2)
    vgf.save_grain_field(path, field)
    data = path.read_bytes()
    path.write_bytes(data[:-8])  # truncate payload
    with pytest.raises(FormatError) as err:
        vgf.read_array(path)
    assert err.value.offset is not None


def test_big_endian_rejected(tmp_path, spec):
    path = tmp_path / "be.vgf"
    header = {"magic": "VGF1", "dims": [2, 2, 2], "voxel_um": 10.0, "channels": 1,
              "dtype": "i32", "order": "x-fastest", "endian": "big"}
    payload = np.zeros(8, dtype=">i4").tobytes()
    path.write_bytes((json.dumps(header) + "\n").encode() + payload)
    with pytest.raises(FormatError, match="endian"):
        vgf.read_array(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "nm.vgf"
    header = {"magic": "XXXX", "dims": [1, 1, 1], "voxel_um": 1.0, "channels": 1,
              "dtype": "i32", "order": "x-fastest", "endian": "little"}
    path.write_bytes((json.dumps(header) + "\n").encode() + b"\x00\x00\x00\x00")
    with pytest.raises(FormatError, match="magic"):
        vgf.read_array(path)


def test_garbage_header_rejected(tmp_path):
    path = tmp_path / "junk.vgf"
    path.write_bytes(b"not json at all\n\x00\x01")
    with pytest.raises(FormatError):
        vgf.read_array(path)


def test_missing_newline_rejected(tmp_path):
    path = tmp_path / "trunc.vgf"
    path.write_bytes(b'{"magic": "VGF1"')
    with pytest.raises(FormatError):
        vgf.read_array(path)


def test_x_fastest_layout(tmp_path):
    # Byte order on disk must be x-fastest: payload[k] walks x first.
    spec = DomainSpec(size_mm=(0.03, 0.02, 0.01), voxel_size_um=10.0)
    labels = np.arange(3 * 2 * 1, dtype=np.int32).reshape(3, 2, 1)
    field = GrainField(spec=spec, labels=labels, n_ori=6)
    path = tmp_path / "layout.vgf"
    vgf.save_grain_field(path, field)
    payload = path.read_bytes().split(b"\n", 1)[1]
    flat = np.frombuffer(payload, dtype="<i4")
    assert flat.tolist() == [labels[0, 0, 0], labels[1, 0, 0], labels[2, 0, 0],
                             labels[0, 1, 0], labels[1, 1, 0], labels[2, 1, 0]]


def test_multichannel_roundtrip(tmp_path):
    arr = np.random.default_rng(3).random((4, 5, 6, 7)).astype(np.float32)
    path = tmp_path / "mc.vgf"
    vgf.write_array(path, arr, voxel_um=5.0)
    header, back = vgf.read_array(path)
    assert header["channels"] == 4
    assert np.array_equal(back, arr)
