import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lrlab.checkpoint import (decode_checkpoint, encode_checkpoint, payload_checksum, read_checkpoint,
                              verify_checkpoint, write_checkpoint)
from lrlab.errors import CheckpointError
from lrlab.mlp import NetworkSpec, ParamVector, init_params


def theta():
    return init_params(NetworkSpec(32), 5)


def test_round_trip_bit_exact(tmp_path):
    t = theta()
    p = write_checkpoint(t, tmp_path / "a.sirl")
    back = read_checkpoint(p, expected_groups=t.groups)
    assert back.values.tobytes() == t.values.tobytes()
    assert back.radius == t.radius and back.groups == t.groups
    assert not (tmp_path / "a.sirl.tmp").exists()


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(allow_nan=True, allow_infinity=True)),
       st.floats(0.01, 100))
@settings(max_examples=50)
def test_encode_decode_any_payload(values, radius):
    k = values.size // 2
    t = ParamVector(values, (("a", 0, k), ("b", k, values.size - k)), radius)
    back = decode_checkpoint(encode_checkpoint(t))
    assert back.values.tobytes() == t.values.tobytes() and back.radius == radius


def test_layout():
    t = ParamVector(np.array([1.0, -2.0]), (("w", 0, 2),), 1.5)
    raw = encode_checkpoint(t)
    assert raw[:4] == b"SIRL"
    assert struct.unpack_from("<IdI", raw, 4) == (1, 1.5, 1)
    pos = 4 + 16
    assert struct.unpack_from("<H", raw, pos) == (1,) and raw[pos + 2:pos + 3] == b"w"
    assert struct.unpack_from("<Q", raw, pos + 3) == (2,)
    payload = raw[pos + 11:pos + 27]
    assert np.frombuffer(payload, "<f8").tolist() == [1.0, -2.0]
    assert struct.unpack_from("<Q", raw, pos + 27) == (sum(payload) % 2 ** 64,)
    assert payload_checksum(payload) == sum(payload)
    assert len(raw) == pos + 35


def test_corruptions(tmp_path):
    raw = bytearray(encode_checkpoint(theta()))
    flipped = bytearray(raw)
    flipped[100] ^= 0x01
    with pytest.raises(CheckpointError, match="checksum"):
        decode_checkpoint(bytes(flipped))
    with pytest.raises(CheckpointError, match="magic"):
        decode_checkpoint(b"")
    with pytest.raises(CheckpointError, match="magic"):
        decode_checkpoint(b"NOPE" + bytes(raw[4:]))
    bad_version = bytearray(raw)
    bad_version[4] = 9
    with pytest.raises(CheckpointError, match="version"):
        decode_checkpoint(bytes(bad_version))
    with pytest.raises(CheckpointError):
        decode_checkpoint(bytes(raw[:-9]))
    with pytest.raises(CheckpointError):
        decode_checkpoint(bytes(raw[:10]))
    with pytest.raises(CheckpointError):
        decode_checkpoint(bytes(raw) + b"\x00")
    bad_name = bytearray(raw)
    bad_name[26] = 0xFF  # inside the first group name
    with pytest.raises(CheckpointError):
        decode_checkpoint(bytes(bad_name))
    p = tmp_path / "e.sirl"
    p.write_bytes(b"")
    assert not verify_checkpoint(p)
    assert not verify_checkpoint(tmp_path / "missing.sirl")


def test_group_table_mismatch(tmp_path):
    p = write_checkpoint(theta(), tmp_path / "a.sirl")
    with pytest.raises(CheckpointError, match="group table"):
        read_checkpoint(p, expected_groups=(("layer1", 0, 3),))
