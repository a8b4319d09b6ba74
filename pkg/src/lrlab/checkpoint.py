"""Binary checkpoint files for parameter vectors.

Layout (all integers little-endian)::

    b"SIRL"                      magic
    u32     format version (1)
    f64     radius
    u32     number of groups
    per group: u16 name length, UTF-8 name, u64 element count
    f64[]   payload, concatenated in group order
    u64     checksum = sum of payload bytes mod 2**64
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError
from .mlp import ParamVector

MAGIC = b"SIRL"
VERSION = 1


def payload_checksum(payload: bytes) -> int:
    return int(np.frombuffer(payload, dtype=np.uint8).sum(dtype=np.uint64))


def encode_checkpoint(theta: ParamVector) -> bytes:
    values = np.ascontiguousarray(theta.values, dtype="<f8")
    parts = [MAGIC, struct.pack("<IdI", VERSION, float(theta.radius), len(theta.groups))]
    for name, _, length in theta.groups:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<Q", length))
    payload = values.tobytes()
    parts += [payload, struct.pack("<Q", payload_checksum(payload))]
    return b"".join(parts)


def decode_checkpoint(data: bytes) -> ParamVector:
    if len(data) < 4 or data[:4] != MAGIC:
        raise CheckpointError("bad magic: not a SIRL checkpoint")
    try:
        version, radius, n_groups = struct.unpack_from("<IdI", data, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos = 4 + struct.calcsize("<IdI")
        groups, offset = [], 0
        for _ in range(n_groups):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (length,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            groups.append((name, offset, length))
            offset += length
    except struct.error as exc:
        raise CheckpointError(f"truncated header: {exc}") from None
    except UnicodeDecodeError:
        raise CheckpointError("group name is not valid UTF-8") from None
    payload = data[pos:pos + 8 * offset]
    if len(payload) != 8 * offset or len(data) != pos + 8 * offset + 8:
        raise CheckpointError("payload length does not match the group table")
    (checksum,) = struct.unpack_from("<Q", data, pos + 8 * offset)
    if checksum != payload_checksum(payload):
        raise CheckpointError("checksum mismatch")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return ParamVector(values, tuple(groups), radius)


def write_checkpoint(theta: ParamVector, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(theta))
    tmp.replace(path)
    return path


def read_checkpoint(path, expected_groups=None) -> ParamVector:
    theta = decode_checkpoint(Path(path).read_bytes())
    if expected_groups is not None and tuple(expected_groups) != theta.groups:
        raise CheckpointError(f"group table {theta.groups} does not match {tuple(expected_groups)}")
    return theta


def verify_checkpoint(path) -> bool:
    try:
        read_checkpoint(path)
    except (CheckpointError, OSError):
        return False
    return True
