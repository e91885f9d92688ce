"""Binary field snapshots.

Layout (all little-endian):

    magic   4 bytes  b"DSBU"
    version u32      currently 1
    n       u32
    nu      i32
    box_length f64
    t          f64
    gamma      f64
    payload  16*n*n bytes: complex128 samples, row-major, x2 fastest
    crc32   u32      checksum of the payload

Writes go through a temp file and an atomic rename; reads validate magic,
version, structural sizes, and the checksum.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import SnapshotFormatError
from .spectral import PHYSICAL, Field, Grid2D

MAGIC = b"DSBU"
VERSION = 1
_HEADER = struct.Struct("<4sIIiddd")


@dataclass(frozen=True)
class SnapshotMeta:
    """Run metadata carried alongside the field samples."""

    t: float
    nu: int
    gamma: float


def write_snapshot(path: str, field: Field, meta: SnapshotMeta) -> None:
    """Write a physical-space snapshot atomically."""
    phys = field.to_physical()
    n = phys.grid.n
    header = _HEADER.pack(
        MAGIC, VERSION, n, meta.nu, phys.grid.box_length, meta.t, meta.gamma
    )
    payload = np.ascontiguousarray(phys.values, dtype="<c16").tobytes()
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))
    os.replace(tmp, path)


def read_snapshot(path: str) -> tuple[Field, SnapshotMeta]:
    """Read and validate a snapshot written by ``write_snapshot``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size + 4:
        raise SnapshotFormatError(f"{path}: truncated file ({len(blob)} bytes)")
    magic, version, n, nu, box_length, t, gamma = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 16 * n * n + 4
    if len(blob) != expected:
        raise SnapshotFormatError(
            f"{path}: structural size mismatch: header says n={n} "
            f"(expect {expected} bytes), file has {len(blob)}"
        )
    payload = blob[_HEADER.size:-4]
    (crc_stored,) = struct.unpack_from("<I", blob, len(blob) - 4)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    if crc != crc_stored:
        raise SnapshotFormatError(
            f"{path}: checksum mismatch over payload bytes "
            f"[{_HEADER.size}, {len(blob) - 4})"
        )
    values = np.frombuffer(payload, dtype="<c16").reshape(n, n)
    field = Field(Grid2D(n, box_length), values.copy(), PHYSICAL)
    return field, SnapshotMeta(t=t, nu=nu, gamma=gamma)
