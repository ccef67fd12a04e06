"""Binary checkpoint format for named tensors.

Layout (all integers little-endian): magic ``GODE``, u32 version, u32
tensor count; then per tensor: u32 name length, UTF-8 name, u32 ndims,
u32 dims, float32 little-endian data. Tensors are written in sorted name
order so equal contents produce identical bytes.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"GODE"
VERSION = 1


class CheckpointFormatError(ValueError):
    """Bad magic, unknown version, or truncated checkpoint."""


def save_checkpoint(path: str | Path, tensors: Mapping[str, np.ndarray]) -> None:
    """Write tensors as float32; the write is atomic (tmp file + rename)."""
    path = Path(path)
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<II", VERSION, len(tensors))
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype=np.float32)  # keeps 0-d shapes
        encoded = name.encode("utf-8")
        payload += struct.pack("<I", len(encoded))
        payload += encoded
        payload += struct.pack("<I", arr.ndim)
        payload += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.astype("<f4").tobytes()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Read a checkpoint back as float64 arrays (training precision)."""
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    if len(raw) < 12 or view[:4] != MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = bytes(view[offset : offset + name_len]).decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            dims = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            n_values = int(np.prod(dims)) if ndim else 1
            data = np.frombuffer(raw, dtype="<f4", count=n_values, offset=offset)
            offset += 4 * n_values
            tensors[name] = data.reshape(dims).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: truncated checkpoint ({exc})") from None
    if offset != len(raw):
        raise CheckpointFormatError(f"{path}: trailing bytes after tensor data")
    return tensors
