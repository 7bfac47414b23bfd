"""Flat binary container for named tensors.

Byte layout (little-endian throughout):

    magic   5 bytes  b"SPKN1"
    then, repeated until end of file, one record per tensor:
        name_len  uint32
        name      name_len bytes, UTF-8
        rank      uint32          (0..3)
        extents   rank * uint64
        payload   prod(extents) * float64

Used for neuron parameters and dataset caches.  Readers stop at EOF; a
truncated record is an error.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SPKN1"


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named arrays; values are converted to float64."""
    buf = bytearray(MAGIC)
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        encoded = name.encode("utf-8")
        buf += struct.pack("<I", len(encoded))
        buf += encoded
        buf += struct.pack("<I", arr.ndim)
        buf += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        buf += arr.tobytes()
    Path(path).write_bytes(bytes(buf))


def load_tensors(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:5]!r}")
    out: dict[str, np.ndarray] = {}
    offset = 5
    total = len(raw)
    while offset < total:
        (name_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        name = raw[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        if rank > 3:
            raise ValueError(f"{path}: tensor {name!r} has rank {rank} > 3")
        shape = struct.unpack_from(f"<{rank}Q", raw, offset)
        offset += 8 * rank
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        end = offset + 8 * count
        if end > total:
            raise ValueError(f"{path}: truncated payload for tensor {name!r}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        out[name] = arr.reshape(shape).copy()
        offset = end
    return out
