"""Binary checkpoint format.

Layout, all little-endian::

    b"PKT1"
    uint32   parameter count
    repeated:
        uint32   name length, then the UTF-8 name
        uint32   rank, then rank x uint32 dimensions
        float32  values, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PKT1"


class CheckpointError(ValueError):
    pass


def dumps(params: dict[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<I", len(params))]
    for name, value in params.items():
        raw = name.encode("utf-8")
        arr = np.asarray(value, dtype="<f4", order="C")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    return b"".join(chunks)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise CheckpointError("not a PKT1 checkpoint")
    pos = 4

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(blob):
            raise CheckpointError("truncated checkpoint")
        vals = struct.unpack_from(fmt, blob, pos)
        pos += size
        return vals

    (count,) = take("<I")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = take("<I")
        if pos + name_len > len(blob):
            raise CheckpointError("truncated parameter name")
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = take("<I")
        shape = take(f"<{rank}I") if rank else ()
        n = int(np.prod(shape)) if shape else 1
        if pos + 4 * n > len(blob):
            raise CheckpointError(f"truncated data for {name!r}")
        out[name] = np.frombuffer(blob, dtype="<f4", count=n, offset=pos).reshape(shape).astype(np.float32)
        pos += 4 * n
    if pos != len(blob):
        raise CheckpointError("trailing bytes after last parameter")
    return out


def save_checkpoint(path, params: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps(params))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
