"""Standalone CEB1 writer.

This package talks to the classifier toolkit only through its documented
file formats, so the CEB1 layout is implemented here independently:

    magic "CEB1" | count u32 | dim u32 |
    count records sorted by doc id: {id_len u16, id UTF-8, dim x f32}

all little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CEB1"


class CebError(ValueError):
    pass


def encode(entries: dict[str, np.ndarray], dim: int) -> bytes:
    if not entries:
        raise CebError("refusing to encode an empty embedding set")
    parts = [MAGIC, struct.pack("<II", len(entries), dim)]
    for doc_id in sorted(entries):
        vector = np.ascontiguousarray(entries[doc_id], dtype="<f4")
        if vector.shape != (dim,):
            raise CebError(f"vector for {doc_id!r} has shape {vector.shape}, expected ({dim},)")
        if not np.isfinite(vector).all():
            raise CebError(f"non-finite value in vector for {doc_id!r}")
        id_bytes = doc_id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise CebError(f"doc id too long: {doc_id[:32]!r}...")
        parts.append(struct.pack("<H", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(vector.tobytes())
    return b"".join(parts)


def write_atomic(entries: dict[str, np.ndarray], dim: int, path: str | Path) -> None:
    """Write to `<path>.tmp` then rename, so readers never see a partial file."""
    path = Path(path)
    data = encode(entries, dim)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
