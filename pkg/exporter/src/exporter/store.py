"""Standalone writer for the TGBE embedding-store format.

Kept independent of the consuming package on purpose: the byte layout is
the shared contract. Little-endian throughout: header ``"TGBE" |
version u32 | dim u32 | record_count u64``, then per record ``id_len u32
| id utf-8 | valid_len u32 | rows u32 | rows*dim float32`` (row-major).
"""

from __future__ import annotations

import struct

import numpy as np

STORE_MAGIC = b"TGBE"
STORE_VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_U32 = struct.Struct("<I")


class StoreWriter:
    """Sequential TGBE writer; patches the record count on close."""

    def __init__(self, path, dim: int):
        if dim < 1:
            raise ValueError(f"embedding dimension must be >= 1, got {dim}")
        self._dim = dim
        self._count = 0
        self._fh = open(path, "wb")
        self._fh.write(_HEADER.pack(STORE_MAGIC, STORE_VERSION, dim, 0))

    def write(self, object_id: str, values: np.ndarray) -> None:
        values = np.ascontiguousarray(values, dtype="<f4")
        if values.ndim != 2 or values.shape[1] != self._dim:
            raise ValueError(
                f"record {object_id!r}: expected (rows, {self._dim}) values, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError(f"record {object_id!r}: non-finite embedding values")
        id_bytes = object_id.encode("utf-8")
        rows = values.shape[0]
        self._fh.write(_U32.pack(len(id_bytes)))
        self._fh.write(id_bytes)
        self._fh.write(_U32.pack(rows))  # valid_len: padding is never written
        self._fh.write(_U32.pack(rows))
        self._fh.write(values.tobytes())
        self._count += 1

    def close(self) -> int:
        self._fh.seek(0)
        self._fh.write(_HEADER.pack(STORE_MAGIC, STORE_VERSION, self._dim, self._count))
        self._fh.close()
        return self._count

    def __enter__(self) -> "StoreWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self._fh.close()
