"""Token-embedding plumbing: fixed-shape embedding matrices, length
bucketing, the little-endian "TGBE" embedding-store format, and a
deterministic mock embedder that stands in for a frozen encoder.
"""

from __future__ import annotations

import struct
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError, FormatError

STORE_MAGIC = b"TGBE"
STORE_VERSION = 1

DEFAULT_BOUNDARIES = (64, 128, 256, 512)
DEFAULT_MAX_SEQ_LEN = 512

_HEADER = struct.Struct("<4sIIQ")  # magic | version | dim | record_count
_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Per-object token embeddings: ``values`` is (rows, cols) float32,
    rows beyond ``valid_len`` are zero padding."""

    object_id: str
    values: np.ndarray
    valid_len: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise DataError(f"{self.object_id!r}: embedding values must be 2-D, got {values.ndim}-D")
        object.__setattr__(self, "values", values)
        if not 0 <= self.valid_len <= values.shape[0]:
            raise DataError(
                f"{self.object_id!r}: valid_len {self.valid_len} outside [0, {values.shape[0]}]"
            )
        if not np.all(np.isfinite(values)):
            raise DataError(f"{self.object_id!r}: embedding contains non-finite values")
        if self.valid_len < values.shape[0] and np.any(values[self.valid_len :]):
            raise DataError(f"{self.object_id!r}: padding rows beyond valid_len are not zero")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def padded(self, length: int) -> "EmbeddingMatrix":
        """Zero-pad to ``length`` rows (no-op if already that long)."""
        if length < self.rows:
            raise DataError(f"{self.object_id!r}: cannot pad {self.rows} rows down to {length}")
        if length == self.rows:
            return self
        out = np.zeros((length, self.cols), dtype=np.float32)
        out[: self.rows] = self.values
        return EmbeddingMatrix(object_id=self.object_id, values=out, valid_len=self.valid_len)

    def trimmed(self) -> "EmbeddingMatrix":
        """Drop padding rows."""
        if self.rows == self.valid_len:
            return self
        return EmbeddingMatrix(
            object_id=self.object_id, values=self.values[: self.valid_len].copy(), valid_len=self.valid_len
        )


@dataclass(frozen=True)
class BucketPlan:
    """Padded-length assignment: every object goes to the smallest
    boundary that fits min(token count, max_seq_len)."""

    boundaries: tuple[int, ...]
    assignment: dict[str, int]
    truncated: frozenset[str]


def plan_buckets(
    lengths: dict[str, int],
    boundaries: Sequence[int] = DEFAULT_BOUNDARIES,
    max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
) -> BucketPlan:
    """Assign each object the smallest boundary >= min(length, max_seq_len).

    Objects longer than ``max_seq_len`` are flagged as truncated.
    """
    bounds = tuple(boundaries)
    if not bounds:
        raise DataError("bucket boundaries must be non-empty")
    if any(b <= 0 for b in bounds) or any(a >= b for a, b in zip(bounds, bounds[1:])):
        raise DataError(f"bucket boundaries must be strictly ascending and positive: {bounds}")
    if bounds[-1] != max_seq_len:
        raise DataError(f"last boundary {bounds[-1]} must equal max_seq_len {max_seq_len}")
    assignment: dict[str, int] = {}
    truncated: set[str] = set()
    for oid, length in lengths.items():
        if length < 0:
            raise DataError(f"{oid!r}: negative token count {length}")
        effective = min(length, max_seq_len)
        assignment[oid] = bounds[bisect_left(bounds, effective)]
        if length > max_seq_len:
            truncated.add(oid)
    return BucketPlan(boundaries=bounds, assignment=assignment, truncated=frozenset(truncated))


def read_store_header(path) -> tuple[int, int, int]:
    """Return (version, dim, record_count) from a store file header."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
    except OSError as e:
        raise DataError(f"cannot read embedding store {path}: {e}") from e
    if len(head) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(head)} bytes)")
    magic, version, dim, count = _HEADER.unpack(head)
    if magic != STORE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {STORE_MAGIC!r}")
    if version != STORE_VERSION:
        raise FormatError(f"{path}: unsupported store version {version}")
    if dim < 1:
        raise FormatError(f"{path}: embedding dimension must be >= 1, got {dim}")
    return version, dim, count


def read_embedding_store(path) -> Iterator[EmbeddingMatrix]:
    """Stream records from a TGBE store in file order.

    Raises :class:`FormatError` on bad magic, unsupported version,
    truncated records, duplicate ids, or non-finite values (reported
    with the file offset of the offending record).
    """
    _, dim, count = read_store_header(path)
    try:
        fh = open(path, "rb")
    except OSError as e:
        raise DataError(f"cannot read embedding store {path}: {e}") from e
    with fh:
        fh.seek(_HEADER.size)

        def read_exact(n: int, what: str) -> bytes:
            offset = fh.tell()
            buf = fh.read(n)
            if len(buf) != n:
                raise FormatError(f"{path}: truncated record ({what}) at offset {offset}")
            return buf

        seen: set[str] = set()
        for _ in range(count):
            record_offset = fh.tell()
            (id_len,) = _U32.unpack(read_exact(_U32.size, "id length"))
            oid = read_exact(id_len, "id bytes").decode("utf-8")
            (valid_len,) = _U32.unpack(read_exact(_U32.size, "valid_len"))
            (rows,) = _U32.unpack(read_exact(_U32.size, "row count"))
            raw = read_exact(rows * dim * 4, "values")
            values = np.frombuffer(raw, dtype="<f4").reshape(rows, dim)
            if oid in seen:
                raise FormatError(f"{path}: duplicate id {oid!r} at offset {record_offset}")
            seen.add(oid)
            if valid_len > rows:
                raise FormatError(
                    f"{path}: record {oid!r} at offset {record_offset}: valid_len {valid_len} > rows {rows}"
                )
            if not np.all(np.isfinite(values)):
                raise FormatError(
                    f"{path}: record {oid!r} at offset {record_offset} contains non-finite values"
                )
            yield EmbeddingMatrix(object_id=oid, values=values.copy(), valid_len=valid_len)
        trailing = fh.read(1)
        if trailing:
            raise FormatError(f"{path}: trailing data after {count} records")


def load_embedding_store(path) -> tuple[int, dict[str, EmbeddingMatrix]]:
    """Read a whole store into an id-keyed map; returns (dim, map)."""
    _, dim, _ = read_store_header(path)
    return dim, {m.object_id: m for m in read_embedding_store(path)}


def write_embedding_store(path, matrices: Iterable[EmbeddingMatrix], dim: int) -> int:
    """Write matrices to a TGBE store; returns the record count.

    Every matrix must have ``cols == dim``. The on-disk layout is
    little-endian: header ``TGBE | version u32 | dim u32 | count u64``,
    then per record ``id_len u32 | id utf-8 | valid_len u32 | rows u32 |
    rows*dim float32``.
    """
    if dim < 1:
        raise DataError(f"embedding dimension must be >= 1, got {dim}")
    count = 0
    try:
        fh = open(path, "wb")
    except OSError as e:
        raise DataError(f"cannot write embedding store {path}: {e}") from e
    with fh:
        fh.write(_HEADER.pack(STORE_MAGIC, STORE_VERSION, dim, 0))
        for m in matrices:
            if m.cols != dim:
                raise DataError(f"record {m.object_id!r}: cols {m.cols} != store dim {dim}")
            id_bytes = m.object_id.encode("utf-8")
            fh.write(_U32.pack(len(id_bytes)))
            fh.write(id_bytes)
            fh.write(_U32.pack(m.valid_len))
            fh.write(_U32.pack(m.rows))
            fh.write(np.ascontiguousarray(m.values, dtype="<f4").tobytes())
            count += 1
        fh.seek(0)
        fh.write(_HEADER.pack(STORE_MAGIC, STORE_VERSION, dim, count))
    return count


# --- deterministic mock embedder -------------------------------------------

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_MUL2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over uint64 arrays."""
    z = (x + _SM_GAMMA).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _SM_MUL1
    z = (z ^ (z >> np.uint64(27))) * _SM_MUL2
    return z ^ (z >> np.uint64(31))


def mock_embed(tokens: Sequence[int], dim: int, seed: int, *, object_id: str = "") -> EmbeddingMatrix:
    """Deterministic stand-in for a frozen encoder.

    Each value is a pure function of (seed, token id, position, column),
    uniform in [-1, 1]. Identical inputs give bitwise-identical output.
    """
    if dim < 1:
        raise DataError(f"embedding dimension must be >= 1, got {dim}")
    n = len(tokens)
    if n == 0:
        return EmbeddingMatrix(object_id=object_id, values=np.zeros((0, dim), dtype=np.float32), valid_len=0)
    tok = np.array([int(t) & _U64_MASK for t in tokens], dtype=np.uint64)
    pos = np.arange(n, dtype=np.uint64)
    base = _splitmix64(_splitmix64(np.uint64(int(seed) & _U64_MASK) ^ tok) ^ _splitmix64(pos))
    cols = _splitmix64(np.arange(dim, dtype=np.uint64))
    keys = _splitmix64(base[:, None] ^ cols[None, :])
    unit = (keys >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    values = (2.0 * unit - 1.0).astype(np.float32)
    return EmbeddingMatrix(object_id=object_id, values=values, valid_len=n)


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def hash_tokens(text: str) -> list[int]:
    """Whitespace tokens mapped to stable 64-bit FNV-1a ids."""
    ids = []
    for word in text.split():
        h = _FNV_OFFSET
        for b in word.encode("utf-8"):
            h = ((h ^ b) * _FNV_PRIME) & _U64_MASK
        ids.append(h)
    return ids


def write_mock_store(
    texts: Iterable[tuple[str, str]], dim: int, seed: int, path, max_seq_len: int = DEFAULT_MAX_SEQ_LEN
) -> int:
    """TGBE store with mock embeddings for ``(object id, text)`` pairs.

    Stands in for a real encoder export: tokenizes each text on
    whitespace, caps at ``max_seq_len`` tokens, and stores unpadded
    matrices (rows == valid_len).
    """

    def records():
        for oid, text in texts:
            tokens = hash_tokens(text)[:max_seq_len]
            yield mock_embed(tokens, dim, seed, object_id=oid)

    return write_embedding_store(path, records(), dim)
