"""Cross-module plumbing shared by the CLI, scripts, and tests: joining
dataset bundles with embedding stores, bucket padding, validation
carving, and the short-sequence filter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import DatasetBundle, encode_labels
from .embedding import EmbeddingMatrix, plan_buckets
from .errors import DataError, MissingEmbeddingsError

# An assembled item: (object id, padded embedding matrix, label vector, true tags)
Item = tuple[str, EmbeddingMatrix, np.ndarray, frozenset[str]]


@dataclass(frozen=True)
class Assembled:
    """Bundle ids joined with their padded embeddings and labels."""

    items: tuple[Item, ...]
    skipped_short: tuple[str, ...]
    truncated: tuple[str, ...]

    def train_pairs(self) -> list[tuple[EmbeddingMatrix, np.ndarray]]:
        return [(x, y) for _, x, y, _ in self.items]

    def eval_triples(self) -> list[tuple[str, EmbeddingMatrix, frozenset[str]]]:
        return [(oid, x, tags) for oid, x, _, tags in self.items]

    def calib_pairs(self) -> list[tuple[EmbeddingMatrix, frozenset[str]]]:
        return [(x, tags) for _, x, _, tags in self.items]


def assemble(
    bundle: DatasetBundle,
    store: dict[str, EmbeddingMatrix],
    ids: Sequence[str],
    boundaries: Sequence[int],
    max_seq_len: int,
    min_tokens: int,
) -> Assembled:
    """Join object ids with store records, pad each matrix to its bucket
    boundary, and drop sequences shorter than ``min_tokens``.

    Raises :class:`MissingEmbeddingsError` listing every id without a
    store record.
    """
    by_id = bundle.objects_by_id()
    unknown = [oid for oid in ids if oid not in by_id]
    if unknown:
        raise DataError(f"ids not present in the bundle: {unknown[:10]}")
    missing = [oid for oid in ids if oid not in store]
    if missing:
        raise MissingEmbeddingsError(missing)

    lengths = {oid: store[oid].valid_len for oid in ids}
    plan = plan_buckets(lengths, boundaries, max_seq_len)
    items: list[Item] = []
    skipped: list[str] = []
    for oid in ids:
        matrix = store[oid]
        if matrix.valid_len > max_seq_len:
            # The store may hold more tokens than the pipeline consumes.
            trimmed = matrix.values[:max_seq_len]
            matrix = EmbeddingMatrix(object_id=oid, values=trimmed.copy(), valid_len=max_seq_len)
        if matrix.valid_len < min_tokens:
            skipped.append(oid)
            continue
        obj = by_id[oid]
        items.append(
            (
                oid,
                matrix.padded(plan.assignment[oid]),
                encode_labels(obj, bundle.vocab),
                obj.tags,
            )
        )
    return Assembled(
        items=tuple(items),
        skipped_short=tuple(skipped),
        truncated=tuple(sorted(plan.truncated)),
    )


def carve_validation(train_ids: Sequence[str], val_fraction: float, seed: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Deterministically split train ids into (train, validation) parts.

    ``val_fraction`` of the ids (rounded down, at least 1 when the
    fraction is positive and there are at least 2 ids) become validation;
    order is preserved in both halves.
    """
    if not 0.0 <= val_fraction < 1.0:
        raise DataError(f"val_fraction must lie in [0, 1), got {val_fraction}")
    n = len(train_ids)
    n_val = int(n * val_fraction)
    if val_fraction > 0.0 and n_val == 0 and n >= 2:
        n_val = 1
    if n_val == 0:
        return tuple(train_ids), ()
    if n_val >= n:
        raise DataError(f"validation carve would consume all {n} training objects")
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(n, size=n_val, replace=False).tolist())
    val = tuple(train_ids[i] for i in range(n) if i in chosen)
    train = tuple(train_ids[i] for i in range(n) if i not in chosen)
    return train, val
