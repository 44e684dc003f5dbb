"""Turning score vectors into recommendation sets: probability threshold
with top-K truncation, grid calibration of the threshold, and a constant
popularity baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import TagVocabulary
from .embedding import EmbeddingMatrix
from .errors import DataError

DEFAULT_TAU = 0.92
DEFAULT_GRID = tuple(round(i / 100, 2) for i in range(50, 100))


@dataclass(frozen=True)
class RecommendationSet:
    """At most K (tag, score) pairs, all scoring >= tau, descending by
    score with lower tag index winning ties."""

    object_id: str
    items: tuple[tuple[str, float], ...]
    k: int
    tau: float

    def __post_init__(self):
        if len(self.items) > self.k:
            raise DataError(f"{self.object_id!r}: {len(self.items)} items exceed K={self.k}")
        scores = [s for _, s in self.items]
        if any(s < self.tau for s in scores):
            raise DataError(f"{self.object_id!r}: item below threshold {self.tau}")
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise DataError(f"{self.object_id!r}: items not in descending score order")

    def tags(self) -> list[str]:
        return [t for t, _ in self.items]

    def tag_set(self) -> frozenset[str]:
        return frozenset(t for t, _ in self.items)

    def __len__(self) -> int:
        return len(self.items)


def apply_threshold_topk(
    scores: np.ndarray,
    vocab: TagVocabulary,
    tau: float,
    k: int,
    object_id: str = "",
) -> RecommendationSet:
    """Tags scoring >= tau, best first, truncated to K; empty when nothing
    clears the threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(vocab),):
        raise DataError(f"score vector shape {scores.shape} != vocabulary size {len(vocab)}")
    if not 0.0 <= tau <= 1.0:
        raise DataError(f"tau must be in [0, 1], got {tau}")
    if k < 1:
        raise DataError(f"K must be >= 1, got {k}")
    order = np.argsort(-scores, kind="stable")  # ties keep ascending tag index
    items: list[tuple[str, float]] = []
    for i in order:
        if scores[i] < tau:
            break
        items.append((vocab.tags[i], float(scores[i])))
        if len(items) == k:
            break
    return RecommendationSet(object_id=object_id, items=tuple(items), k=k, tau=tau)


def calibrate_threshold(
    model,
    val_set: Sequence[tuple[EmbeddingMatrix, frozenset[str]]],
    vocab: TagVocabulary,
    k: int,
    grid: Sequence[float] = DEFAULT_GRID,
) -> tuple[float, list[tuple[float, float]]]:
    """Grid-search the threshold maximizing validation F1@K (effective
    precision denominator); ties go to the smallest tau.

    ``val_set`` pairs each object's embedding matrix with its true tags.
    Returns (best tau, full (tau, F1) curve in grid order).
    """
    from . import head as head_mod
    from . import metrics  # deferred: metrics imports this module at top level

    grid = list(grid)
    if not grid:
        raise DataError("calibration grid is empty")
    if any(not 0.0 <= g <= 1.0 for g in grid):
        raise DataError(f"grid values must lie in [0, 1]: {grid}")
    if not val_set:
        raise DataError("validation set is empty")

    scored = [(head_mod.forward(model, x), true_tags) for x, true_tags in val_set]
    curve: list[tuple[float, float]] = []
    best_tau = None
    best_f1 = -1.0
    for tau in grid:
        total = 0.0
        for scores, true_tags in scored:
            rec = apply_threshold_topk(scores, vocab, tau, k)
            r = metrics.recall_at_k_single(rec.tag_set(), true_tags, k)
            p = metrics.precision_at_k_single(rec.tag_set(), true_tags, k, mode="effective")
            total += metrics.f1_at_k_single(p, r)
        f1 = total / len(scored)
        curve.append((float(tau), f1))
        if f1 > best_f1 or (f1 == best_f1 and best_tau is not None and tau < best_tau):
            best_f1 = f1
            best_tau = float(tau)
    assert best_tau is not None
    return best_tau, curve


def baseline_popularity(vocab: TagVocabulary, k: int) -> RecommendationSet:
    """Constant recommendation template: the K most frequent tags with
    scores equal to frequency / total frequency."""
    if len(vocab) == 0:
        raise DataError("empty vocabulary")
    if k < 1:
        raise DataError(f"K must be >= 1, got {k}")
    total = sum(vocab.frequency[t] for t in vocab.tags)
    # Vocabulary order is already descending frequency with lexicographic ties.
    items = tuple((t, vocab.frequency[t] / total) for t in vocab.tags[: min(k, len(vocab))])
    return RecommendationSet(object_id="", items=items, k=k, tau=0.0)


def write_recommendations(path, recommendations: Iterable[RecommendationSet]) -> int:
    """JSON Lines output, one ``{"id", "tags", "scores"}`` object per line."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in recommendations:
            doc = {
                "id": rec.object_id,
                "tags": rec.tags(),
                "scores": [s for _, s in rec.items],
            }
            fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n")
            count += 1
    return count
