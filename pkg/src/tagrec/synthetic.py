"""Synthetic corpora for experiments and tests.

Both generators make the label a deterministic function of the tokens:
an object carries tag ``t`` exactly when the word ``t`` occurs in its
text. That keeps the recommendation task learnable from token
embeddings alone and lets experiments check separability end to end.
"""

from __future__ import annotations

import json

import numpy as np


def write_jsonl(records: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n")


def separable_corpus(
    num_objects: int = 50,
    num_tags: int = 10,
    seed: int = 7,
    num_fillers: int = 20,
    max_extra_signals: int = 3,
    filler_range: tuple[int, int] = (4, 8),
) -> list[dict]:
    """Small fully-separable corpus: tag ``sig??`` is true iff the word
    ``sig??`` occurs in the description.

    Object ``i`` always contains signal word ``i % num_tags`` (so every
    tag occurs), plus a few extra signals and filler words in shuffled
    order. Every object has at least 6 tokens.
    """
    rng = np.random.default_rng(seed)
    signals = [f"sig{j:02d}" for j in range(num_tags)]
    fillers = [f"fill{j:02d}" for j in range(num_fillers)]
    records = []
    for i in range(num_objects):
        chosen = {i % num_tags}
        extra = rng.integers(0, max_extra_signals + 1)
        if extra:
            chosen.update(rng.choice(num_tags, size=extra, replace=False).tolist())
        n_fill = int(rng.integers(filler_range[0], filler_range[1] + 1))
        words = [signals[j] for j in sorted(chosen)]
        words += [fillers[j] for j in rng.choice(num_fillers, size=n_fill, replace=False)]
        rng.shuffle(words)
        records.append(
            {
                "id": f"obj{i:04d}",
                "title": f"item {i:04d}",
                "description": " ".join(words),
                "tags": [signals[j] for j in sorted(chosen)],
            }
        )
    return records


def zipf_corpus(
    num_objects: int = 1000,
    num_tags: int = 200,
    seed: int = 11,
    exponent: float = 1.2,
    tags_per_object: tuple[int, int] = (2, 5),
    num_fillers: int = 50,
    filler_range: tuple[int, int] = (4, 10),
) -> list[dict]:
    """Corpus with a heavy-tailed tag distribution: tag ``j`` is drawn
    with probability proportional to ``1/(j+1)^exponent``.

    Tag words appear in the description (the separability property
    holds), so a trained head can beat the popularity baseline.
    """
    rng = np.random.default_rng(seed)
    tags = [f"tag{j:03d}" for j in range(num_tags)]
    weights = 1.0 / np.arange(1, num_tags + 1, dtype=np.float64) ** exponent
    probs = weights / weights.sum()
    fillers = [f"word{j:03d}" for j in range(num_fillers)]
    records = []
    for i in range(num_objects):
        n_tags = int(rng.integers(tags_per_object[0], tags_per_object[1] + 1))
        chosen = rng.choice(num_tags, size=n_tags, replace=False, p=probs)
        n_fill = int(rng.integers(filler_range[0], filler_range[1] + 1))
        words = [tags[j] for j in sorted(chosen.tolist())]
        words += [fillers[j] for j in rng.choice(num_fillers, size=n_fill, replace=False)]
        rng.shuffle(words)
        records.append(
            {
                "id": f"obj{i:05d}",
                "title": f"project {i:05d}",
                "description": " ".join(words),
                "tags": [tags[j] for j in sorted(chosen.tolist())],
            }
        )
    return records
