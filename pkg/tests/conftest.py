"""Shared fixtures: synthetic corpora, mock embedding stores, and one
session-scoped trained model reused by the slower checks."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `import oracles`

from tagrec import head
from tagrec.corpus import TagVocabulary, encode_labels, ingest_records
from tagrec.embedding import EmbeddingMatrix, hash_tokens, mock_embed, plan_buckets
from tagrec.synthetic import separable_corpus

SEPARABLE_SEED = 7
SEPARABLE_DIM = 16
SEPARABLE_BOUNDARIES = (16, 32)
SEPARABLE_MAX_LEN = 32


@dataclass
class SeparableSetup:
    """The synthetic separable corpus, fully assembled for training."""

    records: list[dict]
    objects: list
    vocab: TagVocabulary
    store: dict[str, EmbeddingMatrix]
    pairs: list[tuple[EmbeddingMatrix, np.ndarray]]
    items: list[tuple[str, EmbeddingMatrix, frozenset[str]]]


def build_separable_setup(num_objects: int = 50, num_tags: int = 10, seed: int = SEPARABLE_SEED) -> SeparableSetup:
    records = separable_corpus(num_objects=num_objects, num_tags=num_tags, seed=seed)
    objects, vocab, _ = ingest_records(records, min_tag_freq=1)
    store = {
        o.id: mock_embed(hash_tokens(o.text), SEPARABLE_DIM, seed=seed, object_id=o.id) for o in objects
    }
    plan = plan_buckets(
        {o.id: store[o.id].valid_len for o in objects}, SEPARABLE_BOUNDARIES, SEPARABLE_MAX_LEN
    )
    padded = {o.id: store[o.id].padded(plan.assignment[o.id]) for o in objects}
    pairs = [(padded[o.id], encode_labels(o, vocab)) for o in objects]
    items = [(o.id, padded[o.id], o.tags) for o in objects]
    return SeparableSetup(records=records, objects=objects, vocab=vocab, store=store, pairs=pairs, items=items)


@pytest.fixture(scope="session")
def separable_setup() -> SeparableSetup:
    return build_separable_setup()


@pytest.fixture(scope="session")
def overfit_result(separable_setup) -> tuple[head.HeadModel, list[head.EpochStats], SeparableSetup]:
    """Head trained to saturation on the separable corpus (seed 7)."""
    setup = separable_setup
    cfg = head.HeadConfig(embed_dim=SEPARABLE_DIM, num_tags=len(setup.vocab), seed=SEPARABLE_SEED)
    params = head.TrainParams(
        epochs=200, batch_size=8, lr=1e-3, patience=30, k=5, val_tau=0.5, shuffle_seed=SEPARABLE_SEED
    )
    model, history = head.train(head.init_model(cfg), setup.pairs, setup.pairs, params)
    return model, history, setup


@pytest.fixture()
def tiny_vocab() -> TagVocabulary:
    return TagVocabulary(tags=("a", "b", "c"), frequency={"a": 3, "b": 2, "c": 1})
