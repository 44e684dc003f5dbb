"""Fixtures: a tiny local encoder (WordPiece tokenizer + 2-layer BERT)
built once per session, plus a toy corpus over its vocabulary."""

from __future__ import annotations

import json
import random

import pytest
import torch

KNOWN_WORDS = [
    "linux", "python", "audio", "video", "network", "server", "client",
    "editor", "game", "tool", "install", "data", "base", "web", "tag",
    "##ing", "##er", "##s",
]
SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    from tokenizers import Tokenizer
    from tokenizers.models import WordPiece
    from tokenizers.normalizers import BertNormalizer
    from tokenizers.pre_tokenizers import BertPreTokenizer
    from tokenizers.processors import TemplateProcessing
    from transformers import BertConfig, BertModel, BertTokenizerFast

    path = tmp_path_factory.mktemp("tiny-encoder")
    vocab = {t: i for i, t in enumerate(SPECIALS + KNOWN_WORDS)}
    tk = Tokenizer(WordPiece(vocab=vocab, unk_token="[UNK]"))
    tk.normalizer = BertNormalizer(lowercase=True)
    tk.pre_tokenizer = BertPreTokenizer()
    tk.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = BertTokenizerFast(
        tokenizer_object=tk, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]",
    )
    tokenizer.save_pretrained(path)

    torch.manual_seed(1234)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64, max_position_embeddings=64,
    )
    BertModel(config).save_pretrained(path)
    return path


def make_toy_corpus(n: int = 20, seed: int = 3) -> list[dict]:
    rng = random.Random(seed)
    base = [w for w in KNOWN_WORDS if not w.startswith("##")]
    records = []
    for i in range(n):
        words = [rng.choice(base) for _ in range(rng.randint(3, 8))]
        if i % 4 == 0:
            words.append("installing")  # exercises WordPiece subwords
        if i % 5 == 0:
            words.append("zzyzx")  # out-of-vocabulary -> [UNK]
        records.append({
            "id": f"obj{i:03d}",
            "title": f"Item {i}",
            "description": " ".join(words),
            "tags": [rng.choice(base)],
        })
    return records


@pytest.fixture(scope="session")
def toy_corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "toy.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for rec in make_toy_corpus():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path
