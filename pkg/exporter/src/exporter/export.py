"""Export final-hidden-layer token embeddings for a JSONL corpus.

The encoder stays frozen (eval mode, no gradients). One TGBE record per
corpus object in corpus order; special tokens are kept in the rows;
padding is never written (rows == valid_len). A JSON manifest pinning
the encoder identity is placed next to the store.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .store import StoreWriter

MANIFEST_FORMAT = "tagrec-export-manifest"
MANIFEST_VERSION = 1

_CODE_BLOCK_RE = re.compile(r"<(pre|code)\b[^>]*>.*?</\1\s*>", re.DOTALL)
_FENCE_RE = re.compile(r"```.*?```", re.DOTALL)
_HTML_TAG_RE = re.compile(r"<[^<>]*>")
_CONTROL_RE = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f-\x9f]")
_WS_RE = re.compile(r"\s+")


class ExportError(Exception):
    """Unusable corpus or encoder."""


def prepare_text(title: str, description: str) -> str:
    """Mirror of the engine's normalization: lowercase, strip HTML code
    blocks and tags, drop control characters, collapse whitespace."""
    text = (title + " " + description).lower()
    text = _CONTROL_RE.sub(" ", text)
    while True:
        stripped = _CODE_BLOCK_RE.sub(" ", text)
        stripped = _FENCE_RE.sub(" ", stripped)
        stripped = _HTML_TAG_RE.sub(" ", stripped)
        if stripped == text:
            break
        text = stripped
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class ExportJob:
    corpus: str
    out: str
    encoder: str
    revision: str = "main"
    max_seq_len: int = 512
    batch_size: int = 16
    device: str = "cpu"


@dataclass(frozen=True)
class ExportResult:
    record_count: int
    dim: int
    skipped_ids: tuple[str, ...]
    manifest_path: str


def _read_corpus(path: Path) -> list[tuple[str, str]]:
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ExportError(f"cannot read corpus {path}: {e}") from e
    records: list[tuple[str, str]] = []
    seen: set[str] = set()
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ExportError(f"{path}:{lineno}: malformed JSON: {e}") from e
        oid = rec.get("id")
        if not isinstance(oid, str) or not oid:
            raise ExportError(f"{path}:{lineno}: missing or empty 'id'")
        if oid in seen:
            raise ExportError(f"{path}:{lineno}: duplicate id {oid!r}")
        seen.add(oid)
        records.append((oid, rec))
    return records


def _load_encoder(job: ExportJob):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(job.encoder, revision=job.revision)
        model = AutoModel.from_pretrained(job.encoder, revision=job.revision)
    except Exception as e:
        raise ExportError(f"cannot load encoder {job.encoder!r} (revision {job.revision!r}): {e}") from e
    model.eval()
    model.to(job.device)
    return tokenizer, model


def _tokenizer_hash(tokenizer) -> str:
    vocab = tokenizer.get_vocab()
    blob = json.dumps(sorted(vocab.items()), separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def export_embeddings(job: ExportJob) -> ExportResult:
    """Run the frozen encoder over every corpus object and write the store.

    Tokenization failures on individual records skip the record and
    report its id in the manifest; corpus- or encoder-level failures
    raise :class:`ExportError`.
    """
    corpus_path = Path(job.corpus)
    records = _read_corpus(corpus_path)
    tokenizer, model = _load_encoder(job)
    dim = int(model.config.hidden_size)

    skipped: list[str] = []
    prepared: list[tuple[str, str]] = []
    for oid, rec in records:
        title, description = rec.get("title", ""), rec.get("description", "")
        if not isinstance(title, str) or not isinstance(description, str):
            skipped.append(oid)
            continue
        prepared.append((oid, prepare_text(title, description)))

    out_path = Path(job.out)
    count = 0
    with StoreWriter(out_path, dim) as writer:
        for start in range(0, len(prepared), job.batch_size):
            batch = prepared[start : start + job.batch_size]
            ids: list[str] = []
            texts: list[str] = []
            for oid, text in batch:
                try:
                    tokenizer(text, truncation=True, max_length=job.max_seq_len)
                except Exception:
                    skipped.append(oid)
                    continue
                ids.append(oid)
                texts.append(text)
            if not ids:
                continue
            encoded = tokenizer(
                texts,
                padding=True,
                truncation=True,
                max_length=job.max_seq_len,
                return_tensors="pt",
            ).to(job.device)
            with torch.no_grad():
                hidden = model(**encoded).last_hidden_state  # (B, T, dim)
            mask = encoded["attention_mask"]
            for i, oid in enumerate(ids):
                valid_len = int(mask[i].sum().item())
                values = hidden[i, :valid_len].cpu().numpy().astype(np.float32)
                writer.write(oid, values)
                count += 1

    manifest_path = out_path.with_name(out_path.name + ".manifest.json")
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "encoder": job.encoder,
        "revision": job.revision,
        "dim": dim,
        "max_seq_len": job.max_seq_len,
        "corpus_sha256": hashlib.sha256(corpus_path.read_bytes()).hexdigest(),
        "tokenizer_hash": _tokenizer_hash(tokenizer),
        "record_count": count,
        "skipped_ids": sorted(skipped),
    }
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )
    return ExportResult(
        record_count=count, dim=dim, skipped_ids=tuple(sorted(skipped)), manifest_path=str(manifest_path)
    )
