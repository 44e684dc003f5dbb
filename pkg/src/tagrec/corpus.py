"""Corpus ingestion: JSON Lines parsing, text normalization, the tag
vocabulary, binary label vectors, seeded train/test splits, and the
dataset bundle artifact.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, FormatError

BUNDLE_FORMAT = "tagrec-bundle"
BUNDLE_VERSION = 1

_CODE_BLOCK_RE = re.compile(r"<(pre|code)\b[^>]*>.*?</\1\s*>", re.DOTALL)
_FENCE_RE = re.compile(r"```.*?```", re.DOTALL)
_HTML_TAG_RE = re.compile(r"<[^<>]*>")
# C0/C1 controls minus \t \n \r, which the whitespace collapse handles.
_CONTROL_RE = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f-\x9f]")
_WS_RE = re.compile(r"\s+")


def preprocess_text(raw: str) -> str:
    """Normalize free text: lowercase, drop HTML code blocks and tags,
    remove control characters, collapse whitespace.

    Idempotent: applying it twice equals applying it once.
    """
    text = raw.lower()
    text = _CONTROL_RE.sub(" ", text)
    # Stripping can expose new tag-shaped spans ("<<b>>" -> "<>"), so
    # iterate to a fixpoint.
    while True:
        stripped = _CODE_BLOCK_RE.sub(" ", text)
        stripped = _FENCE_RE.sub(" ", stripped)
        stripped = _HTML_TAG_RE.sub(" ", stripped)
        if stripped == text:
            break
        text = stripped
    return _WS_RE.sub(" ", text).strip()


def normalize_tag(tag: str) -> str:
    """Tags are lowercased and trimmed but otherwise kept verbatim."""
    return tag.strip().lower()


@dataclass(frozen=True)
class Object:
    """One corpus item with its (filtered) set of true tags."""

    id: str
    title: str
    description: str
    tags: frozenset[str]

    @property
    def text(self) -> str:
        """The text fed downstream: normalized title, then description."""
        return preprocess_text(self.title + " " + self.description)


@dataclass(frozen=True)
class TagVocabulary:
    """Dense tag<->index mapping, ordered by descending corpus frequency
    with lexicographic tie-breaks."""

    tags: tuple[str, ...]
    frequency: dict[str, int]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.tags)) != len(self.tags):
            raise DataError("vocabulary tags are not distinct")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tags)})

    def __len__(self) -> int:
        return len(self.tags)

    @classmethod
    def from_counts(cls, counts: dict[str, int], min_tag_freq: int) -> "TagVocabulary":
        kept = [(t, c) for t, c in counts.items() if c >= min_tag_freq]
        kept.sort(key=lambda tc: (-tc[1], tc[0]))
        return cls(tags=tuple(t for t, _ in kept), frequency=dict(kept))


@dataclass(frozen=True)
class IngestReport:
    """Counts from one ingestion pass."""

    raw_objects: int
    retained_objects: int
    dropped_objects: int
    raw_tags: int
    vocab_size: int
    min_tag_freq: int

    def summary(self) -> str:
        return (
            f"objects: {self.raw_objects} raw, {self.retained_objects} retained, "
            f"{self.dropped_objects} dropped (no surviving tag); "
            f"tags: {self.raw_tags} raw, N={self.vocab_size} "
            f"(min_tag_freq={self.min_tag_freq})"
        )


def _parse_record(line: str, lineno: int, path) -> tuple[str, str, str, frozenset[str]]:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise DataError(f"{path}:{lineno}: malformed JSON: {e}") from e
    if not isinstance(rec, dict):
        raise DataError(f"{path}:{lineno}: expected a JSON object")
    oid = rec.get("id")
    if not isinstance(oid, str) or not oid:
        raise DataError(f"{path}:{lineno}: missing or empty 'id'")
    title = rec.get("title", "")
    description = rec.get("description", "")
    if not isinstance(title, str) or not isinstance(description, str):
        raise DataError(f"{path}:{lineno}: 'title'/'description' must be strings")
    tags_raw = rec.get("tags")
    if not isinstance(tags_raw, list) or not all(isinstance(t, str) for t in tags_raw):
        raise DataError(f"{path}:{lineno}: 'tags' must be a list of strings")
    tags = frozenset(t for t in (normalize_tag(t) for t in tags_raw) if t)
    return oid, title, description, tags


def _ingest(
    parsed: list[tuple[str, str, str, frozenset[str]]], min_tag_freq: int
) -> tuple[list[Object], TagVocabulary, IngestReport]:
    counts: Counter[str] = Counter()
    for _, _, _, tags in parsed:
        counts.update(tags)
    vocab = TagVocabulary.from_counts(counts, min_tag_freq)
    kept_tags = set(vocab.tags)
    objects: list[Object] = []
    dropped = 0
    for oid, title, description, tags in parsed:
        surviving = tags & kept_tags
        if surviving:
            objects.append(Object(id=oid, title=title, description=description, tags=frozenset(surviving)))
        else:
            dropped += 1
    report = IngestReport(
        raw_objects=len(parsed),
        retained_objects=len(objects),
        dropped_objects=dropped,
        raw_tags=len(counts),
        vocab_size=len(vocab),
        min_tag_freq=min_tag_freq,
    )
    return objects, vocab, report


def load_corpus(
    path, min_tag_freq: int = 50
) -> tuple[list[Object], TagVocabulary, IngestReport]:
    """Read a JSON Lines corpus and build the tag vocabulary.

    Tags occurring in fewer than ``min_tag_freq`` objects are discarded;
    objects left with no surviving tag are dropped (and counted in the
    report). Raises :class:`DataError` on unreadable files, malformed
    lines (with line number), or duplicate ids.
    """
    if min_tag_freq < 1:
        raise DataError(f"min_tag_freq must be >= 1, got {min_tag_freq}")
    path = Path(path)
    try:
        raw_text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read corpus file {path}: {e}") from e

    parsed: list[tuple[str, str, str, frozenset[str]]] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(raw_text.splitlines(), start=1):
        if not line.strip():
            continue
        oid, title, description, tags = _parse_record(line, lineno, path)
        if oid in seen_ids:
            raise DataError(f"{path}:{lineno}: duplicate id {oid!r}")
        seen_ids.add(oid)
        parsed.append((oid, title, description, tags))
    return _ingest(parsed, min_tag_freq)


def ingest_records(
    records: Iterable[dict], min_tag_freq: int = 50
) -> tuple[list[Object], TagVocabulary, IngestReport]:
    """In-memory counterpart of :func:`load_corpus` over already-parsed
    ``{"id", "title", "description", "tags"}`` records."""
    if min_tag_freq < 1:
        raise DataError(f"min_tag_freq must be >= 1, got {min_tag_freq}")
    parsed: list[tuple[str, str, str, frozenset[str]]] = []
    seen_ids: set[str] = set()
    for i, rec in enumerate(records):
        oid, title, description, tags = _parse_record(json.dumps(rec), i, "<records>")
        if oid in seen_ids:
            raise DataError(f"record {i}: duplicate id {oid!r}")
        seen_ids.add(oid)
        parsed.append((oid, title, description, tags))
    return _ingest(parsed, min_tag_freq)


def encode_labels(obj: Object, vocab: TagVocabulary) -> np.ndarray:
    """Binary label vector: bit i is 1 iff ``vocab.tags[i]`` is on the object.

    Tags outside the vocabulary are ignored.
    """
    if len(vocab) == 0:
        raise DataError("cannot encode labels against an empty vocabulary")
    bits = np.zeros(len(vocab), dtype=np.uint8)
    for tag in obj.tags:
        i = vocab.index.get(tag)
        if i is not None:
            bits[i] = 1
    return bits


def decode_labels(bits: np.ndarray, vocab: TagVocabulary) -> frozenset[str]:
    """Inverse of :func:`encode_labels`."""
    if len(bits) != len(vocab):
        raise DataError(f"label vector length {len(bits)} != vocabulary size {len(vocab)}")
    return frozenset(vocab.tags[i] for i in np.flatnonzero(bits))


@dataclass(frozen=True)
class DatasetSplit:
    """Disjoint train/test id partition, reproducible from the seed."""

    train: tuple[str, ...]
    test: tuple[str, ...]
    seed: int


def split_dataset(objects: Sequence[Object], test_size: int, seed: int) -> DatasetSplit:
    """Sample ``test_size`` test objects uniformly without replacement.

    Deterministic for fixed (objects, test_size, seed); both halves keep
    corpus order.
    """
    n = len(objects)
    if test_size < 1:
        raise DataError(f"test_size must be >= 1, got {test_size}")
    if test_size >= n:
        raise DataError(f"test_size {test_size} must be smaller than the corpus ({n} objects)")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=test_size, replace=False))
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    ids = [o.id for o in objects]
    test = tuple(ids[i] for i in range(n) if mask[i])
    train = tuple(ids[i] for i in range(n) if not mask[i])
    return DatasetSplit(train=train, test=test, seed=seed)


@dataclass(frozen=True)
class DatasetBundle:
    """Everything ingestion produces: vocabulary, labeled objects, split,
    and the configuration that made them."""

    vocab: TagVocabulary
    objects: tuple[Object, ...]
    split: DatasetSplit
    config: dict
    report: IngestReport

    def objects_by_id(self) -> dict[str, Object]:
        return {o.id: o for o in self.objects}


def save_bundle(bundle: DatasetBundle, path) -> None:
    """Write the bundle as canonical JSON (sorted keys, no whitespace),
    so identical inputs produce byte-identical files."""
    doc = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "config": bundle.config,
        "report": {
            "raw_objects": bundle.report.raw_objects,
            "retained_objects": bundle.report.retained_objects,
            "dropped_objects": bundle.report.dropped_objects,
            "raw_tags": bundle.report.raw_tags,
            "vocab_size": bundle.report.vocab_size,
            "min_tag_freq": bundle.report.min_tag_freq,
        },
        "vocabulary": {
            "tags": list(bundle.vocab.tags),
            "counts": [bundle.vocab.frequency[t] for t in bundle.vocab.tags],
        },
        "objects": [
            {
                "id": o.id,
                "title": o.title,
                "description": o.description,
                "tags": sorted(bundle.vocab.index[t] for t in o.tags),
            }
            for o in bundle.objects
        ],
        "split": {
            "seed": bundle.split.seed,
            "train": list(bundle.split.train),
            "test": list(bundle.split.test),
        },
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_bundle(path) -> DatasetBundle:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DataError(f"cannot read bundle {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not valid JSON: {e}") from e
    if doc.get("format") != BUNDLE_FORMAT:
        raise FormatError(f"{path}: not a {BUNDLE_FORMAT} file")
    if doc.get("version") != BUNDLE_VERSION:
        raise FormatError(f"{path}: unsupported bundle version {doc.get('version')!r}")
    voc = doc["vocabulary"]
    vocab = TagVocabulary(
        tags=tuple(voc["tags"]),
        frequency=dict(zip(voc["tags"], voc["counts"])),
    )
    objects = tuple(
        Object(
            id=rec["id"],
            title=rec.get("title", ""),
            description=rec.get("description", ""),
            tags=frozenset(vocab.tags[i] for i in rec["tags"]),
        )
        for rec in doc["objects"]
    )
    rep = doc["report"]
    report = IngestReport(
        raw_objects=rep["raw_objects"],
        retained_objects=rep["retained_objects"],
        dropped_objects=rep["dropped_objects"],
        raw_tags=rep["raw_tags"],
        vocab_size=rep["vocab_size"],
        min_tag_freq=rep["min_tag_freq"],
    )
    sp = doc["split"]
    split = DatasetSplit(train=tuple(sp["train"]), test=tuple(sp["test"]), seed=sp["seed"])
    return DatasetBundle(vocab=vocab, objects=objects, split=split, config=doc.get("config", {}), report=report)
