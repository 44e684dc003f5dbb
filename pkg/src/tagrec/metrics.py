"""Recall@K / Precision@K / F1@K: per-object formulas, macro-averaged
aggregates, full evaluation runs, and repeated-run summaries.

Per-object recall divides hits by K when the object carries more than K
true tags and by the true-tag count otherwise (equivalently: by
min(K, number of true tags)). Precision supports two denominators:
``strict`` divides by K no matter how many tags were actually
recommended; ``effective`` divides by the recommended count (0 when
nothing was recommended). The aggregate F1 is the mean of per-object F1
values, which is NOT the harmonic mean of aggregate precision and
recall.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Collection, Literal, Sequence

from .corpus import TagVocabulary
from .embedding import EmbeddingMatrix
from .errors import DataError

Mode = Literal["strict", "effective"]
MODES = ("strict", "effective")

REPORT_FORMAT = "tagrec-report"
REPORT_VERSION = 1


def _as_set(recommended) -> frozenset:
    """Accept a RecommendationSet or any collection of tag identifiers."""
    tag_set = getattr(recommended, "tag_set", None)
    if callable(tag_set):
        return tag_set()
    return frozenset(recommended)


def recall_at_k_single(recommended, true_tags: Collection, k: int) -> float:
    """Hits divided by K if the object has more than K true tags, else by
    the true-tag count."""
    true = frozenset(true_tags)
    if not true:
        raise DataError("recall undefined for an object with no true tags")
    if k < 1:
        raise DataError(f"K must be >= 1, got {k}")
    hits = len(_as_set(recommended) & true)
    return hits / min(k, len(true))


def precision_at_k_single(recommended, true_tags: Collection, k: int, mode: Mode = "strict") -> float:
    """Hits divided by K (strict) or by the recommended count (effective;
    0 when nothing was recommended)."""
    true = frozenset(true_tags)
    if not true:
        raise DataError("precision undefined for an object with no true tags")
    if k < 1:
        raise DataError(f"K must be >= 1, got {k}")
    if mode not in MODES:
        raise DataError(f"unknown precision mode {mode!r}")
    rec = _as_set(recommended)
    hits = len(rec & true)
    if mode == "strict":
        return hits / k
    return hits / len(rec) if rec else 0.0


def f1_at_k_single(precision: float, recall: float) -> float:
    """Harmonic mean of per-object precision and recall; 0 when both are 0."""
    if not 0.0 <= precision <= 1.0 or not 0.0 <= recall <= 1.0:
        raise DataError(f"precision/recall must lie in [0, 1]: {precision}, {recall}")
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def aggregate(per_object_values: Sequence[float], test_set_size: int) -> float:
    """Arithmetic mean over the test set, one value per object."""
    if test_set_size < 1:
        raise DataError("cannot aggregate over an empty test set")
    if len(per_object_values) != test_set_size:
        raise DataError(f"{len(per_object_values)} values for {test_set_size} test objects")
    return sum(per_object_values) / test_set_size


@dataclass(frozen=True)
class ObjectMetrics:
    object_id: str
    recall: float
    precision: float
    f1: float


@dataclass(frozen=True)
class RunSpread:
    """Across-run mean and population standard deviation per aggregate."""

    count: int
    mean: dict[str, float]
    stddev: dict[str, float]


@dataclass(frozen=True)
class MetricsReport:
    k: int
    mode: str
    recall: float
    precision: float
    f1: float
    per_object: tuple[ObjectMetrics, ...] = ()
    runs: RunSpread | None = None

    def to_json_dict(self) -> dict:
        doc = {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "k": self.k,
            "mode": self.mode,
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "per_object": [
                {"id": m.object_id, "recall": m.recall, "precision": m.precision, "f1": m.f1}
                for m in self.per_object
            ],
        }
        if self.runs is not None:
            doc["runs"] = {"count": self.runs.count, "mean": self.runs.mean, "stddev": self.runs.stddev}
        return doc


def evaluate_recommendations(
    recommended_by_id: dict[str, Collection],
    true_by_id: dict[str, Collection],
    k: int,
    mode: Mode,
) -> MetricsReport:
    """Score already-made recommendations against true tag sets.

    Every id in ``true_by_id`` is one test object; missing entries in
    ``recommended_by_id`` count as empty recommendations.
    """
    if not true_by_id:
        raise DataError("empty test set")
    per_object = []
    for oid, true_tags in true_by_id.items():
        rec = recommended_by_id.get(oid, frozenset())
        r = recall_at_k_single(rec, true_tags, k)
        p = precision_at_k_single(rec, true_tags, k, mode=mode)
        per_object.append(ObjectMetrics(object_id=oid, recall=r, precision=p, f1=f1_at_k_single(p, r)))
    n = len(per_object)
    return MetricsReport(
        k=k,
        mode=mode,
        recall=aggregate([m.recall for m in per_object], n),
        precision=aggregate([m.precision for m in per_object], n),
        f1=aggregate([m.f1 for m in per_object], n),
        per_object=tuple(per_object),
    )


def evaluate_run(
    model,
    test_items: Sequence[tuple[str, EmbeddingMatrix, frozenset[str]]],
    vocab: TagVocabulary,
    tau: float,
    k: int,
    mode: Mode = "effective",
) -> MetricsReport:
    """Full evaluation: score, threshold-gate with top-K truncation, then
    per-object metrics and their macro-averages.

    ``test_items`` holds (object id, embedding matrix, true tags) per
    test object; ids must be unique and every true-tag set non-empty.
    """
    from . import head as head_mod
    from . import recommend as recommend_mod

    if not test_items:
        raise DataError("empty test set")
    if model.config.num_tags != len(vocab):
        raise DataError(f"model has {model.config.num_tags} tags but vocabulary has {len(vocab)}")
    recommended: dict[str, Collection] = {}
    true_by_id: dict[str, Collection] = {}
    for oid, x, true_tags in test_items:
        if oid in true_by_id:
            raise DataError(f"duplicate test object id {oid!r}")
        scores = head_mod.forward(model, x)
        recommended[oid] = recommend_mod.apply_threshold_topk(scores, vocab, tau, k, object_id=oid)
        true_by_id[oid] = true_tags
    return evaluate_recommendations(recommended, true_by_id, k, mode)


def multi_run_report(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Mean and population standard deviation of the aggregates across
    repeated runs; all runs must share K and mode."""
    if not reports:
        raise DataError("no reports to summarize")
    k, mode = reports[0].k, reports[0].mode
    if any(r.k != k or r.mode != mode for r in reports):
        raise DataError("reports mix different K or precision modes")

    def stats(values: list[float]) -> tuple[float, float]:
        # fsum: identical runs must give exactly their value and stddev 0
        mean = math.fsum(values) / len(values)
        var = math.fsum((v - mean) ** 2 for v in values) / len(values)
        return mean, math.sqrt(var)

    recall_m, recall_s = stats([r.recall for r in reports])
    precision_m, precision_s = stats([r.precision for r in reports])
    f1_m, f1_s = stats([r.f1 for r in reports])
    spread = RunSpread(
        count=len(reports),
        mean={"recall": recall_m, "precision": precision_m, "f1": f1_m},
        stddev={"recall": recall_s, "precision": precision_s, "f1": f1_s},
    )
    return MetricsReport(
        k=k, mode=mode, recall=recall_m, precision=precision_m, f1=f1_m, per_object=(), runs=spread
    )


def render_table(reports: Sequence[MetricsReport], title: str = "") -> str:
    """Fixed-width UTF-8 table over one or more reports."""
    lines = []
    if title:
        lines.append(title)
    header = f"{'K':>4}  {'mode':<10} {'recall':>8} {'precision':>10} {'f1':>8} {'runs':>5}"
    lines.append(header)
    lines.append("-" * len(header))
    for r in reports:
        runs = r.runs.count if r.runs is not None else 1
        lines.append(
            f"{r.k:>4}  {r.mode:<10} {r.recall:>8.4f} {r.precision:>10.4f} {r.f1:>8.4f} {runs:>5}"
        )
    return "\n".join(lines)


def save_report(path, reports: Sequence[MetricsReport], config: dict | None = None) -> None:
    """Machine-readable JSON for one or more reports, with the producing
    configuration embedded."""
    doc = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "config": config or {},
        "reports": [r.to_json_dict() for r in reports],
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n")
