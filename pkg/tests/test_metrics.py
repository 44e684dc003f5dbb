"""Metric formulas against brute-force oracles, aggregation semantics,
evaluation runs, and multi-run summaries."""

from __future__ import annotations

import itertools
import json

import numpy as np
import pytest

import oracles
from tagrec.corpus import TagVocabulary
from tagrec.errors import DataError
from tagrec.metrics import (
    MetricsReport,
    aggregate,
    evaluate_recommendations,
    evaluate_run,
    f1_at_k_single,
    multi_run_report,
    precision_at_k_single,
    recall_at_k_single,
    render_table,
    save_report,
)
from tagrec.recommend import apply_threshold_topk


def _random_case(rng):
    universe = [f"x{i}" for i in range(20)]
    n_true = int(rng.integers(1, 16))
    n_rec = int(rng.integers(0, 13))
    true = set(rng.choice(universe, size=n_true, replace=False).tolist())
    rec = set(rng.choice(universe, size=n_rec, replace=False).tolist())
    k = int(rng.integers(max(1, n_rec), 13))
    return rec, true, k


# --- per-object formulas -----------------------------------------------------

def test_recall_upper_branch():
    true = {f"t{i}" for i in range(12)}
    rec = {f"t{i}" for i in range(6)}
    assert recall_at_k_single(rec, true, k=10) == 0.6


def test_recall_lower_branch():
    assert recall_at_k_single({"a", "b"}, {"a", "b"}, k=10) == 1.0


def test_recall_rejects_empty_true_tags():
    with pytest.raises(DataError):
        recall_at_k_single({"a"}, set(), k=10)


def test_recall_matches_oracle_random():
    rng = np.random.default_rng(100)
    for _ in range(10_000):
        rec, true, k = _random_case(rng)
        got = recall_at_k_single(rec, true, k)
        assert got == oracles.recall_piecewise(rec, true, k)
        assert got == oracles.recall_min_denominator(rec, true, k)


def test_precision_both_modes():
    rec, true = {"a", "b", "c"}, {"a", "b"}
    assert precision_at_k_single(rec, true, k=10, mode="strict") == 0.2
    assert precision_at_k_single(rec, true, k=10, mode="effective") == 2 / 3


def test_precision_empty_recommendation_is_zero():
    assert precision_at_k_single(set(), {"a"}, k=10, mode="strict") == 0.0
    assert precision_at_k_single(set(), {"a"}, k=10, mode="effective") == 0.0


def test_precision_matches_oracle_random():
    rng = np.random.default_rng(101)
    for _ in range(10_000):
        rec, true, k = _random_case(rng)
        assert precision_at_k_single(rec, true, k, "strict") == oracles.precision_strict(rec, true, k)
        assert precision_at_k_single(rec, true, k, "effective") == oracles.precision_effective(rec, true)


def test_f1_analytic():
    assert f1_at_k_single(0.2, 1.0) == 2.0 * 0.2 * 1.0 / (0.2 + 1.0)
    assert f1_at_k_single(0.2, 1.0) == pytest.approx(1 / 3, rel=1e-15)


def test_f1_zero_rule():
    assert f1_at_k_single(0.0, 0.0) == 0.0


def test_f1_fixed_point():
    rng = np.random.default_rng(102)
    for _ in range(100):
        x = float(rng.uniform(0, 1))
        assert f1_at_k_single(x, x) == pytest.approx(x, rel=1e-15)


def test_recall_piecewise_equals_min_denominator_exhaustive():
    # |true| in 1..15, K in 1..12, every feasible |rec| and intersection size
    for n_true, k in itertools.product(range(1, 16), range(1, 13)):
        true = {f"t{i}" for i in range(n_true)}
        for n_rec in range(0, k + 1):
            for hits in range(0, min(n_true, n_rec) + 1):
                rec = {f"t{i}" for i in range(hits)} | {f"r{j}" for j in range(n_rec - hits)}
                a = recall_at_k_single(rec, true, k)
                b = oracles.recall_piecewise(rec, true, k)
                c = oracles.recall_min_denominator(rec, true, k)
                assert a == b == c


def test_metrics_order_independent():
    # metrics see the recommendation as a set: permuting item order changes nothing
    rec_sorted = ["a", "b", "c"]
    true = {"b", "c", "z"}
    for perm in itertools.permutations(rec_sorted):
        assert recall_at_k_single(set(perm), true, 5) == recall_at_k_single(set(rec_sorted), true, 5)
        assert precision_at_k_single(set(perm), true, 5, "effective") == pytest.approx(2 / 3)


# --- aggregation -------------------------------------------------------------

def test_aggregate_mean():
    assert aggregate([0.5, 1.0], 2) == 0.75


def test_aggregate_rejects_empty_or_mismatched():
    with pytest.raises(DataError):
        aggregate([], 0)
    with pytest.raises(DataError):
        aggregate([0.5], 2)


def test_aggregate_f1_is_mean_of_f1_not_harmonic_of_means():
    # object 1: precision 1, recall 0.5; object 2: precision 0.5, recall 1
    f1_each = [f1_at_k_single(1.0, 0.5), f1_at_k_single(0.5, 1.0)]
    mean_of_f1 = aggregate(f1_each, 2)
    assert mean_of_f1 == 2.0 * 1.0 * 0.5 / 1.5  # = 2/3, bit-exact
    harmonic_of_means = f1_at_k_single(0.75, 0.75)
    assert harmonic_of_means == 0.75
    assert mean_of_f1 != harmonic_of_means


def test_aggregate_matches_mean_oracle_random():
    rng = np.random.default_rng(103)
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        values = rng.uniform(0, 1, size=n).tolist()
        assert aggregate(values, n) == oracles.mean(values)


# --- evaluate ----------------------------------------------------------------

def _report_from_scores(score_map, true_map, vocab, tau, k, mode):
    recs = {
        oid: apply_threshold_topk(np.asarray(scores, dtype=np.float64), vocab, tau, k, object_id=oid)
        for oid, scores in score_map.items()
    }
    return evaluate_recommendations(recs, true_map, k, mode)


def test_perfect_predictor_recall_one():
    vocab = TagVocabulary(tags=("a", "b", "c"), frequency={"a": 3, "b": 2, "c": 1})
    true_map = {"o1": {"a"}, "o2": {"b", "c"}, "o3": {"a", "c"}}
    score_map = {
        oid: [1.0 if t in tags else 0.0 for t in vocab.tags] for oid, tags in true_map.items()
    }
    report = _report_from_scores(score_map, true_map, vocab, tau=0.5, k=10, mode="effective")
    assert report.recall == 1.0
    assert report.precision == 1.0
    assert all(m.recall == 1.0 for m in report.per_object)


def test_constant_predictor_below_threshold_all_zero():
    vocab = TagVocabulary(tags=("a", "b"), frequency={"a": 2, "b": 1})
    true_map = {"o1": {"a"}, "o2": {"b"}}
    score_map = {oid: [0.5, 0.5] for oid in true_map}
    for mode in ("strict", "effective"):
        report = _report_from_scores(score_map, true_map, vocab, tau=0.92, k=10, mode=mode)
        assert report.recall == report.precision == report.f1 == 0.0


def test_evaluate_run_end_to_end(overfit_result):
    model, _, setup = overfit_result
    report = evaluate_run(model, setup.items, setup.vocab, tau=0.5, k=5, mode="effective")
    assert len(report.per_object) == len(setup.items)
    assert 0.0 <= report.recall <= 1.0
    assert report.f1 >= 0.95  # the overfit model nails its training set
    # aggregates equal the mean of the per-object section
    assert report.recall == aggregate([m.recall for m in report.per_object], len(report.per_object))
    assert report.f1 == aggregate([m.f1 for m in report.per_object], len(report.per_object))


def test_evaluate_run_rejects_vocab_mismatch(overfit_result):
    model, _, setup = overfit_result
    small_vocab = TagVocabulary(tags=("a",), frequency={"a": 1})
    with pytest.raises(DataError):
        evaluate_run(model, setup.items, small_vocab, tau=0.5, k=5)


def test_evaluate_run_empty_test_set(overfit_result):
    model, _, setup = overfit_result
    with pytest.raises(DataError):
        evaluate_run(model, [], setup.vocab, tau=0.5, k=5)


def test_per_object_and_aggregate_bounds(overfit_result):
    model, _, setup = overfit_result
    for mode in ("strict", "effective"):
        report = evaluate_run(model, setup.items, setup.vocab, tau=0.9, k=5, mode=mode)
        for m in report.per_object:
            assert 0.0 <= m.recall <= 1.0
            assert 0.0 <= m.precision <= 1.0
            assert 0.0 <= m.f1 <= 1.0
        assert 0.0 <= report.recall <= 1.0
        assert 0.0 <= report.precision <= 1.0
        assert 0.0 <= report.f1 <= 1.0


# --- multi-run ---------------------------------------------------------------

def _report(recall, precision, f1, k=10, mode="strict"):
    return MetricsReport(k=k, mode=mode, recall=recall, precision=precision, f1=f1)


def test_multi_run_identical_reports():
    reports = [_report(0.6, 0.4, 0.48)] * 10
    summary = multi_run_report(reports)
    assert summary.recall == 0.6
    assert summary.runs.count == 10
    assert summary.runs.stddev == {"recall": 0.0, "precision": 0.0, "f1": 0.0}


def test_multi_run_mean():
    summary = multi_run_report([_report(0.4, 0.4, 0.4), _report(0.6, 0.6, 0.6)])
    assert summary.recall == 0.5
    assert summary.runs.mean["f1"] == 0.5


def test_multi_run_matches_spreadsheet_recomputation():
    rng = np.random.default_rng(104)
    reports = [_report(*rng.uniform(0, 1, size=3)) for _ in range(10)]
    summary = multi_run_report(reports)
    for key, getter in (("recall", lambda r: r.recall),
                        ("precision", lambda r: r.precision),
                        ("f1", lambda r: r.f1)):
        values = [getter(r) for r in reports]
        mean = sum(values) / len(values)
        stddev = (sum((v - mean) ** 2 for v in values) / len(values)) ** 0.5
        assert abs(summary.runs.mean[key] - mean) < 1e-12
        assert abs(summary.runs.stddev[key] - stddev) < 1e-12


def test_multi_run_rejects_mixed_k_or_mode():
    with pytest.raises(DataError):
        multi_run_report([_report(0.5, 0.5, 0.5, k=5), _report(0.5, 0.5, 0.5, k=10)])
    with pytest.raises(DataError):
        multi_run_report([_report(0.5, 0.5, 0.5, mode="strict"), _report(0.5, 0.5, 0.5, mode="effective")])


# --- report output -----------------------------------------------------------

def test_report_json_shape(tmp_path, overfit_result):
    model, _, setup = overfit_result
    report = evaluate_run(model, setup.items, setup.vocab, tau=0.5, k=5, mode="strict")
    path = tmp_path / "report.json"
    save_report(path, [report], config={"k": 5})
    doc = json.loads(path.read_text())
    assert doc["format"] == "tagrec-report"
    assert doc["config"] == {"k": 5}
    (entry,) = doc["reports"]
    assert set(entry) >= {"k", "mode", "recall", "precision", "f1", "per_object"}
    # totals equal recomputation from the per-object section
    per = entry["per_object"]
    assert entry["recall"] == sum(m["recall"] for m in per) / len(per)


def test_render_table_contains_rows(overfit_result):
    model, _, setup = overfit_result
    reports = [
        evaluate_run(model, setup.items, setup.vocab, tau=0.5, k=5, mode=m) for m in ("strict", "effective")
    ]
    table = render_table(reports, title="demo")
    assert "demo" in table
    assert "strict" in table and "effective" in table
