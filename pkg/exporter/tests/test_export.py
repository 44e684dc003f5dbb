"""Exporter conformance: the store parses with the consuming package's
reader, lengths match a standalone tokenizer run, and exports repeat
within tolerance."""

from __future__ import annotations

import json

import numpy as np
import pytest

from exporter.cli import main as cli_main
from exporter.export import ExportError, ExportJob, export_embeddings, prepare_text

# the consuming engine: used here only through its public reader, i.e. the
# shared file-format boundary
from tagrec.embedding import read_embedding_store, read_store_header

from conftest import make_toy_corpus


def _job(corpus, out, encoder, **kw):
    defaults = dict(revision="local", max_seq_len=48, batch_size=4, device="cpu")
    defaults.update(kw)
    return ExportJob(corpus=str(corpus), out=str(out), encoder=str(encoder), **defaults)


# --- text preparation ----------------------------------------------------------

def test_prepare_text_normalizes():
    assert prepare_text("Hello <b>World</b>", "x <code>rm -rf</code> y") == "hello world x y"


def test_prepare_text_idempotent():
    once = prepare_text("A <pre>code</pre>", "  B\t\nC  ")
    assert prepare_text(once, "") == once


# --- export conformance ----------------------------------------------------------

def test_export_toy_corpus_conformance(tiny_encoder_dir, toy_corpus_path, tmp_path):
    """The 20-object acceptance check: ids, dim, and per-object valid_len
    all verified against the manifest and a standalone tokenizer run."""
    from transformers import AutoTokenizer

    out = tmp_path / "toy.tgbe"
    result = export_embeddings(_job(toy_corpus_path, out, tiny_encoder_dir))
    assert result.record_count == 20
    assert result.skipped_ids == ()

    manifest = json.loads((tmp_path / "toy.tgbe.manifest.json").read_text())
    assert manifest["dim"] == result.dim
    assert manifest["record_count"] == 20
    assert manifest["skipped_ids"] == []

    version, dim, count = read_store_header(out)
    assert (version, dim, count) == (1, manifest["dim"], 20)

    records = list(read_embedding_store(out))
    corpus = make_toy_corpus()
    assert [m.object_id for m in records] == [r["id"] for r in corpus]

    tokenizer = AutoTokenizer.from_pretrained(tiny_encoder_dir)
    for m, rec in zip(records, corpus):
        text = prepare_text(rec["title"], rec["description"])
        expected_len = len(tokenizer(text, truncation=True, max_length=48)["input_ids"])
        assert m.valid_len == expected_len
        assert m.rows == expected_len  # padding is never written
        assert m.cols == manifest["dim"]
        assert np.all(np.isfinite(m.values))


def test_repeat_export_matches_within_tolerance(tiny_encoder_dir, toy_corpus_path, tmp_path):
    a = tmp_path / "a.tgbe"
    b = tmp_path / "b.tgbe"
    export_embeddings(_job(toy_corpus_path, a, tiny_encoder_dir))
    export_embeddings(_job(toy_corpus_path, b, tiny_encoder_dir))
    rec_a = list(read_embedding_store(a))
    rec_b = list(read_embedding_store(b))
    assert len(rec_a) == len(rec_b)
    for ma, mb in zip(rec_a, rec_b):
        assert ma.object_id == mb.object_id
        assert ma.valid_len == mb.valid_len
        assert ma.values.shape == mb.values.shape
        np.testing.assert_allclose(ma.values, mb.values, atol=1e-5)


def test_export_empty_corpus(tiny_encoder_dir, tmp_path):
    corpus = tmp_path / "empty.jsonl"
    corpus.write_text("", encoding="utf-8")
    out = tmp_path / "empty.tgbe"
    result = export_embeddings(_job(corpus, out, tiny_encoder_dir))
    assert result.record_count == 0
    assert out.stat().st_size == 20  # header only
    assert list(read_embedding_store(out)) == []


def test_one_word_object_subword_count(tiny_encoder_dir, tmp_path):
    from transformers import AutoTokenizer

    corpus = tmp_path / "one.jsonl"
    corpus.write_text(json.dumps({"id": "w", "title": "", "description": "installing", "tags": []}) + "\n")
    out = tmp_path / "one.tgbe"
    export_embeddings(_job(corpus, out, tiny_encoder_dir))
    (record,) = read_embedding_store(out)
    tokenizer = AutoTokenizer.from_pretrained(tiny_encoder_dir)
    subwords = tokenizer.tokenize("installing")
    assert subwords == ["install", "##ing"]
    assert record.valid_len == len(subwords) + 2  # plus [CLS] and [SEP]


def test_truncation_caps_valid_len(tiny_encoder_dir, tmp_path):
    corpus = tmp_path / "long.jsonl"
    text = " ".join(["linux"] * 100)
    corpus.write_text(json.dumps({"id": "l", "title": "", "description": text, "tags": []}) + "\n")
    out = tmp_path / "long.tgbe"
    export_embeddings(_job(corpus, out, tiny_encoder_dir, max_seq_len=16))
    (record,) = read_embedding_store(out)
    assert record.valid_len == 16


def test_bad_record_skipped_and_reported(tiny_encoder_dir, tmp_path):
    corpus = tmp_path / "mixed.jsonl"
    lines = [
        json.dumps({"id": "good", "title": "linux", "description": "python", "tags": []}),
        json.dumps({"id": "bad", "title": 7, "description": "python", "tags": []}),
    ]
    corpus.write_text("\n".join(lines) + "\n")
    out = tmp_path / "mixed.tgbe"
    result = export_embeddings(_job(corpus, out, tiny_encoder_dir))
    assert result.record_count == 1
    assert result.skipped_ids == ("bad",)
    manifest = json.loads((tmp_path / "mixed.tgbe.manifest.json").read_text())
    assert manifest["skipped_ids"] == ["bad"]
    assert [m.object_id for m in read_embedding_store(out)] == ["good"]


def test_manifest_pins_encoder_and_corpus(tiny_encoder_dir, toy_corpus_path, tmp_path):
    import hashlib

    out = tmp_path / "m.tgbe"
    export_embeddings(_job(toy_corpus_path, out, tiny_encoder_dir))
    manifest = json.loads((tmp_path / "m.tgbe.manifest.json").read_text())
    assert manifest["format"] == "tagrec-export-manifest"
    assert manifest["encoder"] == str(tiny_encoder_dir)
    assert manifest["revision"] == "local"
    assert manifest["max_seq_len"] == 48
    assert manifest["corpus_sha256"] == hashlib.sha256(toy_corpus_path.read_bytes()).hexdigest()
    assert len(manifest["tokenizer_hash"]) == 64


def test_duplicate_ids_rejected(tiny_encoder_dir, tmp_path):
    corpus = tmp_path / "dup.jsonl"
    line = json.dumps({"id": "x", "title": "", "description": "linux", "tags": []})
    corpus.write_text(line + "\n" + line + "\n")
    with pytest.raises(ExportError, match="duplicate"):
        export_embeddings(_job(corpus, tmp_path / "d.tgbe", tiny_encoder_dir))


def test_missing_encoder_raises(toy_corpus_path, tmp_path):
    with pytest.raises(ExportError, match="cannot load encoder"):
        export_embeddings(_job(toy_corpus_path, tmp_path / "x.tgbe", tmp_path / "no-encoder"))


def test_cli_roundtrip(tiny_encoder_dir, toy_corpus_path, tmp_path, capsys):
    out = tmp_path / "cli.tgbe"
    rc = cli_main([
        "--corpus", str(toy_corpus_path), "--out", str(out),
        "--encoder", str(tiny_encoder_dir), "--revision", "local",
        "--max-seq-len", "48", "--batch-size", "4",
    ])
    assert rc == 0
    assert "20 records" in capsys.readouterr().out
    assert out.exists() and (tmp_path / "cli.tgbe.manifest.json").exists()


def test_cli_missing_corpus_exit_2(tiny_encoder_dir, tmp_path, capsys):
    rc = cli_main([
        "--corpus", str(tmp_path / "absent.jsonl"), "--out", str(tmp_path / "x.tgbe"),
        "--encoder", str(tiny_encoder_dir),
    ])
    assert rc == 2
    assert "absent.jsonl" in capsys.readouterr().err
