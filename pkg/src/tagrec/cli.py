"""Command-line pipeline: ingest -> train -> calibrate -> evaluate ->
recommend, with one JSON run configuration shared by every step.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import embedding as embedding_mod
from . import head as head_mod
from . import metrics as metrics_mod
from . import pipeline
from . import recommend as recommend_mod
from .config import RunConfig
from .errors import DataError, NumericError, TagrecError, UsageError

HISTORY_FORMAT = "tagrec-history"
CURVE_FORMAT = "tagrec-calibration"
META_FORMAT = "tagrec-recommendations-meta"
ARTIFACT_VERSION = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags override its values")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tagrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build the dataset bundle from a JSONL corpus")
    _add_common(p)
    p.add_argument("--corpus", help="JSON Lines corpus path")
    p.add_argument("--min-tag-freq", type=int, default=None)
    p.add_argument("--test-size", type=int, default=None)
    p.add_argument("--out", help="bundle output path")

    p = sub.add_parser("train", help="train the classification head")
    _add_common(p)
    p.add_argument("--data", help="dataset bundle path")
    p.add_argument("--emb", help="embedding store path")
    p.add_argument("--out", help="model output path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--val-fraction", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--filters", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--regions", default=None, help="comma-separated region sizes, e.g. 2,3,4")
    p.add_argument("--history", default=None, help="history JSON path (default: <out>.history.json)")

    p = sub.add_parser("calibrate", help="grid-search the recommendation threshold")
    _add_common(p)
    p.add_argument("--model", help="model file path")
    p.add_argument("--data", help="dataset bundle path")
    p.add_argument("--emb", help="embedding store path")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--grid", default=None, help="comma floats or start:stop:step")
    p.add_argument("--val-fraction", type=float, default=None)
    p.add_argument("--out", help="calibration curve JSON path")

    p = sub.add_parser("evaluate", help="evaluate on the test split")
    _add_common(p)
    p.add_argument("--model", help="model file path")
    p.add_argument("--data", help="dataset bundle path")
    p.add_argument("--emb", help="embedding store path")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--k-list", default=None, help="comma-separated K values for the K-sweep report")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--denominator", choices=["strict", "effective"], default=None)
    p.add_argument("--runs", type=int, default=1, help="retrain/evaluate this many seeded runs")
    p.add_argument("--epochs", type=int, default=None, help="training epochs for --runs > 1")
    p.add_argument("--out", help="report JSON path")

    p = sub.add_parser("recommend", help="write recommendations as JSON Lines")
    _add_common(p)
    p.add_argument("--model", help="model file path")
    p.add_argument("--data", help="dataset bundle path")
    p.add_argument("--emb", help="embedding store path")
    p.add_argument("--ids", default=None, help="comma-separated object ids (default: all test ids)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--out", help="recommendations JSONL path")
    return parser


def _config_from(args: argparse.Namespace, **overrides) -> RunConfig:
    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    return base.override(seed=args.seed, **overrides)


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"missing required value: pass {flag} or set it in --config")
    return value


def _parse_int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise UsageError(f"{flag}: expected comma-separated integers, got {text!r}") from e


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            values = []
            v = start
            while v <= stop + 1e-12:
                values.append(round(v, 10))
                v += step
            return tuple(values)
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as e:
        raise UsageError(f"--grid: expected floats, got {text!r}") from e


def _load_artifacts(cfg: RunConfig):
    bundle = corpus_mod.load_bundle(_require(cfg.bundle, "--data"))
    dim, store = embedding_mod.load_embedding_store(_require(cfg.store, "--emb"))
    return bundle, dim, store


def _train_head(cfg: RunConfig, bundle, dim, store, seed: int):
    """Shared by cmd_train and the multi-run evaluate path."""
    train_ids, val_ids = pipeline.carve_validation(bundle.split.train, cfg.val_fraction, seed)
    head_cfg = head_mod.HeadConfig(
        embed_dim=dim,
        num_tags=len(bundle.vocab),
        region_sizes=cfg.region_sizes,
        filters_per_region=cfg.filters_per_region,
        hidden_units=cfg.hidden_units,
        seed=seed,
    )
    min_tokens = head_cfg.min_tokens
    train_part = pipeline.assemble(bundle, store, train_ids, cfg.boundaries, cfg.max_seq_len, min_tokens)
    val_part = pipeline.assemble(bundle, store, val_ids, cfg.boundaries, cfg.max_seq_len, min_tokens)
    model = head_mod.init_model(head_cfg)
    params = head_mod.TrainParams(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        lr=cfg.lr,
        patience=cfg.patience,
        k=cfg.k,
        shuffle_seed=seed,
    )
    model, history = head_mod.train(model, train_part.train_pairs(), val_part.train_pairs(), params)
    skipped = train_part.skipped_short + val_part.skipped_short
    return model, history, skipped


def cmd_ingest(args) -> int:
    cfg = _config_from(
        args,
        corpus=args.corpus,
        min_tag_freq=args.min_tag_freq,
        test_size=args.test_size,
        bundle=args.out,
    )
    corpus_path = _require(cfg.corpus, "--corpus")
    out_path = _require(cfg.bundle, "--out")
    objects, vocab, report = corpus_mod.load_corpus(corpus_path, cfg.min_tag_freq)
    split = corpus_mod.split_dataset(objects, cfg.test_size, cfg.seed)
    bundle = corpus_mod.DatasetBundle(
        vocab=vocab, objects=tuple(objects), split=split, config=cfg.to_dict(), report=report
    )
    corpus_mod.save_bundle(bundle, out_path)
    print(report.summary())
    print(f"N = {len(vocab)} vocabulary tags")
    print(f"split: {len(split.train)} train / {len(split.test)} test (seed {cfg.seed})")
    print(f"bundle written to {out_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from(
        args,
        bundle=args.data,
        store=args.emb,
        model=args.out,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        patience=args.patience,
        val_fraction=args.val_fraction,
        k=args.k,
        filters_per_region=args.filters,
        hidden_units=args.hidden,
        region_sizes=_parse_int_list(args.regions, "--regions") if args.regions else None,
    )
    out_path = _require(cfg.model, "--out")
    bundle, dim, store = _load_artifacts(cfg)
    model, history, skipped = _train_head(cfg, bundle, dim, store, cfg.seed)
    head_mod.save_model(model, out_path)
    history_path = args.history or f"{out_path}.history.json"
    doc = {
        "format": HISTORY_FORMAT,
        "version": ARTIFACT_VERSION,
        "config": cfg.to_dict(),
        "skipped_short": list(skipped),
        "epochs": [
            {"epoch": h.epoch, "train_loss": h.train_loss, "val_f1": h.val_f1} for h in history
        ],
    }
    Path(history_path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )
    if skipped:
        print(f"skipped {len(skipped)} object(s) shorter than the largest region size")
    if history:
        best = max((h.val_f1 for h in history if h.val_f1 is not None), default=None)
        last = history[-1]
        print(f"trained {last.epoch} epoch(s); final train loss {last.train_loss:.6f}"
              + (f"; best val F1@{cfg.k} {best:.4f}" if best is not None else ""))
    else:
        print("0 epochs requested; saved the freshly initialized model")
    print(f"model written to {out_path}")
    print(f"history written to {history_path}")
    return 0


def cmd_calibrate(args) -> int:
    cfg = _config_from(
        args,
        model=args.model,
        bundle=args.data,
        store=args.emb,
        k=args.k,
        val_fraction=args.val_fraction,
        grid=_parse_grid(args.grid) if args.grid else None,
    )
    model = head_mod.load_model(_require(cfg.model, "--model"))
    bundle, dim, store = _load_artifacts(cfg)
    _, val_ids = pipeline.carve_validation(bundle.split.train, cfg.val_fraction, cfg.seed)
    if not val_ids:
        raise DataError("validation carve is empty; raise --val-fraction")
    part = pipeline.assemble(bundle, store, val_ids, cfg.boundaries, cfg.max_seq_len, model.config.min_tokens)
    best_tau, curve = recommend_mod.calibrate_threshold(
        model, part.calib_pairs(), bundle.vocab, cfg.k, cfg.grid
    )
    print(f"grid: {len(cfg.grid)} candidate thresholds in [{min(cfg.grid)}, {max(cfg.grid)}]")
    print(f"best tau = {best_tau} (validation F1@{cfg.k}, effective precision)")
    doc = {
        "format": CURVE_FORMAT,
        "version": ARTIFACT_VERSION,
        "config": cfg.to_dict(),
        "k": cfg.k,
        "best_tau": best_tau,
        "curve": [{"tau": t, "f1": f} for t, f in curve],
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"curve written to {args.out}")
    else:
        print(text)
    return 0


def _evaluate_model(model, bundle, store, cfg: RunConfig, k: int):
    part = pipeline.assemble(
        bundle, store, bundle.split.test, cfg.boundaries, cfg.max_seq_len, model.config.min_tokens
    )
    if not part.items:
        raise DataError("no evaluable test objects (all missing or too short)")
    reports = [
        metrics_mod.evaluate_run(model, part.eval_triples(), bundle.vocab, cfg.tau, k, mode)
        for mode in metrics_mod.MODES
    ]
    return reports, part


def cmd_evaluate(args) -> int:
    cfg = _config_from(
        args,
        model=args.model,
        bundle=args.data,
        store=args.emb,
        k=args.k,
        tau=args.tau,
        denominator=args.denominator,
        epochs=args.epochs,
        report=args.out,
    )
    bundle, dim, store = _load_artifacts(cfg)
    k_values = _parse_int_list(args.k_list, "--k-list") if args.k_list else (cfg.k,)
    all_reports: list[metrics_mod.MetricsReport] = []

    if args.runs < 1:
        raise UsageError(f"--runs must be >= 1, got {args.runs}")
    if args.runs == 1:
        model = head_mod.load_model(_require(cfg.model, "--model"))
        if model.config.num_tags != len(bundle.vocab):
            raise DataError(
                f"model expects {model.config.num_tags} tags, bundle vocabulary has {len(bundle.vocab)}"
            )
        for k in k_values:
            reports, part = _evaluate_model(model, bundle, store, cfg, k)
            all_reports.extend(reports)
            if part.skipped_short:
                print(f"K={k}: skipped {len(part.skipped_short)} too-short object(s)")
    else:
        # Seeded repeat runs: retrain the head per run, then average.
        per_key: dict[tuple[int, str], list[metrics_mod.MetricsReport]] = {}
        for run_index in range(args.runs):
            run_seed = cfg.seed + run_index
            model, _, _ = _train_head(cfg, bundle, dim, store, run_seed)
            for k in k_values:
                reports, _ = _evaluate_model(model, bundle, store, cfg, k)
                for rep in reports:
                    per_key.setdefault((k, rep.mode), []).append(rep)
        for (k, mode), reps in sorted(per_key.items()):
            all_reports.append(metrics_mod.multi_run_report(reps))

    headline = "both denominator modes" if args.denominator is None else f"{cfg.denominator} mode"
    print(metrics_mod.render_table(all_reports, title=f"test-set metrics (tau={cfg.tau}, {headline})"))
    if cfg.report:
        metrics_mod.save_report(cfg.report, all_reports, config=cfg.to_dict())
        print(f"report written to {cfg.report}")
    else:
        doc = {
            "format": metrics_mod.REPORT_FORMAT,
            "version": metrics_mod.REPORT_VERSION,
            "config": cfg.to_dict(),
            "reports": [r.to_json_dict() for r in all_reports],
        }
        print(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    return 0


def cmd_recommend(args) -> int:
    cfg = _config_from(
        args,
        model=args.model,
        bundle=args.data,
        store=args.emb,
        k=args.k,
        tau=args.tau,
    )
    out_path = _require(args.out, "--out")
    model = head_mod.load_model(_require(cfg.model, "--model"))
    bundle, dim, store = _load_artifacts(cfg)
    if args.ids:
        ids = tuple(args.ids.split(","))
        known = {o.id for o in bundle.objects}
        unknown = [i for i in ids if i not in known]
        if unknown:
            raise DataError(f"unknown object id(s): {unknown}")
    else:
        ids = bundle.split.test
    part = pipeline.assemble(bundle, store, ids, cfg.boundaries, cfg.max_seq_len, model.config.min_tokens)

    def recs():
        for oid, x, _, _ in part.items:
            scores = head_mod.forward(model, x)
            yield recommend_mod.apply_threshold_topk(scores, bundle.vocab, cfg.tau, cfg.k, object_id=oid)

    count = recommend_mod.write_recommendations(out_path, recs())
    meta = {
        "format": META_FORMAT,
        "version": ARTIFACT_VERSION,
        "config": cfg.to_dict(),
        "count": count,
        "skipped_short": list(part.skipped_short),
        "truncated": list(part.truncated),
    }
    Path(f"{out_path}.meta.json").write_text(
        json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n", encoding="utf-8"
    )
    print(f"{count} recommendation line(s) written to {out_path}")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "evaluate": cmd_evaluate,
    "recommend": cmd_recommend,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except TagrecError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
