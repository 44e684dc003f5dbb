"""Command-line entry point for the embedding exporter."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, ExportJob, export_embeddings


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="tagrec-export", description=__doc__)
    ap.add_argument("--corpus", required=True, help="JSONL corpus path")
    ap.add_argument("--out", required=True, help="TGBE store output path")
    ap.add_argument("--encoder", required=True, help="encoder name or local path")
    ap.add_argument("--revision", default="main", help="pinned encoder revision")
    ap.add_argument("--max-seq-len", type=int, default=512)
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--device", default="cpu")
    args = ap.parse_args(argv)
    try:
        result = export_embeddings(
            ExportJob(
                corpus=args.corpus,
                out=args.out,
                encoder=args.encoder,
                revision=args.revision,
                max_seq_len=args.max_seq_len,
                batch_size=args.batch_size,
                device=args.device,
            )
        )
    except ExportError as e:
        print(f"export error: {e}", file=sys.stderr)
        return 2
    print(f"{result.record_count} records (dim={result.dim}) written to {args.out}")
    if result.skipped_ids:
        print(f"skipped {len(result.skipped_ids)} record(s): {', '.join(result.skipped_ids[:10])}")
    print(f"manifest written to {result.manifest_path}")
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
