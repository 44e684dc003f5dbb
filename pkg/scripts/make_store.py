#!/usr/bin/env python3
"""Build a mock embedding store (TGBE) for a JSONL corpus.

The mock embedder is a deterministic stand-in for a real frozen encoder:
useful for experiments and for running the pipeline without the
exporter.
"""

import argparse
import json

from tagrec.corpus import preprocess_text
from tagrec.embedding import write_mock_store


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--corpus", required=True, help="JSONL corpus path")
    ap.add_argument("--out", required=True, help="output TGBE path")
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--max-seq-len", type=int, default=512)
    args = ap.parse_args()

    def texts():
        with open(args.corpus, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                yield rec["id"], preprocess_text(rec.get("title", "") + " " + rec.get("description", ""))

    count = write_mock_store(texts(), dim=args.dim, seed=args.seed, path=args.out,
                             max_seq_len=args.max_seq_len)
    print(f"wrote {count} records (dim={args.dim}) to {args.out}")


if __name__ == "__main__":
    main()
