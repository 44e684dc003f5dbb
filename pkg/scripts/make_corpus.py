#!/usr/bin/env python3
"""Generate a synthetic JSON Lines corpus.

Two flavors: "separable" (tag <-> word correspondence on a small tag set,
good for overfit checks) and "zipf" (heavy-tailed tag popularity, good
for ingestion filtering and baseline comparisons).
"""

import argparse

from tagrec.synthetic import separable_corpus, write_jsonl, zipf_corpus


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("kind", choices=["separable", "zipf"])
    ap.add_argument("--out", required=True, help="output JSONL path")
    ap.add_argument("--objects", type=int, default=None)
    ap.add_argument("--tags", type=int, default=None)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    if args.kind == "separable":
        records = separable_corpus(
            num_objects=args.objects or 50, num_tags=args.tags or 10, seed=args.seed
        )
    else:
        records = zipf_corpus(
            num_objects=args.objects or 1000, num_tags=args.tags or 200, seed=args.seed
        )
    write_jsonl(records, args.out)
    print(f"wrote {len(records)} objects to {args.out}")


if __name__ == "__main__":
    main()
