#!/usr/bin/env python3
"""Recompute Recall/Precision/F1@K from a recommendations JSONL file and a
dataset bundle, using nothing but the standard library.

Deliberately independent of the main package: this is the external
consistency check for evaluation runs. Prints a JSON object with the
aggregates per precision mode.
"""

import argparse
import json


def per_object_metrics(rec: set, true: set, k: int, mode: str) -> tuple[float, float, float]:
    hits = len(rec & true)
    recall = hits / k if len(true) > k else hits / len(true)
    if mode == "strict":
        precision = hits / k
    else:
        precision = hits / len(rec) if rec else 0.0
    f1 = 0.0 if precision + recall == 0 else 2.0 * precision * recall / (precision + recall)
    return recall, precision, f1


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bundle", required=True)
    ap.add_argument("--recs", required=True, help="recommendations JSONL")
    ap.add_argument("--k", type=int, required=True)
    args = ap.parse_args()

    with open(args.bundle, encoding="utf-8") as fh:
        bundle = json.load(fh)
    tags = bundle["vocabulary"]["tags"]
    true_by_id = {o["id"]: {tags[i] for i in o["tags"]} for o in bundle["objects"]}

    order = []
    rec_by_id = {}
    with open(args.recs, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            order.append(doc["id"])
            rec_by_id[doc["id"]] = set(doc["tags"])

    out = {}
    for mode in ("strict", "effective"):
        recalls, precisions, f1s = [], [], []
        for oid in order:
            r, p, f = per_object_metrics(rec_by_id[oid], true_by_id[oid], args.k, mode)
            recalls.append(r)
            precisions.append(p)
            f1s.append(f)
        n = len(order)
        out[mode] = {
            "k": args.k,
            "objects": n,
            "recall": sum(recalls) / n,
            "precision": sum(precisions) / n,
            "f1": sum(f1s) / n,
        }
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
