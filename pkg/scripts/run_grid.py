#!/usr/bin/env python3
"""Threshold x scoring-mode grid over an annotated corpus.

Writes the metrics table to stdout and, with --out, a JSON copy with
per-class scores for every cell.
"""
import argparse
import json
import logging
from pathlib import Path

from convlink import evaluation as ev
from convlink.kg_backend import load_snapshot
from convlink.pipeline import PipelineConfig

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kb", default=str(ROOT / "data" / "snapshot.jsonl"))
    ap.add_argument("--corpus", default=str(ROOT / "data" / "corpus.jsonl"))
    ap.add_argument("--coarse", action="store_true")
    ap.add_argument("--out", help="JSON file for the full grid")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    corpus = ev.load_corpus(args.corpus)
    cfg = PipelineConfig(backend=args.kb, coarse=args.coarse)
    rows = ev.run_grid(corpus, cfg, load_snapshot(args.kb))
    print(f"{len(corpus)} utterances, {sum(len(r.annotations) for r in corpus)} gold tuples")
    print(ev.format_metrics_table(rows))
    if args.out:
        payload = [{"name": name, **m.as_dict()} for name, m in rows]
        Path(args.out).write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
