#!/usr/bin/env python3
"""List every gold tuple the linker does not fully match, with what it predicted instead."""
import argparse
from collections import Counter
from pathlib import Path

from convlink import evaluation as ev
from convlink.pipeline import Linker, PipelineConfig

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kb", default=str(ROOT / "data" / "snapshot.jsonl"))
    ap.add_argument("--corpus", default=str(ROOT / "data" / "corpus.jsonl"))
    ap.add_argument("--threshold", type=float, default=150.0)
    ap.add_argument("--scoring", default="context", choices=("segmentation", "overlap", "context"))
    args = ap.parse_args()

    corpus = ev.load_corpus(args.corpus)
    linker = Linker(PipelineConfig(backend=args.kb, threshold=args.threshold, scoring=args.scoring))
    preds = ev.run_corpus(linker, corpus)
    verdicts = Counter()
    for record, mentions in zip(corpus, preds):
        pairs, spurious = ev.pair_record(record, mentions)
        for gold, pred, verdict in pairs:
            verdicts[verdict] += 1
            if verdict == "full":
                continue
            got = "nothing" if pred is None else f"{pred.entity.name!r} {pred.entity.primary_type} ({pred.span.text})"
            print(f"[{verdict:9}] {record.utterance}\n    want {gold.canonical!r} {gold.label}, got {got}")
        for pred in spurious:
            verdicts["spurious"] += 1
            print(f"[spurious ] {record.utterance}\n    extra {pred.entity.name!r} ({pred.span.text})")
    print()
    print(", ".join(f"{k}: {v}" for k, v in sorted(verdicts.items())))


if __name__ == "__main__":
    main()
