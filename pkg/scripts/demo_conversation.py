#!/usr/bin/env python3
"""Walk a scripted conversation turn by turn, showing mentions, links and pronoun resolutions."""
import argparse
import json
from pathlib import Path

from convlink.discourse import DiscourseState, dump_state
from convlink.pipeline import Linker, PipelineConfig

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("script", nargs="?", default=str(ROOT / "data" / "table1_script.jsonl"))
    ap.add_argument("--kb", default=str(ROOT / "data" / "snapshot.jsonl"))
    ap.add_argument("--save", help="write the final discourse state(s) as JSON lines")
    args = ap.parse_args()

    linker = Linker(PipelineConfig(backend=args.kb))
    states = {}
    for line in Path(args.script).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        cid = rec.get("conversation_id", "default")
        result = linker.link_utterance(states.get(cid) or DiscourseState(cid), rec["utterance"],
                                       speaker=rec.get("speaker", "user"), turn=rec.get("turn"))
        states[cid] = result.state
        print(f"{cid} #{result.turn} {rec.get('speaker', 'user')}: {result.utterance}")
        for m in result.mentions:
            print(f"    {m.span.text!r} -> {m.entity.name} [{m.entity.primary_type}] "
                  f"{m.final_score:.1f} {m.link.article_url or ''}")
        for p in result.pronoun_links:
            name = result.state.registry[p.entity_id].entity.name
            print(f"    {p.pronoun!r} @{p.position} -> {name} (turn {p.antecedent_turn})")
    if args.save:
        Path(args.save).write_text("".join(dump_state(s) for s in states.values()), encoding="utf-8")


if __name__ == "__main__":
    main()
