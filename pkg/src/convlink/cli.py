"""Command-line entry point: kb-build, kb-query, link, eval, serve."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import TextIO

from . import evaluation as ev
from .discourse import DiscourseState
from .errors import BackendError, LinkerError, ParseError, ProtocolError
from .kg_backend import build_snapshot, load_snapshot
from .pipeline import Linker, PipelineConfig, load_config

log = logging.getLogger("convlink")


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file (flags override it)")
    p.add_argument("--kb", help="snapshot path (entity file or built index) or 'remote'")
    p.add_argument("--threshold", type=float)
    p.add_argument("--pool-size", type=int)
    p.add_argument("--lexicon", help="expectation lexicon TSV")
    p.add_argument("--synonyms", help="synonym TSV merged into the lexicon")
    p.add_argument("--stopwords", help="stop-word file")
    p.add_argument("--window", type=int, help="pronoun resolution window in turns")
    p.add_argument("--threshold-stage", choices=("pre-context", "post-context"))
    p.add_argument("--horizon", dest="expectation_horizon", choices=("utterance", "conversation"))
    p.add_argument("--no-context", action="store_true", help="score without contextual expectations")
    p.add_argument("--coarse", action="store_true", help="evaluate on PERSON/LOCATION/ORGANIZATION/MISC")


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    for flag, field_name in (("kb", "backend"), ("threshold", "threshold"), ("pool_size", "pool_size"),
                             ("lexicon", "lexicon"), ("synonyms", "synonyms"), ("stopwords", "stopwords"),
                             ("window", "window"), ("threshold_stage", "threshold_stage"),
                             ("expectation_horizon", "expectation_horizon")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    if getattr(args, "no_context", False):
        overrides["scoring"] = "overlap"
    if getattr(args, "coarse", False):
        overrides["coarse"] = True
    return cfg.updated(**overrides)


def cmd_kb_build(args, out: TextIO) -> int:
    try:
        snap = build_snapshot(args.input)
    except (ParseError, LinkerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if len(snap) == 0:
        print("error: empty snapshot", file=sys.stderr)
        return 1
    snap.save(args.output)
    print(f"{len(snap)} entities indexed", file=out)
    return 0


def cmd_kb_query(args, out: TextIO) -> int:
    snap = load_snapshot(args.kb)
    for e in snap.query(args.phrase, args.limit):
        print(json.dumps(e.to_record(), ensure_ascii=False), file=out)
    return 0


def _read_inputs(args):
    """Yield input records: a single utterance, a script file, or JSON lines on stdin."""
    if args.utterance:
        yield {"utterance": " ".join(args.utterance)}
        return
    stream = open(args.script, encoding="utf-8") if args.script else sys.stdin
    try:
        for line in stream:
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                yield json.loads(line)
            else:
                yield {"utterance": line}
    finally:
        if args.script:
            stream.close()


def cmd_link(args, out: TextIO) -> int:
    linker = Linker(config_from_args(args))
    states: dict[str, DiscourseState] = {}
    failed = 0
    for rec in _read_inputs(args):
        cid = str(rec.get("conversation_id", "default"))
        state = states.get(cid) or DiscourseState(cid)
        try:
            result = linker.link_utterance(state, rec.get("utterance", ""), speaker=rec.get("speaker", "user"),
                                           turn=rec.get("turn"), parse=rec.get("parse"))
        except (BackendError, ProtocolError, LinkerError, ValueError) as exc:
            failed += 1
            print(f"error: {cid}: {exc}", file=sys.stderr)
            continue
        states[cid] = result.state
        print(json.dumps(result.to_record(), ensure_ascii=False), file=out)
        out.flush()
    return 1 if failed else 0


def cmd_eval(args, out: TextIO) -> int:
    try:
        corpus = ev.load_corpus(args.corpus)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    cfg = config_from_args(args)
    linker = Linker(cfg)
    if args.grid:
        rows = ev.run_grid(corpus, cfg, linker.backend, args.accept)
        print(ev.format_metrics_table(rows), file=out)
        payload = {"grid": [{"name": n, **m.as_dict()} for n, m in rows]}
    else:
        preds = ev.run_corpus(linker, corpus)
        metrics = ev.evaluate(preds, corpus, cfg.coarse, args.accept)
        hist = ev.type_distribution([m for ms in preds for m in ms], args.top_k)
        title = f"t={cfg.threshold:g} {cfg.scoring}"
        print(ev.format_report(metrics, hist, title), file=out)
        payload = {**metrics.as_dict(), "histogram": [list(r) for r in hist.rows]}
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_serve(args, out: TextIO) -> int:
    from .service import LinkService, make_server

    service = LinkService(Linker(config_from_args(args)), idle_seconds=args.idle)
    server = make_server(service, args.host, args.port)
    print(f"serving on http://{args.host}:{server.server_address[1]}", file=out)
    out.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convlink", description="Entity recognition and linking for dialogue.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kb-build", help="index a line-delimited entity file")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_kb_build)

    p = sub.add_parser("kb-query", help="query a snapshot")
    p.add_argument("--kb", required=True)
    p.add_argument("--limit", type=int, default=6)
    p.add_argument("phrase")
    p.set_defaults(func=cmd_kb_query)

    p = sub.add_parser("link", help="link an utterance, a script file, or JSON lines on stdin")
    _add_pipeline_flags(p)
    p.add_argument("--script", help="JSON-lines conversation script")
    p.add_argument("utterance", nargs="*")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("eval", help="evaluate against an annotated corpus")
    _add_pipeline_flags(p)
    p.add_argument("--grid", action="store_true", help="threshold x scoring-mode grid")
    p.add_argument("--top-k", type=int, default=15)
    p.add_argument("--accept", nargs="+", default=["full"], choices=ev.VERDICTS,
                   help="match verdicts counted as correct for accuracy")
    p.add_argument("--json", help="also write a machine-readable report here")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="serve POST /link and GET /health")
    _add_pipeline_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--idle", type=float, default=1800.0, help="evict idle conversations after N seconds")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None, out: TextIO | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out or sys.stdout)
    except LinkerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
