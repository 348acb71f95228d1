"""Annotated-corpus loading, prediction matching, metrics, and type distributions."""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .discourse import DiscourseState
from .errors import ParseError
from .ranker import Mention
from .text_norm import normalize

log = logging.getLogger(__name__)

NONE = "NONE"
COARSE_LABELS = ("PERSON", "LOCATION", "ORGANIZATION", "MISC")

COARSE_TABLE = {
    "Person": "PERSON",
    "Place": "LOCATION",
    "City": "LOCATION",
    "State": "LOCATION",
    "Country": "LOCATION",
    "TouristAttraction": "LOCATION",
    "Mountain": "LOCATION",
    "AdministrativeArea": "LOCATION",
    "Continent": "LOCATION",
    "Landform": "LOCATION",
    "Organization": "ORGANIZATION",
    "Corporation": "ORGANIZATION",
    "SportsTeam": "ORGANIZATION",
    "EducationalOrganization": "ORGANIZATION",
    "CollegeOrUniversity": "ORGANIZATION",
    "GovernmentOrganization": "ORGANIZATION",
    "SportsOrganization": "ORGANIZATION",
}

VERDICTS = ("full", "type-only", "name-only", "none")


@dataclass(frozen=True)
class AnnotationTuple:
    surface: str
    types: tuple[str, ...]
    canonical: str

    def __post_init__(self):
        if not self.surface:
            raise ValueError("annotation surface is empty")
        if not self.types:
            raise ValueError("annotation has no types")

    @property
    def label(self) -> str:
        return most_specific(self.types)


@dataclass
class CorpusRecord:
    utterance: str
    annotations: list[AnnotationTuple]
    parse: str | None = None
    conversation_id: str | None = None
    turn: int | None = None
    line: int = 0
    warnings: list[str] = field(default_factory=list)


def most_specific(types: Sequence[str]) -> str:
    for t in types:
        if t != "Thing":
            return t
    return types[0] if types else "Thing"


def coarse_map(types: Sequence[str]) -> str:
    for t in types:
        if t in COARSE_TABLE:
            return COARSE_TABLE[t]
    return "MISC"


def load_corpus(path: str | Path) -> list[CorpusRecord]:
    path = Path(path)
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            records.append(_parse_record(line, lineno, str(path)))
    return records


def _parse_record(line: str, lineno: int, origin: str) -> CorpusRecord:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno, origin) from None
    if not isinstance(rec, dict) or not isinstance(rec.get("utterance"), str):
        raise ParseError("record needs a string 'utterance'", lineno, origin)
    anns = rec.get("annotations", [])
    if not isinstance(anns, list):
        raise ParseError("'annotations' must be a list", lineno, origin)
    out = []
    for a in anns:
        try:
            types = a["types"]
            if isinstance(types, str):
                types = types.split()
            out.append(AnnotationTuple(normalize(a["surface"]), tuple(types), a["canonical"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad annotation: {exc}", lineno, origin) from None
    utterance = rec["utterance"]
    record = CorpusRecord(normalize(utterance), out, rec.get("parse"), rec.get("conversation_id"),
                          rec.get("turn"), lineno)
    if normalize(utterance) != utterance:
        record.warnings.append("utterance was not in normalized form")
    padded = f" {record.utterance} "
    for a in out:
        if f" {a.surface} " not in padded:
            record.warnings.append(f"surface {a.surface!r} not found in utterance")
    for w in record.warnings:
        log.warning("%s:%d: %s", origin, lineno, w)
    return record


def match_prediction(pred: Mention, gold: AnnotationTuple, coarse: bool = False) -> str:
    same_name = normalize(pred.entity.name) == normalize(gold.canonical)
    if coarse:
        same_type = coarse_map(pred.entity.types) == coarse_map(gold.types)
    else:
        same_type = gold.label in pred.entity.types
    if same_name and same_type:
        return "full"
    if same_type:
        return "type-only"
    if same_name:
        return "name-only"
    return "none"


def _surface_extent(utterance: str, surface: str) -> tuple[int, int] | None:
    words, target = utterance.split(), surface.split()
    for i in range(len(words) - len(target) + 1):
        if words[i:i + len(target)] == target:
            return i, i + len(target)
    return None


def _pred_label(pred: Mention, gold: AnnotationTuple | None, coarse: bool) -> str:
    if coarse:
        return coarse_map(pred.entity.types)
    if gold is not None and gold.label in pred.entity.types:
        return gold.label
    return most_specific(pred.entity.types)


def pair_record(record: CorpusRecord, preds: Sequence[Mention], coarse: bool = False):
    """Pair gold tuples with predictions: full matches, then same-name, then overlapping surface.

    Returns (pairs, spurious) where pairs is [(gold, pred or None, verdict)].
    """
    free = list(range(len(preds)))
    chosen: dict[int, tuple[int, str]] = {}
    for wanted in ("full", "name-only"):
        for gi, gold in enumerate(record.annotations):
            if gi in chosen:
                continue
            for pi in free:
                v = match_prediction(preds[pi], gold, coarse)
                if v == wanted:
                    chosen[gi] = (pi, v)
                    free.remove(pi)
                    break
    for gi, gold in enumerate(record.annotations):
        if gi in chosen:
            continue
        ext = _surface_extent(record.utterance, gold.surface)
        if ext is None:
            continue
        for pi in free:
            span = preds[pi].span
            if span.start < ext[1] and ext[0] < span.end:
                chosen[gi] = (pi, match_prediction(preds[pi], gold, coarse))
                free.remove(pi)
                break
    pairs = []
    for gi, gold in enumerate(record.annotations):
        if gi in chosen:
            pi, v = chosen[gi]
            pairs.append((gold, preds[pi], v))
        else:
            pairs.append((gold, None, "none"))
    return pairs, [preds[pi] for pi in free]


@dataclass
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class Metrics:
    accuracy: float
    macro_f1: float
    micro_f1: float
    weighted_f1: float
    per_class: dict[str, ClassScore]
    n_gold: int = 0
    n_full: int = 0
    n_spurious: int = 0

    def as_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "weighted_f1": self.weighted_f1,
            "n_gold": self.n_gold,
            "n_full": self.n_full,
            "n_spurious": self.n_spurious,
            "per_class": {k: vars(v) for k, v in sorted(self.per_class.items())},
        }


def _div(a: float, b: float) -> float:
    return a / b if b else 0.0


def metrics_from_labels(y_true: Sequence[str], y_pred: Sequence[str], n_full: int, n_gold: int) -> Metrics:
    """F1 family over paired labels; NONE marks a missed gold tuple or a spurious prediction."""
    classes = sorted((set(y_true) | set(y_pred)) - {NONE})
    tp, fp, fn, support = Counter(), Counter(), Counter(), Counter()
    for t, p in zip(y_true, y_pred):
        if t != NONE:
            support[t] += 1
        if t == p:
            if t != NONE:
                tp[t] += 1
            continue
        if p != NONE:
            fp[p] += 1
        if t != NONE:
            fn[t] += 1
    per_class = {}
    for c in classes:
        prec = _div(tp[c], tp[c] + fp[c])
        rec = _div(tp[c], tp[c] + fn[c])
        per_class[c] = ClassScore(prec, rec, _div(2 * prec * rec, prec + rec), support[c])
    TP, FP, FN = sum(tp.values()), sum(fp.values()), sum(fn.values())
    macro = _div(sum(s.f1 for s in per_class.values()), len(per_class))
    micro = _div(2 * TP, 2 * TP + FP + FN)
    total = sum(support.values())
    weighted = _div(sum(s.f1 * s.support for s in per_class.values()), total)
    n_spurious = sum(1 for t in y_true if t == NONE)
    return Metrics(_div(n_full, n_gold), macro, micro, weighted, per_class, n_gold, n_full, n_spurious)


def paired_labels(predictions: Sequence[Sequence[Mention]], corpus: Sequence[CorpusRecord],
                  coarse: bool = False,
                  accept: Iterable[str] = ("full",)) -> tuple[list[str], list[str], int, int]:
    """(y_true, y_pred, accepted matches, gold count) after pairing each record.

    ``accept`` lists the verdicts that count as correct for accuracy.
    """
    accept = frozenset(accept)
    if not accept <= set(VERDICTS):
        raise ValueError(f"unknown verdicts: {sorted(accept - set(VERDICTS))}")
    if len(predictions) != len(corpus):
        raise ValueError("predictions and corpus differ in length")
    y_true, y_pred = [], []
    n_full = n_gold = 0
    for record, preds in zip(corpus, predictions):
        pairs, spurious = pair_record(record, preds, coarse)
        for gold, pred, verdict in pairs:
            n_gold += 1
            n_full += verdict in accept
            y_true.append(coarse_map(gold.types) if coarse else gold.label)
            y_pred.append(NONE if pred is None else _pred_label(pred, gold, coarse))
        for pred in spurious:
            y_true.append(NONE)
            y_pred.append(_pred_label(pred, None, coarse))
    return y_true, y_pred, n_full, n_gold


def evaluate(predictions: Sequence[Sequence[Mention]], corpus: Sequence[CorpusRecord],
             coarse: bool = False, accept: Iterable[str] = ("full",)) -> Metrics:
    return metrics_from_labels(*paired_labels(predictions, corpus, coarse, accept))


@dataclass
class TypeHistogram:
    counts: dict[str, int]
    rows: list[tuple[str, int]]


def type_distribution(predictions: Iterable, top_k: int = 15) -> TypeHistogram:
    """Counts by most-specific type; accepts mentions, entities or type lists."""
    counter: Counter[str] = Counter()
    for p in predictions:
        if isinstance(p, Mention):
            types = p.entity.types
        elif hasattr(p, "types"):
            types = p.types
        else:
            types = p
        counter[most_specific(list(types))] += 1
    ordered = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    rows = ordered[:top_k]
    rest = sum(n for _, n in ordered[top_k:])
    if len(ordered) > top_k:
        rows.append(("other", rest))
    return TypeHistogram(dict(ordered), rows)


def fmt3(x: float) -> str:
    s = f"{x:.3f}"
    return s[1:] if s.startswith("0.") else s


METRIC_COLUMNS = (("Accuracy", "accuracy"), ("macro-F1", "macro_f1"), ("micro-F1", "micro_f1"),
                  ("weighted-F1", "weighted_f1"))


def format_metrics_table(rows: Sequence[tuple[str, Metrics]]) -> str:
    width = max([len(name) for name, _ in rows] + [13])
    head = " | ".join([" " * width] + [c for c, _ in METRIC_COLUMNS])
    lines = [head, "-" * len(head)]
    for name, m in rows:
        cells = [name.ljust(width)] + [fmt3(getattr(m, attr)).ljust(len(col)) for col, attr in METRIC_COLUMNS]
        lines.append(" | ".join(cells).rstrip())
    return "\n".join(lines)


def format_report(metrics: Metrics, histogram: TypeHistogram, title: str = "result") -> str:
    lines = [format_metrics_table([(title, metrics)]), "",
             f"gold tuples: {metrics.n_gold}  fully matched: {metrics.n_full}  spurious: {metrics.n_spurious}", "",
             "class | precision | recall | F1 | support"]
    for c, s in sorted(metrics.per_class.items()):
        lines.append(f"{c} | {fmt3(s.precision)} | {fmt3(s.recall)} | {fmt3(s.f1)} | {s.support}")
    lines += ["", "detected types:"]
    for name, n in histogram.rows:
        lines.append(f"  {name:<24} {n}")
    return "\n".join(lines)


def run_corpus(linker, corpus: Sequence[CorpusRecord]) -> list[list[Mention]]:
    """Link every record; records sharing a conversation id share discourse state, in file order."""
    states: dict[str, DiscourseState] = {}
    out = []
    for rec in corpus:
        if rec.conversation_id is None:
            state = DiscourseState()
        else:
            state = states.get(rec.conversation_id) or DiscourseState(rec.conversation_id)
        turn = rec.turn if rec.turn is not None and rec.turn > (state.last_index or 0) else None
        result = linker.link_utterance(state, rec.utterance, turn=turn, parse=rec.parse)
        if rec.conversation_id is not None:
            states[rec.conversation_id] = result.state
        out.append(result.mentions)
    return out


GRID_THRESHOLDS = (0.0, 150.0)
GRID_MODES = (("segmentation-only", "segmentation"), ("scoring", "overlap"), ("scoring+lexicon", "context"))


def run_grid(corpus: Sequence[CorpusRecord], config, backend,
             accept: Iterable[str] = ("full",)) -> list[tuple[str, Metrics]]:
    """Threshold x scoring-mode experiment grid, one metrics row per cell."""
    from .pipeline import Linker

    rows = []
    for threshold in GRID_THRESHOLDS:
        for name, mode in GRID_MODES:
            linker = Linker(config.updated(threshold=threshold, scoring=mode), backend)
            preds = run_corpus(linker, corpus)
            rows.append((f"t={threshold:g} {name}", evaluate(preds, corpus, config.coarse, accept)))
    return rows
