"""Contextual type expectations from action verbs, keywords and short phrases."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import ConfigError, ParseError, ValidationError
from .kg_backend import KgEntity
from .text_norm import Token, normalize

KINDS = ("verb", "keyword", "phrase")
DEFAULT_MIN_WEIGHT = 0.5
SYNONYM_DAMPING = 0.9


@dataclass(frozen=True)
class ExpectationRule:
    trigger: str
    kind: str
    target_types: frozenset[str]
    weight: float

    def __post_init__(self):
        if not self.trigger or normalize(self.trigger) != self.trigger:
            raise ValueError(f"trigger must be non-empty and normalized: {self.trigger!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if not self.target_types:
            raise ValueError("rule has no target types")
        if not 0 < self.weight <= 1:
            raise ValueError(f"weight {self.weight} outside (0, 1]")


@dataclass(frozen=True)
class ActiveExpectations:
    triggered: tuple[tuple[ExpectationRule, int], ...] = ()

    @property
    def expected_types(self) -> frozenset[str]:
        out: set[str] = set()
        for rule, _ in self.triggered:
            out |= rule.target_types
        return frozenset(out)

    def combine(self, other: "ActiveExpectations") -> "ActiveExpectations":
        """Union of two trigger sets; a rule already present keeps its first position."""
        seen = {(r.trigger, r.kind) for r, _ in self.triggered}
        extra = tuple((r, p) for r, p in other.triggered if (r.trigger, r.kind) not in seen)
        return ActiveExpectations(self.triggered + extra)


EMPTY = ActiveExpectations()


def _merge(rules: Iterable[ExpectationRule]) -> list[ExpectationRule]:
    merged: dict[tuple[str, str], ExpectationRule] = {}
    for r in rules:
        key = (r.trigger, r.kind)
        prev = merged.get(key)
        if prev is None:
            merged[key] = r
        else:
            merged[key] = ExpectationRule(r.trigger, r.kind, prev.target_types | r.target_types,
                                          max(prev.weight, r.weight))
    return list(merged.values())


def _parse_lexicon(text: str, origin: str) -> list[ExpectationRule]:
    rules = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", lineno, origin)
        trigger, kind, types, weight = (p.strip() for p in parts)
        trigger = normalize(trigger)
        kind = kind.lower()
        target = frozenset(t.strip() for t in types.split(",") if t.strip())
        if not trigger:
            raise ParseError("empty trigger", lineno, origin)
        if kind not in KINDS:
            raise ParseError(f"unknown kind {kind!r}", lineno, origin)
        if not target:
            raise ParseError("no target types", lineno, origin)
        try:
            w = float(weight)
        except ValueError:
            raise ParseError(f"weight {weight!r} is not a number", lineno, origin) from None
        if not 0 < w <= 1:
            raise ValidationError(f"weight {w} outside (0, 1]", lineno, origin)
        rules.append(ExpectationRule(trigger, kind, target, w))
    return _merge(rules)


def load_lexicon(path: str | Path) -> list[ExpectationRule]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"lexicon not found: {path}")
    return _parse_lexicon(path.read_text(encoding="utf-8"), str(path))


def default_lexicon() -> list[ExpectationRule]:
    text = resources.files("convlink").joinpath("resources/expectations.tsv").read_text(encoding="utf-8")
    return _parse_lexicon(text, "<bundled lexicon>")


def _find(words: list[str], trigger: list[str]) -> int:
    n = len(trigger)
    for i in range(len(words) - n + 1):
        if words[i:i + n] == trigger:
            return i
    return -1


def extract_expectations(tokens: list[Token], rules: Iterable[ExpectationRule],
                         min_weight: float = DEFAULT_MIN_WEIGHT) -> ActiveExpectations:
    words = [t.surface for t in tokens]
    triggered = []
    for rule in rules:
        if rule.weight < min_weight:
            continue
        pos = _find(words, rule.trigger.split(" "))
        if pos >= 0:
            triggered.append((rule, pos))
    return ActiveExpectations(tuple(triggered))


def num_matches(entity: KgEntity, active: ActiveExpectations) -> int:
    types = set(entity.types)
    return sum(1 for rule, _ in active.triggered if rule.target_types & types)


def _parse_synonyms(text: str, origin: str) -> dict[str, list[str]]:
    table: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError("expected lexeme<TAB>syn1,syn2,...", lineno, origin)
        lexeme = normalize(parts[0])
        syns = [normalize(s) for s in parts[1].split(",")]
        syns = [s for s in syns if s]
        if not lexeme or not syns:
            raise ParseError("empty lexeme or synonym list", lineno, origin)
        table.setdefault(lexeme, []).extend(syns)
    return table


def merge_synonym_table(rules: list[ExpectationRule], synonyms: str | Path) -> list[ExpectationRule]:
    path = Path(synonyms)
    if not path.is_file():
        raise ConfigError(f"synonym file not found: {path}")
    table = _parse_synonyms(path.read_text(encoding="utf-8"), str(path))
    clones = []
    for rule in rules:
        for syn in table.get(rule.trigger, ()):
            kind = "phrase" if " " in syn else rule.kind
            clones.append(ExpectationRule(syn, kind, rule.target_types, rule.weight * SYNONYM_DAMPING))
    return _merge(list(rules) + clones)
