"""End-to-end linker: normalize, segment, pool, rank, prune, merge, link, sync."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import context_expect as ce
from .discourse import DiscourseState, PronounLink, Turn, resolve_pronouns, sync, web_link
from .errors import ConfigError
from .kg_backend import DEFAULT_POOL_SIZE, CachingBackend, RemoteBackend, load_snapshot
from .ranker import (DEFAULT_THRESHOLD, SCORING_MODES, STOP_PENALTY, THRESHOLD_STAGES, Mention, merge, prune,
                     rank_span)
from .segmenter import (DEFAULT_PRONOUN_EXCEPTIONS, MAX_NGRAM, NGRAM_FALLBACK, NOUN_TAGS, CandidateSpan,
                        ParseTree, default_tag_lexicon, generate_candidates, load_tag_lexicon, parse_bracketed,
                        parse_tags, pos_tag)
from .text_norm import Token, default_stoplist, load_stoplist, normalize, tokenize

HORIZONS = ("utterance", "conversation")


@dataclass
class PipelineConfig:
    threshold: float = DEFAULT_THRESHOLD
    pool_size: int = DEFAULT_POOL_SIZE
    stop_penalty: float = STOP_PENALTY
    min_rule_weight: float = ce.DEFAULT_MIN_WEIGHT
    expectation_horizon: str = "utterance"
    threshold_stage: str = "post-context"
    window: int = 3
    backend: str | None = None  # snapshot path or "remote"
    coarse: bool = False
    scoring: str = "context"  # segmentation | overlap | context
    lexicon: str | None = None
    synonyms: str | None = None
    stopwords: str | None = None
    tag_lexicon: str | None = None
    span_budget: int = 32
    max_ngram: int = MAX_NGRAM
    remote_timeout: float = 2.0

    def validate(self) -> "PipelineConfig":
        if self.threshold < 0:
            raise ConfigError("threshold must be >= 0")
        if self.pool_size < 1:
            raise ConfigError("pool_size must be >= 1")
        if not 0 < self.stop_penalty <= 1:
            raise ConfigError("stop_penalty must be in (0, 1]")
        if self.expectation_horizon not in HORIZONS:
            raise ConfigError(f"expectation_horizon must be one of {HORIZONS}")
        if self.threshold_stage not in THRESHOLD_STAGES:
            raise ConfigError(f"threshold_stage must be one of {THRESHOLD_STAGES}")
        if self.scoring not in SCORING_MODES:
            raise ConfigError(f"scoring must be one of {SCORING_MODES}")
        if self.window < 1 or self.span_budget < 1 or self.max_ngram < 1:
            raise ConfigError("window, span_budget and max_ngram must be >= 1")
        return self

    def updated(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes).validate()


def _coerce(name: str, raw: str) -> Any:
    typ = {f.name: f.type for f in dataclasses.fields(PipelineConfig)}[name]
    raw = raw.strip()
    try:
        if typ == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return None if raw.lower() in ("", "none") else raw


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """key=value lines, '#' comments; keys may use '-' or '_'."""
    cfg = dataclasses.replace(base) if base else PipelineConfig()
    names = {f.name for f in dataclasses.fields(PipelineConfig)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in names:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, value))
    return cfg.validate()


def load_config(path: str | Path, base: PipelineConfig | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), base)


@dataclass
class LinkResult:
    utterance: str
    tokens: list[Token]
    mentions: list[Mention]
    pronoun_links: list[PronounLink]
    state: DiscourseState
    turn: int = 0

    def to_record(self) -> dict[str, Any]:
        return {
            "conversation_id": self.state.conversation_id,
            "turn": self.turn,
            "utterance": self.utterance,
            "mentions": [
                {
                    "start": m.span.start,
                    "end": m.span.end,
                    "surface": m.span.text,
                    "canonical": m.entity.name,
                    "types": list(m.entity.types),
                    "score": round(m.final_score, 4),
                    "url": m.link.article_url if m.link else m.entity.source_url,
                    "kb_key": list(m.link.kb_key) if m.link else [m.entity.name, m.entity.primary_type],
                    "discourse_id": m.entity.id,
                }
                for m in self.mentions
            ],
            "pronoun_links": [
                {"position": p.position, "pronoun": p.pronoun, "discourse_id": p.entity_id,
                 "antecedent_turn": p.antecedent_turn}
                for p in self.pronoun_links
            ],
        }


def _budget(spans: list[CandidateSpan], budget: int) -> list[CandidateSpan]:
    if len(spans) <= budget:
        return spans
    # structural spans first, then the widest n-grams
    ranked = sorted(spans, key=lambda s: (s.source == NGRAM_FALLBACK, -s.width, s.start))
    return sorted(ranked[:budget], key=lambda s: (s.start, s.end))


def _plausible(sc, proposed: set[tuple[int, int]], tags: list[str]) -> bool:
    """A span narrowed onto function words only counts if it spells out the whole name."""
    start, end = sc.span.start, sc.span.end
    if (start, end) in proposed or sc.vector.zero_count == 0:
        return True
    return any(tags[i] in NOUN_TAGS for i in range(start, end))


class Linker:
    """Holds the loaded resources for one configuration."""

    def __init__(self, config: PipelineConfig, backend=None, *, rules: Sequence[ce.ExpectationRule] | None = None,
                 exceptions: Mapping[str, frozenset[str]] | None = None):
        self.config = config.validate()
        self.stops = load_stoplist(config.stopwords) if config.stopwords else default_stoplist()
        self.tag_lexicon = load_tag_lexicon(config.tag_lexicon) if config.tag_lexicon else default_tag_lexicon()
        if rules is None:
            rules = ce.load_lexicon(config.lexicon) if config.lexicon else ce.default_lexicon()
            if config.synonyms:
                rules = ce.merge_synonym_table(list(rules), config.synonyms)
        self.rules = list(rules)
        self.exceptions = dict(exceptions if exceptions is not None else DEFAULT_PRONOUN_EXCEPTIONS)
        if backend is None:
            backend = make_backend(config, self.stops)
        self.backend = backend if isinstance(backend, CachingBackend) else CachingBackend(backend)

    def expectations(self, state: DiscourseState, tokens: list[Token]) -> ce.ActiveExpectations:
        if self.config.scoring != "context":
            return ce.EMPTY
        active = ce.extract_expectations(tokens, self.rules, self.config.min_rule_weight)
        if self.config.expectation_horizon == "conversation":
            for turn in reversed(state.turns[-self.config.window:]):
                prior = tokenize(turn.utterance, self.stops)
                active = active.combine(ce.extract_expectations(prior, self.rules, self.config.min_rule_weight))
        return active

    def link_utterance(self, state: DiscourseState, utterance: str, *, speaker: str = "user",
                       turn: int | None = None, parse: str | ParseTree | None = None) -> LinkResult:
        cfg = self.config
        turn_index = state.next_index() if turn is None else turn
        text = normalize(utterance)
        tokens = tokenize(text, self.stops)
        if not tokens:
            new_state = sync(state, Turn(turn_index, speaker, text))
            return LinkResult(text, [], [], [], new_state, turn_index)

        active = self.expectations(state, tokens)
        tree = parse_bracketed(parse) if isinstance(parse, str) else parse
        spans = generate_candidates(tokens, tree, active.expected_types, lexicon=self.tag_lexicon,
                                    exceptions=self.exceptions, max_ngram=cfg.max_ngram)
        spans = _budget(spans, cfg.span_budget)
        proposed = {(s.start, s.end) for s in spans}
        tags = parse_tags(tree, tokens) if tree is not None else pos_tag(tokens, self.tag_lexicon)

        pools: dict[str, list] = {}
        for span in spans:
            if span.text not in pools:
                pools[span.text] = self.backend.query(span.text, cfg.pool_size)

        scored = []
        for span in spans:
            best = rank_span(span, pools[span.text], tokens, active, stops=self.stops,
                             stop_penalty=cfg.stop_penalty, scoring=cfg.scoring)
            if best is not None and _plausible(best, proposed, tags):
                scored.append(best)
        kept = prune(scored, cfg.threshold, cfg.threshold_stage)
        mentions = [dataclasses.replace(m, link=web_link(m.entity)) for m in merge(kept)]

        covered = {i for m in mentions for i in range(m.span.start, m.span.end)}
        links = resolve_pronouns(state, tokens, cfg.window, current=mentions, turn_index=turn_index, skip=covered)
        new_state = sync(state, Turn(turn_index, speaker, text, tuple(mentions), tuple(links)))
        return LinkResult(text, tokens, mentions, links, new_state, turn_index)


def make_backend(config: PipelineConfig, stops=None):
    if config.backend is None:
        raise ConfigError("no knowledge backend configured (snapshot path or 'remote')")
    if config.backend == "remote":
        return RemoteBackend(timeout=config.remote_timeout)
    path = Path(config.backend)
    if not path.is_file():
        raise ConfigError(f"snapshot not found: {path}")
    return load_snapshot(path, stops)


def link_utterance(config: PipelineConfig, state: DiscourseState, utterance: str, *, backend=None,
                   **kwargs) -> tuple[list[Mention], list[PronounLink], DiscourseState]:
    result = Linker(config, backend).link_utterance(state, utterance, **kwargs)
    return result.mentions, result.pronoun_links, result.state
