"""Per-conversation discourse state, pronoun resolution and web-source links."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

from .errors import ParseError, SequencingError
from .kg_backend import KgEntity
from .ranker import Mention
from .segmenter import CandidateSpan
from .text_norm import Token

DEFAULT_WINDOW = 3

MASCULINE = frozenset({"he", "him", "his", "himself"})
FEMININE = frozenset({"she", "her", "hers", "herself"})
NEUTER = frozenset({"it", "its", "itself"})
PLURAL = frozenset({"they", "them", "their", "theirs", "themselves"})
RESOLVABLE = MASCULINE | FEMININE | NEUTER | PLURAL


@dataclass(frozen=True)
class WebLink:
    article_url: str | None
    kb_key: tuple[str, str]


@dataclass(frozen=True)
class PronounLink:
    position: int
    pronoun: str
    entity_id: str
    antecedent_turn: int


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: str
    utterance: str
    mentions: tuple[Mention, ...] = ()
    pronoun_links: tuple[PronounLink, ...] = ()


@dataclass(frozen=True)
class DiscourseEntity:
    entity: KgEntity
    first_turn: int
    last_turn: int
    mention_count: int


@dataclass(frozen=True)
class DiscourseState:
    conversation_id: str = "default"
    turns: tuple[Turn, ...] = ()
    registry: dict[str, DiscourseEntity] = field(default_factory=dict)

    @property
    def last_index(self) -> int | None:
        return self.turns[-1].index if self.turns else None

    def next_index(self) -> int:
        return 1 if not self.turns else self.turns[-1].index + 1


def web_link(entity: KgEntity) -> WebLink:
    return WebLink(entity.source_url, (entity.name, entity.primary_type))


def sync(state: DiscourseState, turn: Turn) -> DiscourseState:
    """Return a new state with ``turn`` appended; the input state is untouched."""
    if state.last_index is not None and turn.index <= state.last_index:
        raise SequencingError(f"turn {turn.index} does not follow turn {state.last_index}")
    registry = dict(state.registry)
    for m in turn.mentions:
        prev = registry.get(m.entity.id)
        if prev is None:
            registry[m.entity.id] = DiscourseEntity(m.entity, turn.index, turn.index, 1)
        else:
            registry[m.entity.id] = replace(prev, last_turn=turn.index, mention_count=prev.mention_count + 1)
    return DiscourseState(state.conversation_id, state.turns + (turn,), registry)


def _compatible(pronoun: str, entity: KgEntity) -> bool:
    if pronoun in NEUTER:
        return "Person" not in entity.types
    return True


def _antecedents(state: DiscourseState, window: int, current_index: int,
                 current: Sequence[Mention], before: int):
    """(entity, turn index) candidates, most recent first."""
    out = []
    for m in sorted(current, key=lambda m: -m.span.start):
        if m.span.end <= before:
            out.append((m.entity, current_index))
    for turn in reversed(state.turns[-window:] if window > 0 else ()):
        items = [(m.span.start, m.entity) for m in turn.mentions]
        items += [(p.position, state.registry[p.entity_id].entity)
                  for p in turn.pronoun_links if p.entity_id in state.registry]
        for _, ent in sorted(items, key=lambda x: -x[0]):
            out.append((ent, turn.index))
    return out


def resolve_pronouns(state: DiscourseState, tokens: Sequence[Token], window: int = DEFAULT_WINDOW, *,
                     current: Sequence[Mention] = (), turn_index: int | None = None,
                     skip: Iterable[int] = ()) -> list[PronounLink]:
    """Link third-person pronouns to the most recent type-compatible mention.

    he/she prefer Person-typed antecedents and fall back to entities typed only
    as Thing (fictional characters). ``current`` holds mentions already found
    in this utterance; only those ending before the pronoun are eligible.
    """
    if turn_index is None:
        turn_index = state.next_index()
    skip = set(skip)
    links = []
    for tok in tokens:
        word = tok.surface
        if word not in RESOLVABLE or tok.position in skip:
            continue
        cands = _antecedents(state, window, turn_index, current, tok.position)
        chosen = None
        if word in MASCULINE or word in FEMININE:
            chosen = next((c for c in cands if "Person" in c[0].types), None)
            if chosen is None:
                chosen = next((c for c in cands if c[0].primary_type == "Thing"), None)
        else:
            chosen = next((c for c in cands if _compatible(word, c[0])), None)
        if chosen is not None:
            links.append(PronounLink(tok.position, word, chosen[0].id, chosen[1]))
    return links


def _mention_record(m: Mention) -> dict[str, Any]:
    link = m.link or web_link(m.entity)
    return {
        "start": m.span.start,
        "end": m.span.end,
        "text": m.span.text,
        "source": m.span.source,
        "score": m.final_score,
        "entity": m.entity.to_record(),
        "link": {"url": link.article_url, "kb_key": list(link.kb_key)},
    }


def turn_to_record(conversation_id: str, turn: Turn) -> dict[str, Any]:
    return {
        "conversation_id": conversation_id,
        "turn": turn.index,
        "speaker": turn.speaker,
        "utterance": turn.utterance,
        "mentions": [_mention_record(m) for m in turn.mentions],
        "pronoun_links": [
            {"position": p.position, "pronoun": p.pronoun, "entity_id": p.entity_id,
             "antecedent_turn": p.antecedent_turn}
            for p in turn.pronoun_links
        ],
    }


def dump_state(state: DiscourseState) -> str:
    return "".join(json.dumps(turn_to_record(state.conversation_id, t), ensure_ascii=False) + "\n"
                   for t in state.turns)


def load_state(text: str, conversation_id: str | None = None) -> DiscourseState:
    state = None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            mentions = []
            for mr in rec.get("mentions", []):
                ent = KgEntity.from_record(mr["entity"])
                span = CandidateSpan(mr["start"], mr["end"], mr["text"], mr.get("source", "ngram-fallback"))
                link = mr.get("link") or {}
                kb_key = tuple(link.get("kb_key") or (ent.name, ent.primary_type))
                mentions.append(Mention(span, ent, float(mr["score"]), WebLink(link.get("url"), kb_key)))
            plinks = tuple(PronounLink(p["position"], p.get("pronoun", ""), p["entity_id"], p["antecedent_turn"])
                           for p in rec.get("pronoun_links", []))
            turn = Turn(int(rec["turn"]), rec.get("speaker", "user"), rec.get("utterance", ""),
                        tuple(mentions), plinks)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad discourse record: {exc}", lineno) from None
        if state is None:
            state = DiscourseState(conversation_id or rec.get("conversation_id", "default"))
        state = sync(state, turn)
    return state or DiscourseState(conversation_id or "default")
