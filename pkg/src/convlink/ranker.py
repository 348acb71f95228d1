"""Candidate ranking: word-overlap alignment, overlap/context scoring, pruning, merging."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .context_expect import EMPTY, ActiveExpectations, num_matches
from .kg_backend import KgEntity
from .segmenter import CandidateSpan
from .text_norm import StopList, Token, default_stoplist, tokenize, normalize

if TYPE_CHECKING:
    from .discourse import WebLink

STOP_PENALTY = 0.75
DEFAULT_THRESHOLD = 150.0

SCORING_MODES = ("segmentation", "overlap", "context")
THRESHOLD_STAGES = ("pre-context", "post-context")


@dataclass(frozen=True)
class WordVector:
    elements: tuple[float, ...]
    # (candidate index, utterance index) of every matched token, in order
    pairs: tuple[tuple[int, int], ...] = ()

    @property
    def zero_count(self) -> int:
        return sum(1 for x in self.elements if x == 0)

    def __len__(self) -> int:
        return len(self.elements)


def _chain_key(k: int, gap: int, path: tuple[tuple[int, int], ...]):
    return (-k, gap, tuple(j for _, j in path), tuple(i for i, _ in path))


def best_chain(cand: Sequence[str], utt: Sequence[str]) -> tuple[tuple[int, int], ...]:
    """Order-preserving token alignment.

    Maximizes matched candidate tokens, then minimizes the total internal gap
    (skipped candidate + skipped utterance tokens between consecutive matches),
    then prefers the leftmost match positions.
    """
    pairs = [(i, j) for i, a in enumerate(cand) for j, b in enumerate(utt) if a == b]
    if not pairs:
        return ()
    best: list[tuple[int, int, tuple]] = []
    for p, (i, j) in enumerate(pairs):
        top = (1, 0, ((i, j),))
        for q in range(p):
            pi, pj = pairs[q]
            if pi >= i or pj >= j:
                continue
            k, gap, path = best[q]
            cand_state = (k + 1, gap + (i - pi - 1) + (j - pj - 1), path + ((i, j),))
            if _chain_key(*cand_state) < _chain_key(*top):
                top = cand_state
        best.append(top)
    return min(best, key=lambda s: _chain_key(*s))[2]


def vector_from_chain(cand: Sequence[Token], chain: Iterable[tuple[int, int]],
                      stop_penalty: float = STOP_PENALTY) -> WordVector:
    elements = [0.0] * len(cand)
    prev = None
    for i, j in chain:
        value = 1.0
        if prev is not None:
            value *= 1.0 / (i - prev[0])  # 1 / (skipped candidate tokens + 1)
            value *= 1.0 / (j - prev[1])  # 1 / (skipped utterance tokens + 1)
        if cand[i].is_stop:
            value *= stop_penalty
        elements[i] = value
        prev = (i, j)
    return WordVector(tuple(elements), tuple(chain))


def align(candidate_name_tokens: Sequence[Token], utterance_tokens: Sequence[Token],
          stop_penalty: float = STOP_PENALTY) -> WordVector:
    if not candidate_name_tokens:
        raise ValueError("candidate name has no tokens")
    chain = best_chain([t.surface for t in candidate_name_tokens], [t.surface for t in utterance_tokens])
    return vector_from_chain(candidate_name_tokens, chain, stop_penalty)


def overlap_score(vector: WordVector, base_score: float) -> float:
    return sum(vector.elements) * (1.0 / (vector.zero_count + 1)) * base_score


def context_score(overlap: float, matches: int) -> float:
    return overlap * (matches + 1)


@dataclass(frozen=True)
class ScoredCandidate:
    span: CandidateSpan
    entity: KgEntity
    vector: WordVector
    overlap_score: float
    matches: int
    final_score: float


@dataclass(frozen=True)
class Mention:
    span: CandidateSpan
    entity: KgEntity
    final_score: float
    link: "WebLink | None" = field(default=None, compare=False)

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.span.start, self.span.end, self.entity.id)


def _tighten(span: CandidateSpan, vector: WordVector, utterance_tokens: Sequence[Token]) -> CandidateSpan:
    if not vector.pairs:
        return span
    start = span.start + vector.pairs[0][1]
    end = span.start + vector.pairs[-1][1] + 1
    if (start, end) == (span.start, span.end):
        return span
    text = " ".join(t.surface for t in utterance_tokens[start:end])
    return CandidateSpan(start, end, text, span.source)


def _name_tokens(entity: KgEntity, stops: StopList) -> list[Token]:
    return tokenize(normalize(entity.name), stops)


def score_entity(span: CandidateSpan, entity: KgEntity, utterance_tokens: Sequence[Token],
                 active: ActiveExpectations = EMPTY, *, stops: StopList | None = None,
                 stop_penalty: float = STOP_PENALTY, scoring: str = "context") -> ScoredCandidate:
    """Score one pooled entity for one span.

    The entity name is aligned against the span's own tokens; the resulting
    candidate span is narrowed to the matched region.
    """
    stops = stops or default_stoplist()
    name = _name_tokens(entity, stops)
    window = list(utterance_tokens[span.start:span.end])
    vector = align(name, window, stop_penalty)
    if scoring == "segmentation":
        overlap, matches = entity.base_score, 0
    else:
        overlap = overlap_score(vector, entity.base_score)
        matches = num_matches(entity, active) if scoring == "context" else 0
    final = context_score(overlap, matches)
    return ScoredCandidate(_tighten(span, vector, utterance_tokens), entity, vector, overlap, matches, final)


def rank_span(span: CandidateSpan, pool: Sequence[KgEntity], utterance_tokens: Sequence[Token],
              active: ActiveExpectations = EMPTY, **kwargs) -> ScoredCandidate | None:
    """Best-scoring pooled entity for a span; ties go to the higher base score, then lower id."""
    best = None
    best_key = None
    for entity in pool:
        sc = score_entity(span, entity, utterance_tokens, active, **kwargs)
        key = (-sc.final_score, -entity.base_score, entity.id)
        if best_key is None or key < best_key:
            best, best_key = sc, key
    return best


def prune(candidates: Iterable[ScoredCandidate], threshold: float = DEFAULT_THRESHOLD,
          stage: str = "post-context") -> list[ScoredCandidate]:
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if stage not in THRESHOLD_STAGES:
        raise ValueError(f"unknown threshold stage {stage!r}")
    if stage == "pre-context":
        return [c for c in candidates if c.overlap_score > threshold and c.final_score > 0]
    return [c for c in candidates if c.final_score > threshold]


def merge(candidates: Iterable[ScoredCandidate]) -> list[Mention]:
    """Resolve overlapping candidates into disjoint mentions.

    Candidates are taken best-first. One that overlaps an accepted mention of a
    different entity is dropped. One that overlaps a single accepted mention of
    the same entity replaces its span when wider, otherwise it is absorbed.
    """
    order = sorted(candidates, key=lambda c: (-c.final_score, -c.span.width, c.span.start, c.entity.id))
    accepted: list[Mention] = []
    for c in order:
        hits = [m for m in accepted if m.span.overlaps(c.span)]
        if not hits:
            accepted.append(Mention(c.span, c.entity, c.final_score))
            continue
        if any(m.entity.id != c.entity.id for m in hits):
            continue
        if len(hits) == 1 and c.span.width > hits[0].span.width:
            old = hits[0]
            accepted[accepted.index(old)] = Mention(c.span, c.entity, max(old.final_score, c.final_score))
    return sorted(accepted, key=lambda m: (m.span.start, m.span.end))
