"""Candidate span generation: parse-chunk collapsing, noun clusters, n-gram fallback."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Union

from .errors import ConfigError, InputError, ParseError
from .text_norm import Token, normalize

PARSE_CHUNK = "parse-chunk"
NOUN_CLUSTER = "noun-cluster"
NGRAM_FALLBACK = "ngram-fallback"

CHUNK_LABELS = frozenset({"NP", "VP", "S"})
NOUN_TAGS = frozenset({"noun", "propn", "num"})
MAX_NGRAM = 8

PRONOUNS = frozenset(
    "i me my mine myself you your yours yourself he him his himself she her hers herself "
    "it its itself we us our ours ourselves they them their theirs themselves".split()
)

# pronoun -> entity types under which the bare pronoun may itself name an entity
DEFAULT_PRONOUN_EXCEPTIONS: dict[str, frozenset[str]] = {
    "it": frozenset({"Movie"}),
    "us": frozenset({"Movie", "Country"}),
}

# Penn Treebank preterminal prefix -> coarse tag
_PTB_COARSE = [
    ("NNP", "propn"),
    ("NN", "noun"),
    ("VB", "verb"),
    ("MD", "verb"),
    ("JJ", "adj"),
    ("RB", "adv"),
    ("WRB", "adv"),
    ("PRP", "pron"),
    ("WP", "pron"),
    ("EX", "pron"),
    ("DT", "det"),
    ("PDT", "det"),
    ("WDT", "det"),
    ("IN", "adp"),
    ("TO", "adp"),
    ("CC", "conj"),
    ("CD", "num"),
    ("RP", "part"),
    ("POS", "part"),
    ("UH", "intj"),
    ("FW", "noun"),
]


@dataclass(frozen=True)
class CandidateSpan:
    start: int
    end: int
    text: str
    source: str

    @property
    def width(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "CandidateSpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass
class ParseTree:
    label: str
    children: list[Union["ParseTree", str]] = field(default_factory=list)

    def leaves(self) -> list[str]:
        out = []
        for child in self.children:
            if isinstance(child, str):
                out.append(child)
            else:
                out.extend(child.leaves())
        return out

    def is_preterminal(self) -> bool:
        return len(self.children) == 1 and isinstance(self.children[0], str)

    def __str__(self) -> str:
        inner = " ".join(str(c) for c in self.children)
        return f"({self.label} {inner})"


_SEXPR_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_bracketed(text: str) -> ParseTree:
    """Read a PTB-style bracketed tree, e.g. ``(S (NP (NN dog)))``."""
    tokens = _SEXPR_TOKEN.findall(text)
    if not tokens:
        raise ParseError("empty parse string")
    pos = 0

    def read() -> ParseTree:
        nonlocal pos
        if tokens[pos] != "(":
            raise ParseError(f"expected '(' at token {pos} in parse")
        pos += 1
        label = ""
        if pos < len(tokens) and tokens[pos] not in "()":
            label = tokens[pos]
            pos += 1
        node = ParseTree(label)
        while pos < len(tokens) and tokens[pos] != ")":
            if tokens[pos] == "(":
                node.children.append(read())
            else:
                node.children.append(tokens[pos])
                pos += 1
        if pos >= len(tokens):
            raise ParseError("unbalanced parentheses in parse")
        pos += 1
        return node

    tree = read()
    if pos != len(tokens):
        raise ParseError("trailing material after parse tree")
    # an unlabeled wrapper "( (S ...) )" is common in treebank dumps
    if not tree.label and len(tree.children) == 1 and isinstance(tree.children[0], ParseTree):
        tree = tree.children[0]
    return tree


def _base_label(label: str) -> str:
    # strip function tags and indices: NP-SBJ-1 -> NP
    return re.split(r"[-=]", label, maxsplit=1)[0] or label


def _walk_extents(tree: ParseTree, tokens: list[Token]):
    """Yield (node, start, end) for every node, in pre-order, with token extents.

    Leaves are normalized; one leaf may expand to several tokens and punctuation
    leaves expand to none.
    """
    out: list[tuple[ParseTree, int, int]] = []
    cursor = 0

    def visit(node: ParseTree):
        nonlocal cursor
        start = cursor
        slot = len(out)
        out.append((node, start, start))
        for child in node.children:
            if isinstance(child, str):
                for piece in normalize(child).split():
                    if cursor >= len(tokens) or tokens[cursor].surface != piece:
                        raise InputError(
                            f"parse leaf {child!r} does not match token "
                            f"{tokens[cursor].surface if cursor < len(tokens) else '<end>'!r} at {cursor}"
                        )
                    cursor += 1
            else:
                visit(child)
        out[slot] = (node, start, cursor)

    visit(tree)
    if cursor != len(tokens):
        raise InputError(f"parse covers {cursor} tokens, utterance has {len(tokens)}")
    return out


def _join(tokens: list[Token], start: int, end: int) -> str:
    return " ".join(t.surface for t in tokens[start:end])


def collapse_parse(tree: ParseTree, tokens: list[Token]) -> list[CandidateSpan]:
    spans: dict[tuple[int, int], CandidateSpan] = {}
    for node, start, end in _walk_extents(tree, tokens):
        if end <= start or _base_label(node.label) not in CHUNK_LABELS:
            continue
        spans.setdefault((start, end), CandidateSpan(start, end, _join(tokens, start, end), PARSE_CHUNK))
    return sorted(spans.values(), key=lambda s: (s.start, s.end))


def parse_tags(tree: ParseTree, tokens: list[Token]) -> list[str]:
    """Coarse POS tags read off the tree's preterminals."""
    tags = ["noun"] * len(tokens)
    for node, start, end in _walk_extents(tree, tokens):
        if node.is_preterminal():
            coarse = _coarse_from_ptb(node.label)
            for i in range(start, end):
                tags[i] = coarse
    return tags


def _coarse_from_ptb(label: str) -> str:
    for prefix, coarse in _PTB_COARSE:
        if label.startswith(prefix):
            return coarse
    return "other"


def noun_clusters(tokens: list[Token], tags: list[str]) -> list[CandidateSpan]:
    if len(tokens) != len(tags):
        raise InputError(f"{len(tokens)} tokens but {len(tags)} tags")
    spans = []
    start = None
    for i, tag in enumerate(list(tags) + [None]):
        if tag in NOUN_TAGS:
            if start is None:
                start = i
        elif start is not None:
            spans.append(CandidateSpan(start, i, _join(tokens, start, i), NOUN_CLUSTER))
            start = None
    return spans


def load_tag_lexicon(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"tag lexicon not found: {path}")
    return _parse_tag_lexicon(path.read_text(encoding="utf-8"), str(path))


def _parse_tag_lexicon(text: str, origin: str) -> dict[str, str]:
    lexicon = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ParseError("expected token<TAB>tag", lineno, origin)
        lexicon[normalize(parts[0])] = parts[1].strip().lower()
    return lexicon


def default_tag_lexicon() -> dict[str, str]:
    text = resources.files("convlink").joinpath("resources/tag_lexicon.tsv").read_text(encoding="utf-8")
    return _parse_tag_lexicon(text, "<bundled tag lexicon>")


def pos_tag(tokens: list[Token], lexicon: Mapping[str, str]) -> list[str]:
    # unknown words are assumed nouns: better to over-query than miss an entity
    return [lexicon.get(t.surface, "noun") for t in tokens]


def ngram_spans(tokens: list[Token], tags: list[str], max_len: int = MAX_NGRAM) -> list[CandidateSpan]:
    spans = []
    n = len(tokens)
    for start in range(n):
        for end in range(start + 1, min(n, start + max_len) + 1):
            if any(tags[i] in NOUN_TAGS for i in range(start, end)):
                spans.append(CandidateSpan(start, end, _join(tokens, start, end), NGRAM_FALLBACK))
    return spans


def _is_dropped_pronoun(
    span: CandidateSpan,
    tokens: list[Token],
    active_types: Iterable[str],
    exceptions: Mapping[str, Iterable[str]],
) -> bool:
    if span.width != 1:
        return False
    word = tokens[span.start].surface
    if word not in PRONOUNS:
        return False
    allowed = exceptions.get(word)
    return not (allowed and set(allowed) & set(active_types))


def generate_candidates(
    tokens: list[Token],
    parse: ParseTree | None = None,
    active_types: Iterable[str] = (),
    *,
    lexicon: Mapping[str, str] | None = None,
    exceptions: Mapping[str, Iterable[str]] | None = None,
    max_ngram: int = MAX_NGRAM,
) -> list[CandidateSpan]:
    """All candidate spans for an utterance, deduplicated by (start, end).

    With a parse, NP/VP/S constituents are used; without one, every n-gram up
    to ``max_ngram`` tokens holding a noun-tagged token. Noun clusters are added
    either way. Bare pronouns are dropped unless excepted for an active type.
    """
    if not tokens:
        return []
    if lexicon is None:
        lexicon = default_tag_lexicon()
    if exceptions is None:
        exceptions = DEFAULT_PRONOUN_EXCEPTIONS
    active_types = frozenset(active_types)

    if parse is not None:
        primary = collapse_parse(parse, tokens)
        tags = parse_tags(parse, tokens)
    else:
        tags = pos_tag(tokens, lexicon)
        primary = ngram_spans(tokens, tags, max_ngram)

    merged: dict[tuple[int, int], CandidateSpan] = {}
    for span in primary + noun_clusters(tokens, tags):
        if _is_dropped_pronoun(span, tokens, active_types, exceptions):
            continue
        merged.setdefault((span.start, span.end), span)
    # an excepted pronoun is usually tagged pron, so it never reaches a cluster
    for i, tok in enumerate(tokens):
        allowed = exceptions.get(tok.surface)
        if tok.surface in PRONOUNS and allowed and set(allowed) & active_types:
            merged.setdefault((i, i + 1), CandidateSpan(i, i + 1, tok.surface, NOUN_CLUSTER))
    return sorted(merged.values(), key=lambda s: (s.start, s.end))
