"""ASR-style text normalization and tokenization."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class Token:
    surface: str
    position: int
    is_stop: bool = False


@dataclass(frozen=True)
class StopList:
    words: frozenset[str]

    def __post_init__(self):
        if not self.words:
            raise ConfigError("stop list is empty")

    def __contains__(self, word: str) -> bool:
        return word in self.words

    def __len__(self) -> int:
        return len(self.words)


def normalize(raw: str) -> str:
    """Lowercase, replace every non-alphanumeric character by a space, squeeze spaces.

    Digits and non-ASCII letters are kept (case-folded).
    """
    folded = raw.casefold()
    chars = [c if c.isalnum() else " " for c in folded]
    return " ".join("".join(chars).split())


def tokenize(normalized: str, stops: StopList | None = None) -> list[Token]:
    if not normalized:
        return []
    words = stops.words if stops is not None else frozenset()
    return [Token(w, i, w in words) for i, w in enumerate(normalized.split(" "))]


def load_stoplist(path: str | Path) -> StopList:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"stop list not found: {path}")
    return _parse_stoplist(path.read_text(encoding="utf-8"), str(path))


def _parse_stoplist(text: str, origin: str) -> StopList:
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        words.add(line.casefold())
    if not words:
        raise ConfigError(f"stop list has no entries: {origin}")
    return StopList(frozenset(words))


def default_stoplist() -> StopList:
    text = resources.files("convlink").joinpath("resources/stopwords.txt").read_text(encoding="utf-8")
    return _parse_stoplist(text, "<bundled stopwords>")


def surfaces(tokens: list[Token]) -> list[str]:
    return [t.surface for t in tokens]
