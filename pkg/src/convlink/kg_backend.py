"""Knowledge-graph candidate pooling over a local snapshot or the remote search API."""
from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import requests

from .errors import BackendError, InputError, IntegrityError, ParseError, ProtocolError, ValidationError
from .text_norm import StopList, default_stoplist, normalize

log = logging.getLogger(__name__)

DEFAULT_POOL_SIZE = 6
SNAPSHOT_FORMAT = "convlink-snapshot/1"
KG_SEARCH_URL = "https://kgsearch.googleapis.com/v1/entities:search"


@dataclass(frozen=True)
class KgEntity:
    id: str
    name: str
    types: tuple[str, ...] = ("Thing",)
    base_score: float = 0.0
    short_desc: str = ""
    detailed_desc: str = ""
    source_url: str | None = None

    def __post_init__(self):
        if not self.name:
            raise InputError(f"entity {self.id!r} has an empty name")
        types = tuple(self.types) or ("Thing",)
        if "Thing" not in types:
            types = types + ("Thing",)
        object.__setattr__(self, "types", types)
        if self.base_score < 0:
            raise InputError(f"entity {self.id!r} has negative base score")

    @property
    def primary_type(self) -> str:
        for t in self.types:
            if t != "Thing":
                return t
        return "Thing"

    def name_tokens(self) -> list[str]:
        return normalize(self.name).split()

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "types": list(self.types),
            "score": self.base_score,
            "description": self.short_desc,
            "detailed_description": self.detailed_desc,
            "url": self.source_url,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "KgEntity":
        return cls(
            id=str(rec["id"]),
            name=rec["name"],
            types=tuple(rec.get("types") or ("Thing",)),
            base_score=float(rec.get("score", 0.0)),
            short_desc=rec.get("description") or "",
            detailed_desc=rec.get("detailed_description") or "",
            source_url=rec.get("url") or None,
        )

    def scaled(self, factor: float) -> "KgEntity":
        return KgEntity(self.id, self.name, self.types, self.base_score * factor,
                        self.short_desc, self.detailed_desc, self.source_url)


def _sort_key(e: KgEntity):
    return (-e.base_score, e.id)


def local_score(entity: KgEntity, phrase_tokens: Iterable[str]) -> float:
    """Stored base score scaled by the fraction of name tokens present in the phrase."""
    name = entity.name_tokens()
    if not name:
        return 0.0
    phrase = set(phrase_tokens)
    hit = sum(1 for t in name if t in phrase)
    return entity.base_score * (hit / len(name))


@dataclass
class SnapshotIndex:
    entities: dict[str, KgEntity]
    index: dict[str, frozenset[str]]
    stops: StopList = field(default_factory=default_stoplist)

    @classmethod
    def from_entities(cls, entities: Iterable[KgEntity], stops: StopList | None = None) -> "SnapshotIndex":
        by_id: dict[str, KgEntity] = {}
        postings: dict[str, set[str]] = {}
        for e in entities:
            if e.id in by_id:
                raise IntegrityError(f"duplicate entity id {e.id!r}")
            by_id[e.id] = e
            for tok in e.name_tokens():
                postings.setdefault(tok, set()).add(e.id)
        return cls(by_id, {k: frozenset(v) for k, v in postings.items()}, stops or default_stoplist())

    def __len__(self) -> int:
        return len(self.entities)

    def query(self, phrase: str, limit: int = DEFAULT_POOL_SIZE) -> list[KgEntity]:
        if limit < 1:
            raise InputError("limit must be >= 1")
        tokens = normalize(phrase).split()
        if not tokens:
            raise InputError("query phrase is empty after normalization")
        # stop words alone pull in most of the index, so look up content words when present
        keys = [t for t in tokens if t not in self.stops] or tokens
        ids: set[str] = set()
        for k in keys:
            ids |= self.index.get(k, frozenset())
        hits = [self.entities[i] for i in ids]
        hits = [e for e in hits if local_score(e, tokens) > 0]
        hits.sort(key=_sort_key)
        return hits[:limit]

    def scaled(self, factor: float) -> "SnapshotIndex":
        return SnapshotIndex({k: e.scaled(factor) for k, e in self.entities.items()}, self.index, self.stops)

    def save(self, path: str | Path) -> None:
        payload = {
            "format": SNAPSHOT_FORMAT,
            "entities": [self.entities[k].to_record() for k in sorted(self.entities)],
            "index": {k: sorted(v) for k, v in sorted(self.index.items())},
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")


def _parse_entity_line(line: str, lineno: int, origin: str) -> KgEntity:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno, origin) from None
    if not isinstance(rec, dict):
        raise ParseError("record is not an object", lineno, origin)
    for key in ("id", "name"):
        if key not in rec or rec[key] in (None, ""):
            raise ParseError(f"missing {key!r}", lineno, origin)
    types = rec.get("types", ["Thing"])
    if isinstance(types, str) or not isinstance(types, list):
        raise ParseError("'types' must be a list", lineno, origin)
    try:
        score = float(rec.get("score", 0.0))
    except (TypeError, ValueError):
        raise ParseError("'score' is not a number", lineno, origin) from None
    if score < 0:
        raise ValidationError("'score' must be non-negative", lineno, origin)
    rec["score"] = score
    return KgEntity.from_record(rec)


def build_snapshot(entity_file: str | Path, stops: StopList | None = None) -> SnapshotIndex:
    path = Path(entity_file)
    entities = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            e = _parse_entity_line(line, lineno, str(path))
            if e.id in seen:
                raise IntegrityError(f"{path}:{lineno}: duplicate id {e.id!r} (first on line {seen[e.id]})")
            seen[e.id] = lineno
            entities.append(e)
    return SnapshotIndex.from_entities(entities, stops)


def load_snapshot(path: str | Path, stops: StopList | None = None) -> SnapshotIndex:
    """Load either a saved index artifact or a raw line-delimited entity file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    head = text.lstrip()[:200]
    if head.startswith("{") and f'"{SNAPSHOT_FORMAT}"' in head:
        payload = json.loads(text)
        entities = [KgEntity.from_record(r) for r in payload["entities"]]
        snap = SnapshotIndex.from_entities(entities, stops)
        return snap
    return build_snapshot(path, stops)


class RemoteBackend:
    """Client for the public knowledge-graph entity search endpoint."""

    def __init__(self, api_key: str | None = None, *, url: str = KG_SEARCH_URL, timeout: float = 2.0,
                 retries: int = 1, session: requests.Session | None = None):
        self.api_key = api_key if api_key is not None else os.environ.get("KG_API_KEY")
        self.url = url
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()

    def _get(self, params: dict[str, Any]) -> Any:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.get(self.url, params=params, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = exc
                log.warning("kg request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = BackendError(f"kg service returned HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ProtocolError(f"kg service returned HTTP {resp.status_code}")
            try:
                return resp.json()
            except ValueError:
                raise ProtocolError("kg service returned a non-JSON body") from None
        raise BackendError(f"kg service unavailable: {last}")

    def query(self, phrase: str, limit: int = DEFAULT_POOL_SIZE) -> list[KgEntity]:
        if limit < 1:
            raise InputError("limit must be >= 1")
        phrase = normalize(phrase)
        if not phrase:
            raise InputError("query phrase is empty after normalization")
        params = {"query": phrase, "limit": limit}
        if self.api_key:
            params["key"] = self.api_key
        entities = parse_search_response(self._get(params))
        entities.sort(key=_sort_key)
        return entities[:limit]


def parse_search_response(payload: Any) -> list[KgEntity]:
    """Map a search response onto entities; unknown fields are ignored."""
    if not isinstance(payload, dict):
        raise ProtocolError("response is not a JSON object")
    items = payload.get("itemListElement", [])
    if not isinstance(items, list):
        raise ProtocolError("itemListElement is not a list")
    out: dict[str, KgEntity] = {}
    for item in items:
        try:
            result = item["result"]
            ent_id = str(result["@id"])
            name = result["name"]
            score = float(item.get("resultScore", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed search result: {exc!r}") from None
        types = result.get("@type", ["Thing"])
        if isinstance(types, str):
            types = [types]
        detail = result.get("detailedDescription") or {}
        if not name or ent_id in out:
            continue
        out[ent_id] = KgEntity(
            id=ent_id,
            name=name,
            types=tuple(types),
            base_score=max(score, 0.0),
            short_desc=result.get("description", "") or "",
            detailed_desc=detail.get("articleBody", "") or "",
            source_url=detail.get("url") or None,
        )
    return list(out.values())


class CachingBackend:
    """Memoizes (phrase, limit) -> results; safe for concurrent callers."""

    def __init__(self, inner):
        self.inner = inner
        self._cache: dict[tuple[str, int], list[KgEntity]] = {}
        self._lock = threading.Lock()

    def query(self, phrase: str, limit: int = DEFAULT_POOL_SIZE) -> list[KgEntity]:
        key = (normalize(phrase), limit)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return list(hit)
        result = self.inner.query(phrase, limit)
        with self._lock:
            self._cache.setdefault(key, result)
        return list(result)

    def __len__(self) -> int:
        return len(self._cache)


def query(backend, phrase: str, limit: int = DEFAULT_POOL_SIZE) -> list[KgEntity]:
    return backend.query(phrase, limit)
