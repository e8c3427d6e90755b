"""Browsing-trace data model and JSONL codec.

A trace is a sequence of page visits.  Each visit carries the main
resource, the subresources the page actually requested, and optional
per-subresource discovery offsets (milliseconds after the main resource
was parsed).  On disk a trace is UTF-8 JSON Lines, one visit per line:

    {"user": "u1", "ts": 1265000000.0,
     "main": {"url": ..., "kind": "html", "size": ..., "cc": {...}, "fetched_at": ...},
     "subs": [...], "offsets": [...]}

``cc`` holds cache-control facts with only the present keys serialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import EmptyTrace, SchemaError

RESOURCE_KINDS = ("html", "script", "stylesheet", "image", "other")


@dataclass(frozen=True)
class CacheDirectives:
    """Cache-relevant response facts for one resource.

    ``no_store`` wins over everything else; ``max_age`` is seconds;
    ``expires`` and ``last_modified`` are absolute epoch seconds.
    ``has_validator`` records whether the response carried an ETag or
    Last-Modified header usable for conditional requests.
    """

    no_store: bool = False
    no_cache: bool = False
    max_age: int | None = None
    expires: float | None = None
    has_validator: bool = False
    last_modified: float | None = None

    def to_json(self) -> dict:
        out: dict = {}
        if self.no_store:
            out["no_store"] = True
        if self.no_cache:
            out["no_cache"] = True
        if self.max_age is not None:
            out["max_age"] = self.max_age
        if self.expires is not None:
            out["expires"] = self.expires
        if self.has_validator:
            out["has_validator"] = True
        if self.last_modified is not None:
            out["last_modified"] = self.last_modified
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CacheDirectives":
        if not isinstance(obj, dict):
            raise ValueError("cc must be an object")
        return cls(
            no_store=bool(obj.get("no_store", False)),
            no_cache=bool(obj.get("no_cache", False)),
            max_age=obj.get("max_age"),
            expires=obj.get("expires"),
            has_validator=bool(obj.get("has_validator", False)),
            last_modified=obj.get("last_modified"),
        )


@dataclass(frozen=True)
class ResourceRecord:
    """One observed resource response."""

    url: str
    kind: str
    size_bytes: int
    cache_directives: CacheDirectives = field(default_factory=CacheDirectives)
    fetched_at: float = 0.0

    def __post_init__(self):
        if self.kind not in RESOURCE_KINDS:
            raise ValueError(f"unknown resource kind {self.kind!r}")
        if self.size_bytes < 0:
            raise ValueError("size_bytes must be >= 0")

    def to_json(self) -> dict:
        return {
            "url": self.url,
            "kind": self.kind,
            "size": self.size_bytes,
            "cc": self.cache_directives.to_json(),
            "fetched_at": self.fetched_at,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ResourceRecord":
        if not isinstance(obj, dict):
            raise ValueError("resource must be an object")
        for key in ("url", "kind", "size"):
            if key not in obj:
                raise ValueError(f"resource missing {key!r}")
        return cls(
            url=obj["url"],
            kind=obj["kind"],
            size_bytes=int(obj["size"]),
            cache_directives=CacheDirectives.from_json(obj.get("cc", {})),
            fetched_at=float(obj.get("fetched_at", 0.0)),
        )


@dataclass(frozen=True)
class PageVisit:
    """One page load: main resource plus the subresources it requested.

    ``discovery_offsets`` gives, per subresource, the non-negative
    milliseconds after main-resource parse at which the subresource was
    discovered.  Missing offsets mean all-zero (everything discoverable
    the moment parsing finishes).
    """

    user_id: str
    timestamp: float
    main: ResourceRecord
    subresources: tuple[ResourceRecord, ...]
    discovery_offsets: tuple[float, ...] = ()

    def __post_init__(self):
        if self.main.kind != "html":
            raise ValueError("main resource must be html")
        urls = [r.url for r in self.subresources]
        if len(set(urls)) != len(urls):
            raise ValueError("duplicate subresource URL within one visit")
        if self.discovery_offsets and len(self.discovery_offsets) != len(self.subresources):
            raise ValueError("discovery_offsets length mismatch")
        if any(off < 0 for off in self.discovery_offsets):
            raise ValueError("discovery offsets must be >= 0")

    @property
    def offsets(self) -> tuple[float, ...]:
        if self.discovery_offsets:
            return self.discovery_offsets
        return (0.0,) * len(self.subresources)

    def to_json(self) -> dict:
        out = {
            "user": self.user_id,
            "ts": self.timestamp,
            "main": self.main.to_json(),
            "subs": [r.to_json() for r in self.subresources],
        }
        if self.discovery_offsets and any(self.discovery_offsets):
            out["offsets"] = list(self.discovery_offsets)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PageVisit":
        if not isinstance(obj, dict):
            raise ValueError("visit must be an object")
        for key in ("user", "ts", "main", "subs"):
            if key not in obj:
                raise ValueError(f"visit missing {key!r}")
        subs = obj["subs"]
        if not isinstance(subs, list):
            raise ValueError("subs must be a list")
        offsets = obj.get("offsets", [])
        if not isinstance(offsets, list):
            raise ValueError("offsets must be a list")
        return cls(
            user_id=str(obj["user"]),
            timestamp=float(obj["ts"]),
            main=ResourceRecord.from_json(obj["main"]),
            subresources=tuple(ResourceRecord.from_json(s) for s in subs),
            discovery_offsets=tuple(float(x) for x in offsets),
        )


@dataclass
class Trace:
    """Visits ordered by timestamp."""

    visits: list[PageVisit]

    def __iter__(self) -> Iterator[PageVisit]:
        return iter(self.visits)

    def __len__(self) -> int:
        return len(self.visits)

    def span_seconds(self) -> float:
        if not self.visits:
            raise EmptyTrace("trace has no visits")
        return self.visits[-1].timestamp - self.visits[0].timestamp


def save_trace(trace: Trace | Iterable[PageVisit], path) -> None:
    """Write a trace as JSON Lines.  Deterministic byte output."""
    visits = trace.visits if isinstance(trace, Trace) else list(trace)
    with open(path, "w", encoding="utf-8") as fh:
        for visit in visits:
            fh.write(json.dumps(visit.to_json(), sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def load_trace(path) -> Trace:
    """Read a JSONL trace, sorting visits by timestamp.

    Ties keep file order.  Raises SchemaError with the offending line
    number for records that do not parse.
    """
    visits: list[PageVisit] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", line=lineno) from exc
            try:
                visits.append(PageVisit.from_json(obj))
            except (ValueError, TypeError, KeyError) as exc:
                raise SchemaError(str(exc), line=lineno) from exc
    visits.sort(key=lambda v: v.timestamp)
    return Trace(visits=visits)
