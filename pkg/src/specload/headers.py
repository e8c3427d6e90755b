"""HTTP response header parsing shared by the HAR importer and live loader."""

from __future__ import annotations

from email.utils import parsedate_to_datetime

from .trace import CacheDirectives


def kind_from_mime(mime: str | None) -> str:
    mime = (mime or "").split(";")[0].strip().lower()
    if mime in ("text/html", "application/xhtml+xml"):
        return "html"
    if "javascript" in mime or "ecmascript" in mime:
        return "script"
    if mime == "text/css":
        return "stylesheet"
    if mime.startswith("image/"):
        return "image"
    return "other"


def parse_http_date(value: str | None) -> float | None:
    if not value:
        return None
    try:
        return parsedate_to_datetime(value).timestamp()
    except (TypeError, ValueError):
        return None


def directives_from_mapping(headers) -> CacheDirectives:
    """Cache directives from a case-insensitive header mapping."""
    cc = (headers.get("Cache-Control") or "").lower()
    tokens = [t.strip() for t in cc.split(",") if t.strip()]
    no_store = "no-store" in tokens
    no_cache = any(t == "no-cache" or t.startswith("no-cache=") for t in tokens)
    max_age = None
    for t in tokens:
        if t.startswith("max-age="):
            try:
                max_age = int(t.split("=", 1)[1])
            except ValueError:
                pass
    last_modified = parse_http_date(headers.get("Last-Modified"))
    return CacheDirectives(
        no_store=no_store,
        no_cache=no_cache,
        max_age=max_age,
        expires=parse_http_date(headers.get("Expires")),
        has_validator=bool(headers.get("ETag")) or last_modified is not None,
        last_modified=last_modified,
    )


class _PairMapping:
    """Adapter: HAR-style [{name, value}] lists as a header mapping."""

    def __init__(self, pairs):
        self._pairs = pairs or []

    def get(self, name: str, default=None):
        name = name.lower()
        for h in self._pairs:
            if str(h.get("name", "")).lower() == name:
                return str(h.get("value", ""))
        return default


def directives_from_pairs(pairs: list) -> CacheDirectives:
    return directives_from_mapping(_PairMapping(pairs))
