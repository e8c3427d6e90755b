"""HAR 1.2 import (one-way: HAR in, trace visits out)."""

from __future__ import annotations

import json
import logging
from datetime import datetime

from .errors import SchemaError
from .headers import directives_from_pairs, kind_from_mime
from .trace import PageVisit, ResourceRecord
from .urls import normalize_url

log = logging.getLogger(__name__)


def _parse_iso(value: str | None) -> float | None:
    if not value:
        return None
    try:
        return datetime.fromisoformat(value.replace("Z", "+00:00")).timestamp()
    except ValueError:
        return None


def _record_from_entry(entry: dict) -> ResourceRecord | None:
    request = entry.get("request", {})
    response = entry.get("response", {})
    try:
        url = normalize_url(request.get("url", ""))
    except Exception:
        return None
    content = response.get("content", {}) or {}
    size = content.get("size")
    if size is None or size < 0:
        size = response.get("bodySize", 0)
    size = max(0, int(size or 0))
    return ResourceRecord(
        url=url,
        kind=kind_from_mime(content.get("mimeType", "")),
        size_bytes=size,
        cache_directives=directives_from_pairs(response.get("headers", [])),
        fetched_at=_parse_iso(entry.get("startedDateTime")) or 0.0,
    )


def import_har(path) -> list[PageVisit]:
    """Convert a HAR 1.2 capture into page visits.

    One visit per HAR page: the page's first HTML entry becomes the main
    resource, every other entry of that page a subresource.  Entries
    without a page reference are dropped and pages without an HTML entry
    are skipped; both counts are reported through the module logger.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not a HAR file: {exc.msg}") from exc
    logdoc = doc.get("log")
    if not isinstance(logdoc, dict):
        raise SchemaError("not a HAR file: missing log object")
    pages = logdoc.get("pages", []) or []
    entries = logdoc.get("entries", []) or []

    by_page: dict[str, list[dict]] = {p.get("id"): [] for p in pages if p.get("id")}
    dropped = 0
    for entry in entries:
        ref = entry.get("pageref")
        if ref in by_page:
            by_page[ref].append(entry)
        else:
            dropped += 1
    if dropped:
        log.warning("dropped %d HAR entries with no page reference", dropped)

    visits: list[PageVisit] = []
    skipped_pages = 0
    for page in pages:
        page_entries = by_page.get(page.get("id"), [])
        records = []
        for entry in page_entries:
            rec = _record_from_entry(entry)
            if rec is not None:
                records.append((entry, rec))
        main_idx = next((i for i, (_, r) in enumerate(records) if r.kind == "html"), None)
        if main_idx is None:
            skipped_pages += 1
            continue
        main_entry, main = records[main_idx]
        main_start = _parse_iso(main_entry.get("startedDateTime")) or 0.0
        main_end = main_start + float(main_entry.get("time", 0) or 0) / 1000.0
        subs: list[ResourceRecord] = []
        offsets: list[float] = []
        seen = {main.url}
        for i, (entry, rec) in enumerate(records):
            if i == main_idx or rec.url in seen:
                continue
            seen.add(rec.url)
            subs.append(rec)
            start = _parse_iso(entry.get("startedDateTime"))
            offsets.append(max(0.0, (start - main_end) * 1000.0) if start else 0.0)
        ts = _parse_iso(page.get("startedDateTime")) or main_start
        visits.append(
            PageVisit(
                user_id="har",
                timestamp=ts,
                main=main,
                subresources=tuple(subs),
                discovery_offsets=tuple(offsets),
            )
        )
    if skipped_pages:
        log.warning("skipped %d HAR pages with no HTML entry", skipped_pages)
    visits.sort(key=lambda v: v.timestamp)
    return visits
