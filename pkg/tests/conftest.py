from __future__ import annotations

from specload.trace import CacheDirectives, PageVisit, ResourceRecord, Trace


def rec(
    url: str,
    kind: str = "script",
    size: int = 1000,
    fetched_at: float = 0.0,
    **cc,
) -> ResourceRecord:
    return ResourceRecord(
        url=url,
        kind=kind,
        size_bytes=size,
        cache_directives=CacheDirectives(**cc),
        fetched_at=fetched_at,
    )


def visit(
    main_url: str,
    sub_urls,
    ts: float = 0.0,
    user: str = "u",
    size: int = 1000,
    offsets=None,
    **cc,
) -> PageVisit:
    main = rec(main_url, kind="html", size=size, fetched_at=ts, **cc)
    subs = tuple(rec(u, size=size, fetched_at=ts, **cc) for u in sub_urls)
    return PageVisit(
        user_id=user,
        timestamp=ts,
        main=main,
        subresources=subs,
        discovery_offsets=tuple(offsets) if offsets is not None else (),
    )


def trace_of(*visits) -> Trace:
    return Trace(visits=sorted(visits, key=lambda v: v.timestamp))
