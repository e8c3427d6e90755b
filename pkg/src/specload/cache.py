"""Browser-style HTTP cache semantics over resource metadata.

Entries hold metadata only (no bodies): enough to decide, for each
request, whether the client would serve it locally (fresh hit), send a
conditional request (expired, revalidate), or fetch in full (miss).
Revalidation is modeled as always answered with 304, costing one round
trip and zero body bytes.

A cached entry is *fresh* at time t iff its freshness lifetime is known
and ``t < stored_at + lifetime``.  Resources marked no-store bypass the
normal store entirely and live in a temporary per-page cache that is
cleared when the page completes; while present they serve as fresh,
which is the whole point of holding them for the page being loaded.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum

from .errors import EmptyTrace
from .trace import CacheDirectives, ResourceRecord, Trace
from .urls import website_key


class LookupOutcome(Enum):
    FRESH_HIT = "fresh"
    EXPIRED_REVALIDATE = "revalidate"
    MISS = "miss"


def freshness_lifetime(
    directives: CacheDirectives,
    fetched_at: float,
    last_modified: float | None = None,
) -> float | None:
    """Seconds the response stays fresh from ``fetched_at``, or None.

    Precedence: no-cache forces immediate expiry; then explicit max-age;
    then an Expires deadline (clamped at zero when already past); then
    the 10%-of-age heuristic off Last-Modified.  None means the entry is
    never fresh and every subsequent request must revalidate.
    """
    if directives.no_cache:
        return None
    if directives.max_age is not None:
        return float(max(0, directives.max_age))
    if directives.expires is not None:
        return max(0.0, directives.expires - fetched_at)
    if last_modified is None:
        last_modified = directives.last_modified
    if last_modified is not None:
        return max(0.0, 0.1 * (fetched_at - last_modified))
    return None


@dataclass
class CacheEntry:
    url: str
    size_bytes: int
    stored_at: float
    lifetime: float | None
    has_validator: bool
    last_access: float
    seq: int = 0
    validator: str | None = None
    directives: CacheDirectives = field(default_factory=CacheDirectives)

    def is_fresh(self, now: float) -> bool:
        return self.lifetime is not None and now < self.stored_at + self.lifetime


@dataclass
class CacheCounters:
    fresh_hits: int = 0
    revalidations: int = 0
    misses: int = 0
    bytes_fetched: int = 0
    bytes_saved_by_304: int = 0

    @property
    def requests(self) -> int:
        return self.fresh_hits + self.revalidations + self.misses


class CacheStore:
    """LRU-bounded metadata cache with a capacity-exempt temporary side.

    ``capacity_bytes`` may be ``math.inf``.  Counter updates happen in
    ``lookup`` (request classification) and ``admit`` (byte accounting);
    ``classify`` is the pure read used by planners that must not count
    as traffic.
    """

    def __init__(self, capacity_bytes: float = 6 * 1024 * 1024):
        self.capacity_bytes = capacity_bytes
        self.entries: "OrderedDict[str, CacheEntry]" = OrderedDict()
        self.temp: dict[str, CacheEntry] = {}
        self.counters = CacheCounters()
        self._seq = 0
        self._used = 0

    @property
    def used_bytes(self) -> int:
        return self._used

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def classify(self, url: str, now: float) -> LookupOutcome:
        """Classification only; no counters, no recency updates."""
        if url in self.temp:
            return LookupOutcome.FRESH_HIT
        entry = self.entries.get(url)
        if entry is None:
            return LookupOutcome.MISS
        if entry.is_fresh(now):
            return LookupOutcome.FRESH_HIT
        return LookupOutcome.EXPIRED_REVALIDATE

    def copy(self) -> "CacheStore":
        """Independent deep copy (entries, recency order, counters)."""
        import copy as _copy

        return _copy.deepcopy(self)


def lookup(store: CacheStore, url: str, now: float) -> LookupOutcome:
    """Classify one request and record it in the store's counters.

    Any hit (fresh or expired) refreshes the entry's recency for LRU
    purposes.
    """
    outcome = store.classify(url, now)
    if outcome is LookupOutcome.MISS:
        store.counters.misses += 1
        return outcome
    if url in store.temp:
        entry = store.temp[url]
    else:
        entry = store.entries[url]
        store.entries.move_to_end(url)
    entry.last_access = now
    entry.seq = store._next_seq()
    if outcome is LookupOutcome.FRESH_HIT:
        store.counters.fresh_hits += 1
    else:
        store.counters.revalidations += 1
    return outcome


def admit(
    store: CacheStore,
    record: ResourceRecord,
    now: float,
    validator: str | None = None,
) -> None:
    """Store a fetched (or revalidated) response's metadata.

    no-store responses go to the temporary cache and are exempt from
    capacity.  A record whose URL is already present but expired is a
    revalidation re-admit: the body was not transferred, so its bytes
    count as saved, and the freshness lifetime is recomputed from the
    directives as of now.  Entries never fit above capacity; admitting
    one evicts least-recently-accessed entries until it does, and an
    entry larger than the whole cache is simply not kept.
    """
    d = record.cache_directives
    size = record.size_bytes
    lifetime = freshness_lifetime(d, fetched_at=now)
    if d.no_store:
        store.counters.bytes_fetched += size
        store.temp[record.url] = CacheEntry(
            url=record.url,
            size_bytes=size,
            stored_at=now,
            lifetime=lifetime,
            has_validator=d.has_validator,
            last_access=now,
            seq=store._next_seq(),
            validator=validator,
            directives=d,
        )
        return

    prior = store.entries.pop(record.url, None)
    if prior is not None:
        store._used -= prior.size_bytes
    if prior is not None and not prior.is_fresh(now):
        store.counters.bytes_saved_by_304 += size
    else:
        store.counters.bytes_fetched += size

    if size > store.capacity_bytes:
        return
    while store._used + size > store.capacity_bytes and store.entries:
        _, evicted = store.entries.popitem(last=False)
        store._used -= evicted.size_bytes
    store.entries[record.url] = CacheEntry(
        url=record.url,
        size_bytes=size,
        stored_at=now,
        lifetime=lifetime,
        has_validator=d.has_validator,
        last_access=now,
        seq=store._next_seq(),
        validator=validator,
        directives=d,
    )
    store._used += size


def page_complete(store: CacheStore) -> None:
    """A page finished loading; drop its temporary no-store entries."""
    store.temp.clear()


@dataclass
class SiteCounts:
    fresh_hits: int = 0
    revalidations: int = 0
    misses: int = 0

    @property
    def requests(self) -> int:
        return self.fresh_hits + self.revalidations + self.misses

    @property
    def network_activity_fraction(self) -> float:
        if self.requests == 0:
            return 0.0
        return (self.revalidations + self.misses) / self.requests


@dataclass
class CacheSimReport:
    capacity_bytes: float
    counters: CacheCounters
    per_site: dict[str, SiteCounts]

    @property
    def total_requests(self) -> int:
        return self.counters.requests

    @property
    def fresh_fraction(self) -> float:
        return self.counters.fresh_hits / self.total_requests if self.total_requests else 0.0

    @property
    def revalidation_fraction(self) -> float:
        return self.counters.revalidations / self.total_requests if self.total_requests else 0.0

    @property
    def miss_fraction(self) -> float:
        return self.counters.misses / self.total_requests if self.total_requests else 0.0

    @property
    def network_activity_fraction(self) -> float:
        """Fraction of requests that touched the network at all."""
        return self.revalidation_fraction + self.miss_fraction


def replay_cache_sim(trace: Trace, capacity_bytes: float = 6 * 1024 * 1024) -> CacheSimReport:
    """Replay a trace through one cache and count request outcomes.

    Every main and subresource request is classified via ``lookup``;
    misses and revalidations are then admitted.  The temporary cache is
    cleared after each visit (page complete).  Per-site counts group by
    the visit's website, i.e. the page the request belonged to.
    """
    if not trace.visits:
        raise EmptyTrace("cannot replay an empty trace")
    if capacity_bytes != math.inf and capacity_bytes <= 0:
        raise ValueError("capacity_bytes must be positive or math.inf")
    store = CacheStore(capacity_bytes)
    per_site: dict[str, SiteCounts] = {}
    for visit in trace.visits:
        site = website_key(visit.main.url)
        tally = per_site.setdefault(site, SiteCounts())
        for record in (visit.main, *visit.subresources):
            outcome = lookup(store, record.url, visit.timestamp)
            if outcome is LookupOutcome.FRESH_HIT:
                tally.fresh_hits += 1
            elif outcome is LookupOutcome.EXPIRED_REVALIDATE:
                tally.revalidations += 1
                admit(store, record, visit.timestamp)
            else:
                tally.misses += 1
                admit(store, record, visit.timestamp)
        page_complete(store)
    return CacheSimReport(capacity_bytes=capacity_bytes, counters=store.counters, per_site=per_site)
