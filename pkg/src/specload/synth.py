"""Deterministic synthetic browsing-trace generator.

Models the structure the rest of the toolkit cares about: websites whose
pages share most subresources, a stream of visits dominated by
first-time page URLs, and daily churn that swaps subresource URLs for
new ones.  Same seed, same bytes.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass

from .errors import InvalidParams
from .trace import CacheDirectives, PageVisit, ResourceRecord, Trace

# Visit cadence baked into the generator: 30 page loads per simulated
# day, so a 10k-visit trace spans roughly a year.
VISITS_PER_DAY = 30
_SPACING_S = 86400.0 / VISITS_PER_DAY
_START_TS = 1264982400.0  # 2010-02-01T00:00:00Z

_SUB_KINDS = (("script", 0.20), ("stylesheet", 0.10), ("image", 0.60), ("other", 0.10))
_EXT = {"script": ".js", "stylesheet": ".css", "image": ".png", "other": ".bin"}
_SIZE_RANGES = {
    "html": (10_000, 40_000),
    "script": (5_000, 80_000),
    "stylesheet": (2_000, 40_000),
    "image": (2_000, 60_000),
    "other": (1_000, 100_000),
}

# (profile, weight) pairs; the mix keeps better than half of all
# resources effectively uncacheable (no-cache or short max-age).
_SUB_PROFILES = (
    ("no_cache", 0.30),
    ("short", 0.25),
    ("long", 0.25),
    ("expires", 0.05),
    ("heuristic", 0.05),
    ("none", 0.05),
    ("no_store", 0.05),
)
_MAIN_PROFILES = (("no_cache", 0.60), ("short", 0.20), ("heuristic", 0.20))


@dataclass(frozen=True)
class SynthParams:
    n_sites: int = 10
    pages_per_site: int = 200
    subresources_per_page: int = 20
    shared_fraction: float = 0.76
    new_visit_rate: float = 0.75
    churn_rate_per_day: float = 0.10
    visits: int = 2000
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_sites", "pages_per_site", "subresources_per_page", "visits"):
            if getattr(self, name) < 1:
                raise InvalidParams(f"{name} must be >= 1")
        for name in ("shared_fraction", "new_visit_rate", "churn_rate_per_day"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidParams(f"{name} must be within [0, 1]")


def _weighted(rng: random.Random, pairs) -> str:
    u = rng.random()
    acc = 0.0
    for name, w in pairs:
        acc += w
        if u < acc:
            return name
    return pairs[-1][0]


class _Sub:
    __slots__ = ("url", "kind", "size", "profile", "param")

    def __init__(self, url, kind, size, profile, param):
        self.url = url
        self.kind = kind
        self.size = size
        self.profile = profile
        self.param = param


class _Page:
    __slots__ = ("url", "size", "profile", "param", "unique")

    def __init__(self, url, size, profile, param, unique):
        self.url = url
        self.size = size
        self.profile = profile
        self.param = param
        self.unique = unique


def _directives(profile: str, param: float, ts: float) -> CacheDirectives:
    if profile == "no_store":
        return CacheDirectives(no_store=True)
    if profile == "no_cache":
        return CacheDirectives(no_cache=True, has_validator=True)
    if profile == "short" or profile == "long":
        return CacheDirectives(max_age=int(param), has_validator=True)
    if profile == "expires":
        return CacheDirectives(expires=ts + param, has_validator=True)
    if profile == "heuristic":
        return CacheDirectives(has_validator=True, last_modified=ts - param)
    return CacheDirectives()


def _draw_profile(rng: random.Random, pairs) -> tuple[str, float]:
    profile = _weighted(rng, pairs)
    if profile == "short":
        return profile, float(rng.randint(60, 600))
    if profile == "long":
        return profile, float(rng.randint(1, 30) * 86400)
    if profile == "expires":
        return profile, float(rng.randint(1, 7) * 86400)
    if profile == "heuristic":
        return profile, float(rng.randint(1, 90) * 86400)
    return profile, 0.0


class _Site:
    def __init__(self, index: int, params: SynthParams, rng: random.Random):
        self.host = f"site{index}.example"
        self.rng = rng
        self.params = params
        self.next_sub_id = 0
        self.next_page_id = 0
        n_shared = min(
            params.subresources_per_page,
            int(params.shared_fraction * params.subresources_per_page + 0.5),
        )
        self.n_unique = params.subresources_per_page - n_shared
        self.pool = [self._new_sub() for _ in range(n_shared)]
        self.pages: list[_Page] = []
        self.visit_log: list[int] = []

    def _new_sub(self) -> _Sub:
        rng = self.rng
        kind = _weighted(rng, _SUB_KINDS)
        lo, hi = _SIZE_RANGES[kind]
        size = rng.randint(lo, hi)
        profile, param = _draw_profile(rng, _SUB_PROFILES)
        url = f"http://{self.host}/r/{self.next_sub_id}{_EXT[kind]}"
        self.next_sub_id += 1
        return _Sub(url, kind, size, profile, param)

    def mint_page(self) -> int:
        rng = self.rng
        lo, hi = _SIZE_RANGES["html"]
        profile, param = _draw_profile(rng, _MAIN_PROFILES)
        page = _Page(
            url=f"http://{self.host}/p/{self.next_page_id}",
            size=rng.randint(lo, hi),
            profile=profile,
            param=param,
            unique=[self._new_sub() for _ in range(self.n_unique)],
        )
        self.next_page_id += 1
        self.pages.append(page)
        return len(self.pages) - 1

    def churn(self) -> None:
        rate = self.params.churn_rate_per_day
        if rate <= 0.0:
            return
        rng = self.rng
        for i, sub in enumerate(self.pool):
            if rng.random() < rate:
                self.pool[i] = self._new_sub()
        for page in self.pages:
            for i, sub in enumerate(page.unique):
                if rng.random() < rate:
                    page.unique[i] = self._new_sub()

    def build_visit(self, page_idx: int, ts: float) -> PageVisit:
        page = self.pages[page_idx]
        subs = list(self.pool) + list(page.unique)
        # Stable per-page interleaving so the document order is not
        # trivially "all shared first".  crc32, not hash(): builtin string
        # hashing is salted per process and would break trace determinism.
        order = sorted(
            range(len(subs)),
            key=lambda i: zlib.crc32(f"{page.url}|{subs[i].url}".encode()),
        )
        records = tuple(
            ResourceRecord(
                url=subs[i].url,
                kind=subs[i].kind,
                size_bytes=subs[i].size,
                cache_directives=_directives(subs[i].profile, subs[i].param, ts),
                fetched_at=ts,
            )
            for i in order
        )
        main = ResourceRecord(
            url=page.url,
            kind="html",
            size_bytes=page.size,
            cache_directives=_directives(page.profile, page.param, ts),
            fetched_at=ts,
        )
        return PageVisit(user_id="synth", timestamp=ts, main=main, subresources=records)


def generate_synthetic(params: SynthParams) -> Trace:
    """Generate ``params.visits`` page visits across ``params.n_sites`` sites.

    New-visit draws mint a page until the site's ``pages_per_site``
    universe is exhausted, then fall back to revisits; revisit targets
    are sampled from the site's past visits, so frequently revisited
    pages stay popular.  Churn runs once per simulated day.
    """
    params.validate()
    rng = random.Random(params.seed)
    sites = [_Site(i, params, rng) for i in range(params.n_sites)]
    visits: list[PageVisit] = []
    current_day = 0
    for n in range(params.visits):
        ts = _START_TS + n * _SPACING_S
        day = int((ts - _START_TS) // 86400)
        while current_day < day:
            for site in sites:
                site.churn()
            current_day += 1
        site = sites[rng.randrange(params.n_sites)]
        want_new = rng.random() < params.new_visit_rate
        if want_new and len(site.pages) < params.pages_per_site:
            page_idx = site.mint_page()
        elif site.visit_log:
            page_idx = rng.choice(site.visit_log)
        elif len(site.pages) < params.pages_per_site:
            page_idx = site.mint_page()
        else:
            page_idx = rng.randrange(len(site.pages))
        site.visit_log.append(page_idx)
        visits.append(site.build_visit(page_idx, ts))
    return Trace(visits=visits)
