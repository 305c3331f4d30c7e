"""System-context probing: dead links, redundant results, parasite pages.

Implements the per-link retry/aliveness check, URL-normalization-based
redundancy grouping, the zero-occurrence parasite test, and the roll-up
into per-engine performance rates with average response times.

Scoring notes follow the harness's note rules: a link's note is 0 when
dead and 1 otherwise, and a group's redundancy note is its analyzed
count minus its redundant count.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence
from urllib.parse import urlparse, urlunparse

from .extraction import extract_text
from .fetching import FetchPool, FetchResult

DEFAULT_SOFT404_PHRASES = (
    "not found",
    "page inexistante",
    "page does not exist",
    "no longer available",
)

_PERCENT_ESCAPE = re.compile(r"%[0-9a-fA-F]{2}")


class UrlError(ValueError):
    """URL is not an absolute, parseable http(s) URL."""


def _require_absolute(url: str) -> "urlparse":
    parts = urlparse(url)
    if not parts.scheme or not parts.netloc:
        raise UrlError(f"not an absolute URL: {url!r}")
    return parts


def normalize_url(url: str) -> str:
    """Canonicalize a URL for duplicate detection.

    Lowercases scheme and host, drops default ports and fragments,
    strips trailing slashes from query-less paths, and uppercases
    percent-escapes. Query parameter order is preserved (it can be
    semantically significant).
    """
    parts = _require_absolute(url)
    scheme = parts.scheme.lower()
    host = (parts.hostname or "").lower()
    if parts.port is not None:
        default = {"http": 80, "https": 443}.get(scheme)
        if parts.port != default:
            host = f"{host}:{parts.port}"
    path = parts.path
    if not parts.query and path.endswith("/"):
        path = path.rstrip("/")
    path = _PERCENT_ESCAPE.sub(lambda m: m.group(0).upper(), path)
    query = _PERCENT_ESCAPE.sub(lambda m: m.group(0).upper(), parts.query)
    return urlunparse((scheme, host, path, parts.params, query, ""))


# Second-level labels under which registration happens one level deeper
# (e.g. example.co.uk). Small pragmatic set, not the full public-suffix
# list.
_SECOND_LEVEL = {"co", "com", "net", "org", "ac", "gov", "edu", "gouv"}


def registrable_domain(url: str) -> str:
    """Approximate eTLD+1 of the URL's host, for same-site grouping."""
    host = (_require_absolute(url).hostname or "").lower()
    labels = host.split(".")
    if len(labels) <= 2:
        return host
    if len(labels[-1]) == 2 and labels[-2] in _SECOND_LEVEL:
        return ".".join(labels[-3:])
    return ".".join(labels[-2:])


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    retry_delay_ms: float = 250.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass
class LinkStatus:
    url: str
    state: str  # alive | dead | suspect-soft-404
    attempts: int
    final_http_status: int | None
    checked_at: float

    @property
    def alive(self) -> bool:
        # Soft-404 suspects count as alive; they are reported, not judged.
        return self.state != "dead"

    @property
    def note(self) -> int:
        return 0 if self.state == "dead" else 1


def check_link(
    url: str,
    policy: RetryPolicy | None = None,
    fetch: Callable[[str], FetchResult] | None = None,
    soft404_phrases: Sequence[str] = DEFAULT_SOFT404_PHRASES,
) -> LinkStatus:
    """Probe one URL, declaring it dead only after max_attempts failures.

    A failure is a connection-level error or an HTTP status >= 400 after
    redirects. An alive page whose text contains a soft-404 phrase is
    flagged suspect-soft-404 but still counts as alive.
    """
    _require_absolute(url)
    policy = policy or RetryPolicy()
    if fetch is None:
        pool = FetchPool(max_workers=1, per_host_delay_s=0.0)
        fetch = pool.fetch_once
    result = FetchResult(url=url, error="not attempted")
    attempts = 0
    for attempt in range(policy.max_attempts):
        attempts = attempt + 1
        result = fetch(url)
        if result.ok:
            break
        if attempts < policy.max_attempts and policy.retry_delay_ms > 0:
            time.sleep(policy.retry_delay_ms / 1000.0)
    if not result.ok:
        return LinkStatus(
            url=url,
            state="dead",
            attempts=attempts,
            final_http_status=result.status,
            checked_at=time.time(),
        )
    state = "alive"
    if soft404_phrases:
        text = extract_text(result.body).casefold()
        if any(phrase.casefold() in text for phrase in soft404_phrases):
            state = "suspect-soft-404"
    return LinkStatus(
        url=url,
        state=state,
        attempts=attempts,
        final_http_status=result.status,
        checked_at=time.time(),
    )


@dataclass
class RedundancyGroup:
    representative_url: str
    member_urls: list[str]
    level: str  # exact-url | same-site


@dataclass
class RedundancyResult:
    groups: list[RedundancyGroup]
    redundant_count: int
    analyzed_count: int

    @property
    def note(self) -> int:
        return self.analyzed_count - self.redundant_count


def detect_redundant(
    ranked_urls: Sequence[str], level: str = "exact-url"
) -> RedundancyResult:
    """Group one result list's duplicates and count the extras.

    ``ranked_urls`` is one (engine, query) result list in rank order.
    Duplicates beyond the first member of each group are redundant; the
    group representative is its lowest-ranked member.
    """
    if level == "exact-url":
        keyer = normalize_url
    elif level == "same-site":
        keyer = registrable_domain
    else:
        raise ValueError(f"unknown redundancy level: {level!r}")
    by_key: dict[str, list[str]] = {}
    for url in ranked_urls:
        by_key.setdefault(keyer(url), []).append(url)
    groups = [
        RedundancyGroup(representative_url=members[0], member_urls=list(members), level=level)
        for members in by_key.values()
        if len(members) >= 2
    ]
    redundant = sum(len(g.member_urls) - 1 for g in groups)
    return RedundancyResult(
        groups=groups, redundant_count=redundant, analyzed_count=len(ranked_urls)
    )


@dataclass
class ParasiteCheck:
    parasite: bool
    scorable: bool


def detect_parasite(
    query_words: Sequence[str],
    doc_tokens: Sequence[str] | None,
    host_blocklist: Iterable[str] = (),
    url: str | None = None,
) -> ParasiteCheck:
    """Zero-occurrence parasite test.

    A page is a parasite when every query word occurs zero times in its
    tokens (case-folded). Pages without content (failed fetches) are not
    parasites but are flagged unscorable. An optional host blocklist
    marks known commercial hosts as parasites regardless of content.
    """
    if url is not None and host_blocklist:
        host = urlparse(url).hostname or ""
        blocked = {b.lower() for b in host_blocklist}
        if host.lower() in blocked or any(host.lower().endswith("." + b) for b in blocked):
            return ParasiteCheck(parasite=True, scorable=doc_tokens is not None)
    if doc_tokens is None:
        return ParasiteCheck(parasite=False, scorable=False)
    present = set(doc_tokens)
    folded = [w.casefold() for w in query_words]
    return ParasiteCheck(parasite=not any(w in present for w in folded), scorable=True)


@dataclass
class GroupProbe:
    """Probe outcome for one (engine, query) result list."""

    engine_id: str
    query_id: str
    analyzed_count: int
    dead_count: int
    redundant_count: int
    parasite_count: int
    unscorable_count: int
    link_notes: dict[str, int] = field(default_factory=dict)
    suspect_urls: list[str] = field(default_factory=list)

    @property
    def redundancy_note(self) -> int:
        return self.analyzed_count - self.redundant_count


@dataclass
class EnginePerformance:
    """Per-engine rates over all of the engine's analyzed links.

    Rates are fractions in [0, 1]; rendering to percentages happens in
    the report layer.
    """

    engine_id: str
    analyzed_count: int
    dead_rate: float
    parasite_rate: float
    redundancy_rate: float
    suspect_count: int
    avg_response_time: float | None


@dataclass
class ProbeReport:
    groups: list[GroupProbe]
    engines: list[EnginePerformance]
    links: list[LinkStatus] = field(default_factory=list)


def score_performance(
    groups: list[GroupProbe],
    elapsed_by_engine: dict[str, list[float]],
    links: list[LinkStatus] | None = None,
) -> ProbeReport:
    """Aggregate group probes into per-engine performance rates."""
    per_engine: dict[str, list[GroupProbe]] = {}
    for group in groups:
        per_engine.setdefault(group.engine_id, []).append(group)
    engines = []
    for engine_id in sorted(per_engine):
        engine_groups = per_engine[engine_id]
        analyzed = sum(g.analyzed_count for g in engine_groups)
        dead = sum(g.dead_count for g in engine_groups)
        parasites = sum(g.parasite_count for g in engine_groups)
        redundant = sum(g.redundant_count for g in engine_groups)
        suspects = sum(len(g.suspect_urls) for g in engine_groups)
        elapsed = elapsed_by_engine.get(engine_id, [])
        engines.append(
            EnginePerformance(
                engine_id=engine_id,
                analyzed_count=analyzed,
                dead_rate=dead / analyzed if analyzed else 0.0,
                parasite_rate=parasites / analyzed if analyzed else 0.0,
                redundancy_rate=redundant / analyzed if analyzed else 0.0,
                suspect_count=suspects,
                avg_response_time=sum(elapsed) / len(elapsed) if elapsed else None,
            )
        )
    return ProbeReport(groups=groups, engines=engines, links=list(links or []))
