"""Search-engine adapters and the protocol runner.

Adapters turn a query into a ranked result list. Two modes ship by
default: ``fixture`` (canned SERPs from a directory, deterministic) and
``api`` (a generic JSON endpoint with configurable field paths). Live
scrapers for commercial engines are an extension point, not shipped:
register a parser or adapter instead of patching this module.

Fixture SERP conventions:
  * ``<query_id>.ndjson``: one result per line, ``{"url", "title",
    "snippet"}``, rank = line order.
  * ``<query_id>.html``: markup with a container carrying class
    ``results`` holding elements with class ``result``; each result's
    first ``<a href>`` supplies URL and title, and an optional element
    with class ``snippet`` supplies the snippet. A ``<base href>`` tag
    absolutizes relative hrefs.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Protocol
from urllib.parse import quote_plus, urljoin

import requests

from .corpus import (
    QuerySpec,
    RunManifest,
    RunStore,
    SearchResult,
    SerpRecord,
    Triplet,
)
from .extraction import extract_text
from .fetching import FetchPool, FetchResult

_ENGINE_ID_RE = re.compile(r"^[a-z0-9][a-z0-9._-]*$")


class EngineError(Exception):
    pass


class AdapterConfigError(EngineError):
    pass


class NetworkFailure(EngineError):
    """Query execution failed after retrying; carries the attempt count."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class ParseFailure(EngineError):
    """SERP markup did not match the expected structure."""


def validate_engine_id(engine_id: str) -> str:
    if not _ENGINE_ID_RE.match(engine_id):
        raise AdapterConfigError(
            f"engine id {engine_id!r} must be lowercase with no whitespace"
        )
    return engine_id


@dataclass
class SerpResponse:
    """One engine's ranked answer to one query, with wall-clock elapsed."""

    engine_id: str
    query_id: str
    results: list[SearchResult]
    elapsed: float

    def __post_init__(self) -> None:
        if self.elapsed < 0:
            raise ValueError("elapsed must be >= 0")
        ranks = [r.rank for r in self.results]
        if ranks != sorted(ranks) or len(set(ranks)) != len(ranks):
            raise ValueError("results must be rank-ordered and unique")


class EngineAdapter(Protocol):
    id: str
    mode: str

    def search(self, query: QuerySpec, k: int) -> list[SearchResult]:
        """Return at most k results with ranks 1..k for the query."""
        ...


@dataclass
class ParsedResult:
    rank: int
    url: str
    title: str
    snippet: str


class _SerpHtmlParser(HTMLParser):
    """Parses the fixture SERP markup convention (flat result elements)."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.base_href: str | None = None
        self.saw_container = False
        self.results: list[dict] = []
        self._current: dict | None = None
        self._result_tag = ""
        self._result_depth = 0
        self._in_title = False
        self._snippet_tag: str | None = None

    @staticmethod
    def _classes(attrs) -> set[str]:
        for name, value in attrs:
            if name == "class" and value:
                return set(value.split())
        return set()

    @staticmethod
    def _attr(attrs, name: str) -> str | None:
        for key, value in attrs:
            if key == name:
                return value
        return None

    def handle_starttag(self, tag, attrs):
        classes = self._classes(attrs)
        if tag == "base" and self.base_href is None:
            self.base_href = self._attr(attrs, "href")
        if "results" in classes:
            self.saw_container = True
        if "result" in classes:
            self._finalize()
            self._current = {"href": None, "title": [], "snippet": []}
            self._result_tag = tag
            self._result_depth = 1
            return
        if self._current is None:
            return
        if tag == self._result_tag:
            self._result_depth += 1
        if tag == "a" and self._current["href"] is None:
            self._current["href"] = self._attr(attrs, "href")
            self._in_title = True
        elif "snippet" in classes:
            self._snippet_tag = tag

    def handle_endtag(self, tag):
        if self._current is None:
            return
        if tag == "a":
            self._in_title = False
        if self._snippet_tag is not None and tag == self._snippet_tag:
            self._snippet_tag = None
        if tag == self._result_tag:
            self._result_depth -= 1
            if self._result_depth <= 0:
                self._finalize()

    def handle_data(self, data):
        if self._current is None:
            return
        if self._in_title:
            self._current["title"].append(data)
        elif self._snippet_tag is not None:
            self._current["snippet"].append(data)

    def _finalize(self) -> None:
        if self._current is not None:
            self.results.append(self._current)
            self._current = None
            self._in_title = False
            self._snippet_tag = None

    def close(self):
        super().close()
        self._finalize()


# Per-engine SERP parsers; the fixture-markup parser is the default for
# any engine without a registered one.
_SERP_PARSERS: dict[str, object] = {}


def register_serp_parser(engine_id: str, parser) -> None:
    _SERP_PARSERS[validate_engine_id(engine_id)] = parser


def parse_serp(engine_id: str, raw_html: str | bytes, base_url: str = "") -> list[ParsedResult]:
    """Extract (rank, url, title, snippet) from one result-page markup.

    Relative hrefs are absolutized against the page ``<base href>`` or
    the supplied ``base_url``. Markup without a recognizable results
    structure raises ParseFailure naming the missing element.
    """
    custom = _SERP_PARSERS.get(engine_id)
    if custom is not None:
        return custom(raw_html, base_url)
    if isinstance(raw_html, bytes):
        raw_html = raw_html.decode("utf-8", errors="replace")
    parser = _SerpHtmlParser()
    parser.feed(raw_html)
    parser.close()
    if not parser.results and not parser.saw_container:
        raise ParseFailure('no element with class "results" or "result" found')
    base = parser.base_href or base_url
    parsed: list[ParsedResult] = []
    for index, item in enumerate(parser.results, start=1):
        href = item["href"]
        if not href:
            raise ParseFailure(f"result {index} has no <a href>")
        parsed.append(
            ParsedResult(
                rank=index,
                url=urljoin(base, href),
                title=" ".join("".join(item["title"]).split()),
                snippet=" ".join("".join(item["snippet"]).split()),
            )
        )
    return parsed


class FixtureAdapter:
    """Deterministic adapter reading canned SERPs from a directory.

    ``delay_s`` simulates engine latency, for response-time tests and
    demos; the result list itself never varies between calls.
    """

    mode = "fixture"

    def __init__(self, engine_id: str, directory: Path | str, delay_s: float = 0.0) -> None:
        self.id = validate_engine_id(engine_id)
        self.directory = Path(directory)
        self.delay_s = delay_s
        if not self.directory.is_dir():
            raise AdapterConfigError(
                f"fixture directory for {engine_id!r} not found: {self.directory}"
            )

    def search(self, query: QuerySpec, k: int) -> list[SearchResult]:
        if self.delay_s > 0:
            time.sleep(self.delay_s)
        ndjson = self.directory / f"{query.id}.ndjson"
        html = self.directory / f"{query.id}.html"
        if ndjson.exists():
            raw_items = []
            with open(ndjson, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        raw_items.append(json.loads(line))
            parsed = [
                ParsedResult(rank=i, url=item["url"], title=item.get("title", ""),
                             snippet=item.get("snippet", ""))
                for i, item in enumerate(raw_items, start=1)
            ]
        elif html.exists():
            parsed = parse_serp(self.id, html.read_bytes())
        else:
            raise AdapterConfigError(
                f"no fixture SERP for query {query.id!r} under {self.directory}"
            )
        return [
            SearchResult(engine_id=self.id, query_id=query.id, rank=p.rank,
                         url=p.url, title=p.title, snippet=p.snippet)
            for p in parsed[:k]
        ]


def _walk_path(data, path: str):
    current = data
    for part in path.split("."):
        if not part:
            continue
        if isinstance(current, dict):
            current = current.get(part)
        else:
            return None
    return current


class GenericApiAdapter:
    """Adapter for JSON search APIs.

    ``url_template`` carries ``{query}`` and ``{count}`` placeholders;
    ``results_path`` is a dot path to the result list in the response,
    and ``fields`` maps url/title/snippet to per-item dot paths.
    """

    mode = "api"

    def __init__(
        self,
        engine_id: str,
        url_template: str,
        results_path: str = "results",
        fields: dict[str, str] | None = None,
        timeout_s: float = 10.0,
    ) -> None:
        self.id = validate_engine_id(engine_id)
        if "{query}" not in url_template:
            raise AdapterConfigError(f"url_template for {engine_id!r} lacks {{query}}")
        self.url_template = url_template
        self.results_path = results_path
        self.fields = {"url": "url", "title": "title", "snippet": "snippet"}
        self.fields.update(fields or {})
        self.timeout_s = timeout_s

    def search(self, query: QuerySpec, k: int) -> list[SearchResult]:
        url = self.url_template.replace("{query}", quote_plus(query.text)).replace(
            "{count}", str(k)
        )
        response = requests.get(url, timeout=self.timeout_s)
        response.raise_for_status()
        items = _walk_path(response.json(), self.results_path)
        if not isinstance(items, list):
            raise ParseFailure(
                f"response path {self.results_path!r} did not yield a list"
            )
        results = []
        for index, item in enumerate(items[:k], start=1):
            item_url = _walk_path(item, self.fields["url"])
            if not item_url:
                raise ParseFailure(f"result {index} lacks field {self.fields['url']!r}")
            results.append(
                SearchResult(
                    engine_id=self.id,
                    query_id=query.id,
                    rank=index,
                    url=str(item_url),
                    title=str(_walk_path(item, self.fields["title"]) or ""),
                    snippet=str(_walk_path(item, self.fields["snippet"]) or ""),
                )
            )
        return results


def execute_query(
    adapter: EngineAdapter, query: QuerySpec, k: int, max_attempts: int = 3
) -> SerpResponse:
    """Run one query through an adapter, timing retrieve+parse end to end.

    Network failures are retried up to ``max_attempts``; the final
    failure surfaces with its attempt count. The elapsed time covers the
    successful attempt only.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    attempts = 0
    while True:
        attempts += 1
        started = time.perf_counter()
        try:
            results = adapter.search(query, k)
            elapsed = time.perf_counter() - started
            break
        except (requests.RequestException, OSError) as exc:
            if attempts >= max_attempts:
                raise NetworkFailure(
                    f"engine {adapter.id!r} query {query.id!r} failed: {exc}", attempts
                ) from exc
    return SerpResponse(
        engine_id=adapter.id, query_id=query.id, results=results, elapsed=elapsed
    )


@dataclass
class RunSummary:
    run_id: str
    triplets_stored: int = 0
    fetch_failures: int = 0
    groups_executed: int = 0
    warnings: list[str] = field(default_factory=list)


def run_protocol(
    store: RunStore,
    manifest: RunManifest,
    adapters: dict[str, EngineAdapter],
    fetch_pool: FetchPool | None = None,
    max_attempts: int = 3,
) -> RunSummary:
    """Execute every (engine, query) group and archive the result triplets.

    Each group's SERP is stored with its elapsed time; every result URL
    is fetched through the shared pool, its raw bytes archived, and its
    extracted text stored as the triplet content. Per-URL fetch failures
    leave content absent and never abort the run.
    """
    for engine_id in manifest.engines:
        if engine_id not in adapters:
            raise AdapterConfigError(f"no adapter configured for engine {engine_id!r}")
    own_pool = fetch_pool is None
    pool = fetch_pool or FetchPool()
    summary = RunSummary(run_id=manifest.run_id)
    # URLs recur across ranks and engines (duplicates, shared results);
    # fetch each once per run and archive the shared body everywhere.
    fetch_cache: dict[str, FetchResult] = {}
    try:
        for engine_id in manifest.engines:
            adapter = adapters[engine_id]
            for query in manifest.queries:
                serp = execute_query(adapter, query, manifest.results_per_query,
                                     max_attempts=max_attempts)
                store.store_serp_record(
                    manifest.run_id,
                    SerpRecord(engine_id=engine_id, query_id=query.id,
                               elapsed=serp.elapsed, results=serp.results),
                )
                summary.groups_executed += 1
                if len(serp.results) < manifest.results_per_query:
                    summary.warnings.append(
                        f"{engine_id}/{query.id}: {len(serp.results)} of "
                        f"{manifest.results_per_query} results"
                    )
                pending = sorted(
                    {r.url for r in serp.results} - fetch_cache.keys()
                )
                fetch_cache.update(zip(pending, pool.fetch_all(pending)))
                now = time.time()
                for result in serp.results:
                    fetch = fetch_cache[result.url]
                    content = None
                    if fetch.ok:
                        store.store_raw(manifest.run_id, engine_id, query.id,
                                        result.rank, fetch.body)
                        content = extract_text(fetch.body)
                    else:
                        summary.fetch_failures += 1
                    store.store_triplet(
                        manifest.run_id,
                        Triplet(
                            engine_id=engine_id,
                            query_id=query.id,
                            rank=result.rank,
                            url=result.url,
                            content=content,
                            fetched_at=now,
                            http_status=fetch.status,
                        ),
                    )
                    summary.triplets_stored += 1
    finally:
        if own_pool:
            pool.close()
    return summary
