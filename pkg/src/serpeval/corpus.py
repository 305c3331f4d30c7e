"""Evaluation-protocol data model and run persistence.

A run lives under ``<root>/<run_id>/`` as:

    manifest              JSON run manifest (engines, topics, queries)
    triplets.ndjson       one archived result triplet per line
    serps.ndjson          one record per (engine, query): elapsed + results
    raw/<engine>/<query>/<rank>.html   raw page bytes, re-extractable

Triplets store extracted text, not raw HTML; the raw archive is keyed
identically so extraction can be redone. Appends are serialized per run;
loading tolerates corrupt lines and reports them with their byte offset.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse


class CorpusError(Exception):
    pass


class UnknownRunError(CorpusError):
    pass


class RunExistsError(CorpusError):
    pass


class MalformedUrlError(CorpusError):
    pass


@dataclass(frozen=True)
class Topic:
    id: str
    label: str

    def __post_init__(self) -> None:
        if not self.id or not self.label:
            raise ValueError("topic id and label must be non-empty")


@dataclass(frozen=True)
class QuerySpec:
    id: str
    topic_id: str
    text: str
    exact_mode: bool = False

    def __post_init__(self) -> None:
        if not self.text.split():
            raise ValueError(f"query {self.id!r} has no words")


@dataclass(frozen=True)
class SearchResult:
    engine_id: str
    query_id: str
    rank: int
    url: str
    title: str = ""
    snippet: str = ""

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        _check_absolute_url(self.url)


@dataclass
class Triplet:
    """One archived (query, url, page content) unit, keyed by engine and rank."""

    engine_id: str
    query_id: str
    rank: int
    url: str
    content: str | None = None
    fetched_at: float = 0.0
    http_status: int | None = None

    def key(self, run_id: str) -> str:
        return f"{run_id}/{self.engine_id}/{self.query_id}/{self.rank}"


@dataclass
class RunManifest:
    run_id: str
    engines: list[str]
    topics: list[Topic]
    queries: list[QuerySpec]
    results_per_query: int = 20
    created_at: float = field(default_factory=time.time)

    def __post_init__(self) -> None:
        if self.results_per_query < 1:
            raise ValueError("results_per_query must be >= 1")
        topic_ids = {t.id for t in self.topics}
        for query in self.queries:
            if query.topic_id not in topic_ids:
                raise ValueError(f"query {query.id!r} references unknown topic {query.topic_id!r}")

    @property
    def expected_triplets(self) -> int:
        return len(self.queries) * self.results_per_query * len(self.engines)

    def queries_for_topic(self, topic_id: str) -> list[QuerySpec]:
        return [q for q in self.queries if q.topic_id == topic_id]

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "engines": self.engines,
            "results_per_query": self.results_per_query,
            "created_at": self.created_at,
            "topics": [{"id": t.id, "label": t.label} for t in self.topics],
            "queries": [
                {"id": q.id, "topic_id": q.topic_id, "text": q.text, "exact_mode": q.exact_mode}
                for q in self.queries
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunManifest":
        return cls(
            run_id=data["run_id"],
            engines=list(data["engines"]),
            topics=[Topic(**t) for t in data["topics"]],
            queries=[
                QuerySpec(
                    id=q["id"], topic_id=q["topic_id"], text=q["text"],
                    exact_mode=q.get("exact_mode", False),
                )
                for q in data["queries"]
            ],
            results_per_query=data.get("results_per_query", 20),
            created_at=data.get("created_at", 0.0),
        )


@dataclass
class SerpRecord:
    """Persisted form of one engine response: elapsed time plus result list."""

    engine_id: str
    query_id: str
    elapsed: float
    results: list[SearchResult]


@dataclass
class CorruptRecord:
    path: str
    offset: int
    reason: str


@dataclass
class Violation:
    kind: str  # duplicate-rank | missing-rank | count-mismatch
    engine_id: str
    query_id: str
    detail: str


@dataclass
class LoadedRun:
    manifest: RunManifest
    groups: dict[tuple[str, str], list[Triplet]]
    corruption: list[CorruptRecord] = field(default_factory=list)
    gaps: list[Violation] = field(default_factory=list)

    @property
    def triplet_count(self) -> int:
        return sum(len(g) for g in self.groups.values())


def _check_absolute_url(url: str) -> None:
    parts = urlparse(url)
    if not parts.scheme or not parts.netloc:
        raise MalformedUrlError(f"not an absolute URL: {url!r}")


class RunStore:
    """Filesystem-backed storage for runs, triplets, SERPs and raw pages."""

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self._append_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- paths ---------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        return self.root / run_id

    def manifest_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "manifest"

    def triplets_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "triplets.ndjson"

    def serps_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "serps.ndjson"

    def raw_path(self, run_id: str, engine_id: str, query_id: str, rank: int) -> Path:
        return self.run_dir(run_id) / "raw" / engine_id / query_id / f"{rank}.html"

    def reports_dir(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "reports"

    def _lock(self, run_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._append_locks.setdefault(run_id, threading.Lock())

    # -- run lifecycle -------------------------------------------------

    def run_exists(self, run_id: str) -> bool:
        return self.manifest_path(run_id).exists()

    def create_run(self, manifest: RunManifest, force: bool = False) -> None:
        if self.run_exists(manifest.run_id) and not force:
            raise RunExistsError(
                f"run {manifest.run_id!r} already exists (use force to overwrite)"
            )
        run_dir = self.run_dir(manifest.run_id)
        run_dir.mkdir(parents=True, exist_ok=True)
        self.manifest_path(manifest.run_id).write_text(
            json.dumps(manifest.to_json(), indent=2), encoding="utf-8"
        )
        # Fresh run: drop stale data files from a forced overwrite.
        for stale in (self.triplets_path(manifest.run_id), self.serps_path(manifest.run_id)):
            if stale.exists():
                stale.unlink()

    def load_manifest(self, run_id: str) -> RunManifest:
        path = self.manifest_path(run_id)
        if not path.exists():
            raise UnknownRunError(f"no run {run_id!r} under {self.root}")
        return RunManifest.from_json(json.loads(path.read_text(encoding="utf-8")))

    # -- triplets ------------------------------------------------------

    def store_triplet(self, run_id: str, triplet: Triplet) -> str:
        if not self.run_exists(run_id):
            raise UnknownRunError(f"no run {run_id!r} under {self.root}")
        _check_absolute_url(triplet.url)
        if triplet.rank < 1:
            raise ValueError("rank must be >= 1")
        record = {
            "engine_id": triplet.engine_id,
            "query_id": triplet.query_id,
            "rank": triplet.rank,
            "url": triplet.url,
            "content": triplet.content,
            "fetched_at": triplet.fetched_at,
            "http_status": triplet.http_status,
        }
        line = json.dumps(record, ensure_ascii=False) + "\n"
        with self._lock(run_id):
            with open(self.triplets_path(run_id), "a", encoding="utf-8") as fh:
                fh.write(line)
        return triplet.key(run_id)

    def store_raw(
        self, run_id: str, engine_id: str, query_id: str, rank: int, raw: bytes
    ) -> Path:
        path = self.raw_path(run_id, engine_id, query_id, rank)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(raw)
        return path

    def store_serp_record(self, run_id: str, record: SerpRecord) -> None:
        if not self.run_exists(run_id):
            raise UnknownRunError(f"no run {run_id!r} under {self.root}")
        payload = {
            "engine_id": record.engine_id,
            "query_id": record.query_id,
            "elapsed": record.elapsed,
            "results": [
                {"rank": r.rank, "url": r.url, "title": r.title, "snippet": r.snippet}
                for r in record.results
            ],
        }
        line = json.dumps(payload, ensure_ascii=False) + "\n"
        with self._lock(run_id):
            with open(self.serps_path(run_id), "a", encoding="utf-8") as fh:
                fh.write(line)

    def _read_ndjson(self, path: Path) -> tuple[list[dict], list[CorruptRecord]]:
        records: list[dict] = []
        corruption: list[CorruptRecord] = []
        if not path.exists():
            return records, corruption
        offset = 0
        with open(path, "rb") as fh:
            for raw_line in fh:
                line = raw_line.decode("utf-8", errors="replace").strip()
                if line:
                    try:
                        records.append(json.loads(line))
                    except json.JSONDecodeError as exc:
                        corruption.append(
                            CorruptRecord(path=str(path), offset=offset, reason=str(exc))
                        )
                offset += len(raw_line)
        return records, corruption

    def load_run(self, run_id: str) -> LoadedRun:
        """Load a run's triplets grouped by (engine, query), ordered by rank.

        Identical keys collapse to the latest record. Missing triplets
        relative to the manifest are reported as gaps, not errors.
        """
        manifest = self.load_manifest(run_id)
        records, corruption = self._read_ndjson(self.triplets_path(run_id))
        by_key: dict[tuple[str, str, int], Triplet] = {}
        for data in records:
            try:
                triplet = Triplet(
                    engine_id=data["engine_id"],
                    query_id=data["query_id"],
                    rank=int(data["rank"]),
                    url=data["url"],
                    content=data.get("content"),
                    fetched_at=data.get("fetched_at", 0.0),
                    http_status=data.get("http_status"),
                )
            except (KeyError, TypeError, ValueError) as exc:
                corruption.append(
                    CorruptRecord(path=str(self.triplets_path(run_id)), offset=-1,
                                  reason=f"bad record fields: {exc}")
                )
                continue
            by_key[(triplet.engine_id, triplet.query_id, triplet.rank)] = triplet
        groups: dict[tuple[str, str], list[Triplet]] = {}
        for triplet in by_key.values():
            groups.setdefault((triplet.engine_id, triplet.query_id), []).append(triplet)
        for members in groups.values():
            members.sort(key=lambda t: t.rank)
        gaps = []
        for engine_id in manifest.engines:
            for query in manifest.queries:
                have = {t.rank for t in groups.get((engine_id, query.id), [])}
                missing = sorted(set(range(1, manifest.results_per_query + 1)) - have)
                if missing:
                    gaps.append(
                        Violation(
                            kind="missing-rank",
                            engine_id=engine_id,
                            query_id=query.id,
                            detail=f"missing ranks {missing}",
                        )
                    )
        return LoadedRun(manifest=manifest, groups=groups, corruption=corruption, gaps=gaps)

    def load_serps(self, run_id: str) -> tuple[list[SerpRecord], list[CorruptRecord]]:
        records, corruption = self._read_ndjson(self.serps_path(run_id))
        serps = []
        for data in records:
            serps.append(
                SerpRecord(
                    engine_id=data["engine_id"],
                    query_id=data["query_id"],
                    elapsed=float(data["elapsed"]),
                    results=[
                        SearchResult(
                            engine_id=data["engine_id"],
                            query_id=data["query_id"],
                            rank=int(r["rank"]),
                            url=r["url"],
                            title=r.get("title", ""),
                            snippet=r.get("snippet", ""),
                        )
                        for r in data["results"]
                    ],
                )
            )
        return serps, corruption

    # -- validation ----------------------------------------------------

    def validate_run(self, run_id: str) -> list[Violation]:
        """Check a stored run against the protocol shape.

        Violations are data, not errors: duplicate ranks, missing ranks,
        and per-group counts that differ from the manifest expectation.
        """
        manifest = self.load_manifest(run_id)
        violations: list[Violation] = []

        records, _ = self._read_ndjson(self.triplets_path(run_id))
        urls_by_key: dict[tuple[str, str, int], set[str]] = {}
        ranks_by_group: dict[tuple[str, str], set[int]] = {}
        for data in records:
            try:
                key = (data["engine_id"], data["query_id"], int(data["rank"]))
            except (KeyError, TypeError, ValueError):
                continue
            urls_by_key.setdefault(key, set()).add(data.get("url", ""))
            ranks_by_group.setdefault(key[:2], set()).add(key[2])
        for (engine_id, query_id, rank), urls in sorted(urls_by_key.items()):
            if len(urls) > 1:
                violations.append(
                    Violation(
                        kind="duplicate-rank",
                        engine_id=engine_id,
                        query_id=query_id,
                        detail=f"rank {rank} stored with {len(urls)} different URLs",
                    )
                )

        serp_records, _ = self._read_ndjson(self.serps_path(run_id))
        serp_ranks: dict[tuple[str, str], list[int]] = {}
        for data in serp_records:
            key = (data["engine_id"], data["query_id"])
            serp_ranks[key] = [int(r["rank"]) for r in data.get("results", [])]

        for engine_id in manifest.engines:
            for query in manifest.queries:
                key = (engine_id, query.id)
                expected = set(range(1, manifest.results_per_query + 1))
                if key in serp_ranks:
                    ranks = serp_ranks[key]
                    seen: set[int] = set()
                    dupes: set[int] = set()
                    for rank in ranks:
                        (dupes if rank in seen else seen).add(rank)
                    if dupes:
                        violations.append(
                            Violation(kind="duplicate-rank", engine_id=engine_id,
                                      query_id=query.id,
                                      detail=f"SERP ranks duplicated: {sorted(dupes)}")
                        )
                missing = sorted(expected - ranks_by_group.get(key, set()))
                if missing:
                    violations.append(
                        Violation(kind="missing-rank", engine_id=engine_id,
                                  query_id=query.id, detail=f"missing ranks {missing}")
                    )
                count = len(ranks_by_group.get(key, set()))
                if count != manifest.results_per_query:
                    violations.append(
                        Violation(
                            kind="count-mismatch", engine_id=engine_id, query_id=query.id,
                            detail=f"{count} of {manifest.results_per_query} results stored",
                        )
                    )
        return violations
