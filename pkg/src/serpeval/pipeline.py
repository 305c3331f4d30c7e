"""End-to-end pipeline stages: run, probe, score, report.

Each stage reads the previous stage's persisted artifacts from the run
directory and writes its own, so stages can run in separate processes
and reports stay re-derivable from raw data. Stage order violations
raise PipelineOrderError naming the missing artifact.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import HarnessConfig, ProbeSettings
from .corpus import LoadedRun, RunStore, Triplet
from .engines import RunSummary, run_protocol
from .extraction import DocumentText, tokenize
from .fetching import FetchPool
from .judgments import AdjustedScore, ContextStore, recompute_relevance
from .probe import (
    EnginePerformance,
    GroupProbe,
    LinkStatus,
    ProbeReport,
    check_link,
    detect_parasite,
    detect_redundant,
    score_performance,
)
from .relevance import (
    TopicNote,
    build_hierarchy,
    build_index,
    compute_weight,
    scale_to_ten,
)
from .report import (
    FinalEvaluation,
    TableReport,
    couple_levels,
    emit,
    level_scores,
    table_coupled,
    table_performance,
    table_query,
    table_user,
)


class PipelineOrderError(Exception):
    """A stage ran before the artifact it needs existed."""

    def __init__(self, message: str, missing: str) -> None:
        super().__init__(message)
        self.missing = missing


def probe_report_path(store: RunStore, run_id: str) -> Path:
    return store.run_dir(run_id) / "probe_report.ndjson"


def relevance_scores_path(store: RunStore, run_id: str) -> Path:
    return store.run_dir(run_id) / "relevance_scores.ndjson"


# -- run stage -----------------------------------------------------------


def stage_run(config: HarnessConfig, force: bool = False) -> RunSummary:
    store = RunStore(config.data_root)
    manifest = config.manifest()
    adapters = config.adapters()
    store.create_run(manifest, force=force)
    pool = FetchPool(
        max_workers=config.fetch.max_workers,
        per_host_delay_s=config.fetch.per_host_delay_ms / 1000.0,
        timeout_s=config.fetch.timeout_s,
    )
    with pool:
        return run_protocol(store, manifest, adapters, pool)


# -- probe stage ---------------------------------------------------------


def _group_urls(store: RunStore, run: LoadedRun) -> dict[tuple[str, str], list[str]]:
    """Analyzed links per (engine, query): SERP order, falling back to triplets."""
    serps, _ = store.load_serps(run.manifest.run_id)
    groups: dict[tuple[str, str], list[str]] = {}
    for serp in serps:
        groups[(serp.engine_id, serp.query_id)] = [r.url for r in serp.results]
    for key, triplets in run.groups.items():
        groups.setdefault(key, [t.url for t in triplets])
    return groups


def stage_probe(
    data_root: Path | str,
    run_id: str,
    settings: ProbeSettings | None = None,
    max_workers: int = 8,
    per_host_delay_s: float = 0.0,
    timeout_s: float = 10.0,
) -> ProbeReport:
    """Re-check every analyzed link live and score engine performance."""
    settings = settings or ProbeSettings()
    store = RunStore(data_root)
    try:
        run = store.load_run(run_id)
    except Exception as exc:
        raise PipelineOrderError(
            f"cannot probe: {exc}", missing=str(store.manifest_path(run_id))
        ) from exc
    group_urls = _group_urls(store, run)

    unique_urls = sorted({url for urls in group_urls.values() for url in urls})
    policy = settings.retry_policy()
    pool = FetchPool(
        max_workers=max_workers, per_host_delay_s=per_host_delay_s, timeout_s=timeout_s
    )
    with pool:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            statuses = list(
                executor.map(
                    lambda url: check_link(
                        url, policy, pool.fetch_once,
                        soft404_phrases=settings.soft404_phrases,
                    ),
                    unique_urls,
                )
            )
    status_by_url = {status.url: status for status in statuses}

    query_words = {
        q.id: tokenize(q.text) for q in run.manifest.queries
    }
    groups: list[GroupProbe] = []
    for (engine_id, query_id), urls in sorted(group_urls.items()):
        triplets = {t.url: t for t in run.groups.get((engine_id, query_id), [])}
        redundancy = detect_redundant(urls, level=settings.redundancy_level)
        dead = 0
        parasites = 0
        unscorable = 0
        link_notes: dict[str, int] = {}
        suspects: list[str] = []
        for url in urls:
            status = status_by_url[url]
            link_notes[url] = status.note
            if status.state == "dead":
                dead += 1
            elif status.state == "suspect-soft-404":
                suspects.append(url)
            triplet = triplets.get(url)
            tokens = (
                tuple(tokenize(triplet.content))
                if triplet is not None and triplet.content is not None
                else None
            )
            check = detect_parasite(
                query_words[query_id], tokens,
                host_blocklist=settings.parasite_host_blocklist, url=url,
            )
            if check.parasite:
                parasites += 1
            if not check.scorable:
                unscorable += 1
        groups.append(
            GroupProbe(
                engine_id=engine_id,
                query_id=query_id,
                analyzed_count=len(urls),
                dead_count=dead,
                redundant_count=redundancy.redundant_count,
                parasite_count=parasites,
                unscorable_count=unscorable,
                link_notes=link_notes,
                suspect_urls=suspects,
            )
        )

    serps, _ = store.load_serps(run_id)
    elapsed_by_engine: dict[str, list[float]] = {}
    for serp in serps:
        elapsed_by_engine.setdefault(serp.engine_id, []).append(serp.elapsed)
    report = score_performance(groups, elapsed_by_engine, statuses)
    _write_probe_report(probe_report_path(store, run_id), report)
    return report


def _write_probe_report(path: Path, report: ProbeReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for link in report.links:
            fh.write(json.dumps({
                "kind": "link", "url": link.url, "state": link.state,
                "attempts": link.attempts, "final_http_status": link.final_http_status,
                "note": link.note, "checked_at": link.checked_at,
            }, ensure_ascii=False) + "\n")
        for group in report.groups:
            fh.write(json.dumps({
                "kind": "group", "engine_id": group.engine_id,
                "query_id": group.query_id, "analyzed_count": group.analyzed_count,
                "dead_count": group.dead_count,
                "redundant_count": group.redundant_count,
                "parasite_count": group.parasite_count,
                "unscorable_count": group.unscorable_count,
                "redundancy_note": group.redundancy_note,
                "link_notes": group.link_notes,
                "suspect_urls": group.suspect_urls,
            }, ensure_ascii=False) + "\n")
        for engine in report.engines:
            fh.write(json.dumps({
                "kind": "engine", "engine_id": engine.engine_id,
                "analyzed_count": engine.analyzed_count,
                "dead_rate": engine.dead_rate,
                "parasite_rate": engine.parasite_rate,
                "redundancy_rate": engine.redundancy_rate,
                "suspect_count": engine.suspect_count,
                "avg_response_time": engine.avg_response_time,
            }, ensure_ascii=False) + "\n")


def load_probe_report(data_root: Path | str, run_id: str) -> ProbeReport:
    store = RunStore(data_root)
    path = probe_report_path(store, run_id)
    if not path.exists():
        raise PipelineOrderError(
            f"probe report missing for run {run_id!r}; run `serpeval probe` first",
            missing=str(path),
        )
    links: list[LinkStatus] = []
    groups: list[GroupProbe] = []
    engines: list[EnginePerformance] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            kind = data.pop("kind")
            if kind == "link":
                data.pop("note", None)
                links.append(LinkStatus(**data))
            elif kind == "group":
                data.pop("redundancy_note", None)
                groups.append(GroupProbe(**data))
            elif kind == "engine":
                engines.append(EnginePerformance(**data))
    return ProbeReport(groups=groups, engines=engines, links=links)


# -- score stage ---------------------------------------------------------


@dataclass
class ScoreRecord:
    engine_id: str
    query_id: str
    rank: int
    url: str
    weight: float
    degenerate: bool = False
    contributions: list[dict] = field(default_factory=list)


def stage_score(data_root: Path | str, run_id: str) -> list[ScoreRecord]:
    """Compute the weighting formula over every analyzed triplet."""
    store = RunStore(data_root)
    try:
        run = store.load_run(run_id)
    except Exception as exc:
        raise PipelineOrderError(
            f"cannot score: {exc}", missing=str(store.manifest_path(run_id))
        ) from exc
    queries = {q.id: q for q in run.manifest.queries}
    records: list[ScoreRecord] = []
    for (engine_id, query_id), triplets in sorted(run.groups.items()):
        query = queries.get(query_id)
        if query is None:
            continue
        hierarchy = build_hierarchy(query_id, query.text, exact_mode=query.exact_mode)
        analyzed = [t for t in triplets if t.content is not None]
        documents = {
            t.rank: DocumentText(url=t.url, tokens=tuple(tokenize(t.content)))
            for t in analyzed
        }
        index = build_index(engine_id, list(documents.values()), hierarchy)
        for triplet in analyzed:
            score = compute_weight(documents[triplet.rank], index)
            records.append(
                ScoreRecord(
                    engine_id=engine_id,
                    query_id=query_id,
                    rank=triplet.rank,
                    url=triplet.url,
                    weight=score.weight,
                    degenerate=score.degenerate,
                    contributions=[
                        {
                            "group": list(c.group),
                            "frequency": c.frequency,
                            "contribution": c.contribution,
                        }
                        for c in score.contributions
                    ],
                )
            )
    path = relevance_scores_path(store, run_id)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps({
                "engine_id": record.engine_id, "query_id": record.query_id,
                "rank": record.rank, "url": record.url, "weight": record.weight,
                "degenerate": record.degenerate,
                "contributions": record.contributions,
            }, ensure_ascii=False) + "\n")
    return records


def load_relevance_scores(data_root: Path | str, run_id: str) -> list[ScoreRecord]:
    store = RunStore(data_root)
    path = relevance_scores_path(store, run_id)
    if not path.exists():
        raise PipelineOrderError(
            f"relevance scores missing for run {run_id!r}; run `serpeval score` first",
            missing=str(path),
        )
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ScoreRecord(**json.loads(line)))
    return records


def weights_by_engine_query(records: list[ScoreRecord]) -> dict[str, dict[str, list[float]]]:
    weights: dict[str, dict[str, list[float]]] = {}
    for record in records:
        weights.setdefault(record.engine_id, {}).setdefault(record.query_id, []).append(
            record.weight
        )
    return weights


def judgment_adjusted_scores(
    data_root: Path | str, run_id: str, engine_id: str, query_id: str
) -> list[AdjustedScore]:
    """Rescore one (engine, query) group from the votes collected so far.

    Voted results take the users' mean vote / 5; the rest keep their
    formula weight rescaled into [0, 1], flagged unjudged.
    """
    records = [
        r
        for r in load_relevance_scores(data_root, run_id)
        if r.engine_id == engine_id and r.query_id == query_id
    ]
    votes_by_rank: dict[int, list[int]] = {}
    for (e, q, rank), votes in ContextStore(data_root).votes_by_result(run_id).items():
        if e == engine_id and q == query_id:
            votes_by_rank[rank] = list(votes.values())
    return recompute_relevance(
        [(r.url, r.rank, r.weight) for r in sorted(records, key=lambda r: r.rank)],
        votes_by_rank,
    )


# -- report stage ---------------------------------------------------------


@dataclass
class RunReport:
    tables: dict[str, TableReport]
    evaluations: list[FinalEvaluation]
    topic_notes: list[TopicNote]


def compute_topic_notes(
    manifest, records: list[ScoreRecord]
) -> list[TopicNote]:
    weights = weights_by_engine_query(records)
    notes = []
    for engine_id in manifest.engines:
        for topic in manifest.topics:
            query_ids = [q.id for q in manifest.queries_for_topic(topic.id)]
            notes.append(scale_to_ten(engine_id, topic.id, query_ids, weights))
    return notes


def build_run_report(
    data_root: Path | str,
    run_id: str,
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
    require_all: bool = True,
) -> RunReport:
    """Assemble the three tables and the coupled evaluation for a run.

    With ``require_all`` (the CLI default), missing probe or score
    artifacts raise PipelineOrderError; the service passes False to
    serve whatever exists, flagged.
    """
    store = RunStore(data_root)
    manifest = store.load_manifest(run_id)
    tables: dict[str, TableReport] = {}

    probe_report = None
    try:
        probe_report = load_probe_report(data_root, run_id)
    except PipelineOrderError:
        if require_all:
            raise
    records: list[ScoreRecord] = []
    try:
        records = load_relevance_scores(data_root, run_id)
    except PipelineOrderError:
        if require_all:
            raise

    performance_by_engine: dict[str, EnginePerformance] = {}
    if probe_report is not None:
        tables["performance"] = table_performance(probe_report.engines)
        performance_by_engine = {e.engine_id: e for e in probe_report.engines}

    topic_notes: list[TopicNote] = []
    if records:
        topic_notes = compute_topic_notes(manifest, records)
        tables["query_relevance"] = table_query(
            topic_notes,
            [(t.id, t.label) for t in manifest.topics],
            manifest.engines,
        )

    contexts = ContextStore(data_root)
    votes = contexts.votes_by_result(run_id)
    user_table = None
    if votes:
        user_table = table_user(votes, manifest.engines, manifest=manifest)
        tables["user_relevance"] = user_table

    evaluations: list[FinalEvaluation] = []
    scores_by_engine = {}
    for engine_id in manifest.engines:
        engine_notes = [n for n in topic_notes if n.engine_id == engine_id]
        r20 = user_table.cell("R@20", engine_id) if user_table is not None else None
        scores = level_scores(
            performance_by_engine.get(engine_id), engine_notes, r20
        )
        scores.engine_id = engine_id
        scores_by_engine[engine_id] = scores
        if any(v is not None for v in scores.as_tuple()):
            evaluations.append(couple_levels(scores, weights))
    if evaluations:
        tables["coupled"] = table_coupled(evaluations, scores_by_engine)
    return RunReport(tables=tables, evaluations=evaluations, topic_notes=topic_notes)


def stage_report(
    data_root: Path | str,
    run_id: str,
    formats: list[str],
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
    locale: str = "point",
) -> RunReport:
    report = build_run_report(data_root, run_id, weights=weights)
    store = RunStore(data_root)
    emit(report.tables, formats, store.reports_dir(run_id), locale=locale)
    return report
