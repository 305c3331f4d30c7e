"""Aggregation into the three evaluation tables and the coupled score.

Produces the performance table (rates + response time per engine), the
user-judgment table (R@k levels per engine), the query-relevance table
(notes on 10 per topic and engine), and the convex combination of the
three level scores into one final evaluation per engine.

Rendering uses decimal points; ``locale="comma"`` switches the decimal
separator in rendered output only, never in stored values.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import RunManifest
from .probe import EnginePerformance
from .relevance import TopicNote

USER_LEVELS = (1, 5, 10, 15, 20)

PERFORMANCE_COLUMNS = (
    "Dead Links",
    "Parasites Pages",
    "Redundant Results",
    "Average Response Time",
)


@dataclass
class TableReport:
    title: str
    corner: str
    rows: list[str]
    columns: list[str]
    cells: dict[tuple[str, str], float | None]
    formats: dict[str, str] = field(default_factory=dict)  # column -> percent|seconds|plain
    flags: list[str] = field(default_factory=list)

    def cell(self, row: str, column: str) -> float | None:
        return self.cells.get((row, column))


def _format_number(value: float, locale: str) -> str:
    text = f"{value:.2f}"
    return text.replace(".", ",") if locale == "comma" else text


def format_cell(table: TableReport, row: str, column: str, locale: str = "point",
                with_unit: bool = True) -> str:
    value = table.cell(row, column)
    if value is None:
        return ""
    kind = table.formats.get(column, "plain")
    if kind == "percent":
        rendered = _format_number(value * 100, locale)
        return f"{rendered}%" if with_unit else rendered
    if kind == "seconds":
        rendered = _format_number(value, locale)
        return f"{rendered} Sec" if with_unit else rendered
    return _format_number(value, locale)


def render_text(table: TableReport, locale: str = "point") -> str:
    header = [table.corner] + list(table.columns)
    body = [
        [row] + [format_cell(table, row, col, locale) for col in table.columns]
        for row in table.rows
    ]
    widths = [
        max(len(line[i]) for line in [header] + body) for i in range(len(header))
    ]
    lines = [table.title, "-" * len(table.title)]
    for line in [header] + body:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    if table.flags:
        lines.append("")
        lines.extend(f"note: {flag}" for flag in table.flags)
    return "\n".join(lines) + "\n"


def render_csv(table: TableReport, locale: str = "point") -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([table.corner] + list(table.columns))
    for row in table.rows:
        writer.writerow(
            [row]
            + [format_cell(table, row, col, locale, with_unit=False)
               for col in table.columns]
        )
    return buffer.getvalue()


def csv_values(text: str) -> dict[tuple[str, str], float | None]:
    """Parse a rendered CSV back into its cell values (point locale)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    columns = header[1:]
    cells: dict[tuple[str, str], float | None] = {}
    for line in reader:
        for column, raw in zip(columns, line[1:]):
            cells[(line[0], column)] = float(raw) if raw else None
    return cells


def render_chart(table: TableReport, path: Path, y_label: str = "") -> Path:
    """Grouped bar chart: x = table rows, one series per column."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x_positions = range(len(table.rows))
    n_series = max(1, len(table.columns))
    width = 0.8 / n_series
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for i, column in enumerate(table.columns):
        values = [table.cell(row, column) or 0.0 for row in table.rows]
        offsets = [x + (i - (n_series - 1) / 2) * width for x in x_positions]
        ax.bar(offsets, values, width=width, label=column)
    ax.set_xticks(list(x_positions))
    ax.set_xticklabels(table.rows)
    ax.set_title(table.title)
    if y_label:
        ax.set_ylabel(y_label)
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


# -- the three tables ---------------------------------------------------


def table_performance(engines: list[EnginePerformance]) -> TableReport:
    cells: dict[tuple[str, str], float | None] = {}
    for engine in engines:
        cells[(engine.engine_id, "Dead Links")] = engine.dead_rate
        cells[(engine.engine_id, "Parasites Pages")] = engine.parasite_rate
        cells[(engine.engine_id, "Redundant Results")] = engine.redundancy_rate
        cells[(engine.engine_id, "Average Response Time")] = engine.avg_response_time
    return TableReport(
        title="Search engines performance evaluation",
        corner="Search engines",
        rows=[e.engine_id for e in engines],
        columns=list(PERFORMANCE_COLUMNS),
        cells=cells,
        formats={
            "Dead Links": "percent",
            "Parasites Pages": "percent",
            "Redundant Results": "percent",
            "Average Response Time": "seconds",
        },
    )


def level_label(k: int) -> str:
    return f"R@{k:02d}"


def table_user(
    votes_by_result: dict[tuple[str, str, int], dict[str, int]],
    engines: list[str],
    levels: tuple[int, ...] = USER_LEVELS,
    manifest: RunManifest | None = None,
) -> TableReport:
    """Mean votes per engine at each R@k level.

    Votes are averaged per result first, then across every result within
    ranks 1..k over all queries. Results nobody voted on are excluded
    from the mean; partial coverage is flagged when a manifest gives the
    expected result counts.
    """
    result_means: dict[str, dict[tuple[str, int], float]] = {e: {} for e in engines}
    for (engine_id, query_id, rank), votes in votes_by_result.items():
        if engine_id in result_means and votes:
            result_means[engine_id][(query_id, rank)] = sum(votes.values()) / len(votes)
    cells: dict[tuple[str, str], float | None] = {}
    flags: list[str] = []
    for k in levels:
        for engine_id in engines:
            values = [
                mean for (query_id, rank), mean in result_means[engine_id].items()
                if rank <= k
            ]
            cells[(level_label(k), engine_id)] = (
                round(sum(values) / len(values), 2) if values else None
            )
            if manifest is not None:
                expected = len(manifest.queries) * min(k, manifest.results_per_query)
                if len(values) < expected:
                    flags.append(
                        f"{level_label(k)}/{engine_id}: votes cover "
                        f"{len(values)} of {expected} results"
                    )
    return TableReport(
        title="Evaluation of the relevance by the user's judgments",
        corner="Relevance level",
        rows=[level_label(k) for k in levels],
        columns=list(engines),
        cells=cells,
        flags=flags,
    )


def table_query(
    topic_notes: list[TopicNote],
    topics: list[tuple[str, str]],
    engines: list[str],
) -> TableReport:
    """Notes on 10 per (topic, engine); ``topics`` is (id, label) in order."""
    labels = {topic_id: label for topic_id, label in topics}
    cells: dict[tuple[str, str], float | None] = {}
    flags: list[str] = []
    for note in topic_notes:
        cells[(labels[note.topic_id], note.engine_id)] = note.note
        for query_id in note.degenerate_queries:
            flags.append(
                f"{labels[note.topic_id]}/{note.engine_id}: degenerate weight pool "
                f"for {query_id}, neutral note used"
            )
    return TableReport(
        title="Evaluation of the results relevance according to the query",
        corner="Queries category",
        rows=[label for _, label in topics],
        columns=list(engines),
        cells=cells,
        flags=flags,
    )


# -- level coupling ------------------------------------------------------


@dataclass
class LevelScores:
    engine_id: str
    system_score: float | None
    query_score: float | None
    user_score: float | None
    flags: list[str] = field(default_factory=list)

    def as_tuple(self) -> tuple[float | None, float | None, float | None]:
        return (self.system_score, self.query_score, self.user_score)


@dataclass
class FinalEvaluation:
    engine_id: str
    coupled_score: float
    weights: tuple[float, float, float]
    flags: list[str] = field(default_factory=list)


def level_scores(
    performance: EnginePerformance | None,
    topic_notes: list[TopicNote],
    user_r20: float | None,
) -> LevelScores:
    """Normalize one engine's three level results into [0, 1] scores."""
    flags: list[str] = []
    system_score = None
    if performance is not None:
        system_score = 1.0 - (
            performance.dead_rate + performance.parasite_rate + performance.redundancy_rate
        ) / 3.0
    else:
        flags.append("system level missing")
    query_score = None
    if topic_notes:
        query_score = sum(n.note for n in topic_notes) / len(topic_notes) / 10.0
    else:
        flags.append("query level missing")
    user_score = user_r20 / 5.0 if user_r20 is not None else None
    if user_score is None:
        flags.append("user level missing")
    engine_id = performance.engine_id if performance else (
        topic_notes[0].engine_id if topic_notes else ""
    )
    return LevelScores(
        engine_id=engine_id,
        system_score=system_score,
        query_score=query_score,
        user_score=user_score,
        flags=flags,
    )


def couple_levels(
    scores: LevelScores,
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
) -> FinalEvaluation:
    """Convex combination of the three level scores.

    Weights not summing to 1 are normalized with a warning. A missing
    level has its weight redistributed proportionally over the present
    ones, flagged.
    """
    if len(weights) != 3 or any(w < 0 for w in weights):
        raise ValueError("weights must be three non-negative numbers")
    total = sum(weights)
    if total == 0:
        raise ValueError("weights must not all be zero")
    if abs(total - 1.0) > 1e-9:
        warnings.warn(f"weights sum to {total:g}; normalizing", stacklevel=2)
        weights = tuple(w / total for w in weights)
    values = scores.as_tuple()
    flags = list(scores.flags)
    available = [(v, w) for v, w in zip(values, weights) if v is not None]
    if not available:
        raise ValueError(f"no level scores available for {scores.engine_id!r}")
    active_total = sum(w for _, w in available)
    if active_total == 0:
        # All weight sat on missing levels; fall back to equal weighting.
        coupled = sum(v for v, _ in available) / len(available)
        flags.append("all weight on missing levels; averaged available levels")
    else:
        coupled = sum(v * w / active_total for v, w in available)
        if len(available) < 3:
            flags.append("weights redistributed over available levels")
    return FinalEvaluation(
        engine_id=scores.engine_id,
        coupled_score=coupled,
        weights=tuple(weights),
        flags=flags,
    )


def table_coupled(evaluations: list[FinalEvaluation],
                  levels: dict[str, LevelScores]) -> TableReport:
    cells: dict[tuple[str, str], float | None] = {}
    for evaluation in evaluations:
        score = levels[evaluation.engine_id]
        cells[(evaluation.engine_id, "System")] = score.system_score
        cells[(evaluation.engine_id, "Query")] = score.query_score
        cells[(evaluation.engine_id, "User")] = score.user_score
        cells[(evaluation.engine_id, "Coupled")] = evaluation.coupled_score
    flags = sorted({flag for e in evaluations for flag in e.flags})
    return TableReport(
        title="Coupled contextual evaluation",
        corner="Search engines",
        rows=[e.engine_id for e in evaluations],
        columns=["System", "Query", "User", "Coupled"],
        cells=cells,
        flags=flags,
    )


# -- emission -------------------------------------------------------------


CHART_Y_LABELS = {
    "performance": "rate",
    "user_relevance": "average note (0-5)",
    "query_relevance": "note on 10",
    "coupled": "score (0-1)",
}


def emit(
    tables: dict[str, TableReport],
    formats: list[str],
    out_dir: Path | str,
    locale: str = "point",
) -> list[Path]:
    """Write each named table in each requested format under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for fmt in formats:
        if fmt not in ("text", "csv", "png"):
            raise ValueError(f"unknown format {fmt!r}")
        for name, table in tables.items():
            if fmt == "text":
                path = out_dir / f"{name}.txt"
                path.write_text(render_text(table, locale), encoding="utf-8")
            elif fmt == "csv":
                path = out_dir / f"{name}.csv"
                path.write_text(render_csv(table, locale), encoding="utf-8")
            else:
                path = render_chart(
                    table, out_dir / f"{name}.png",
                    y_label=CHART_Y_LABELS.get(name, ""),
                )
            written.append(path)
    return written
