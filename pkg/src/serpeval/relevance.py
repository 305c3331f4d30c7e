"""Query-context relevance scoring.

Implements the incremental word-group weighting: a query of n words is
decomposed into its contiguous prefixes of length n, n-1, ..., 1 (the
word-group hierarchy), and each document is scored by summing, over the
hierarchy, the group's phrase frequency normalized by document length,
boosted quadratically by group length relative to the query length, and
discounted by a log2 inverse-document-frequency term over the scoring
scope:

    weight(D) = sum over groups G of
        (freq(G, D) / len(D)) * (len(G)^2 / len(query)) * log2(TNRD / NDWG)

where TNRD is the number of analyzed documents in the scope and NDWG the
number of those containing G. Groups absent from a document contribute 0
without evaluating the log term; a group present in every document also
contributes 0 (the log vanishes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .extraction import DocumentText, count_group, tokenize


@dataclass(frozen=True)
class WordGroupHierarchy:
    """Ordered word groups derived from one query, longest first."""

    query_id: str
    groups: tuple[tuple[str, ...], ...]
    exact_mode: bool

    @property
    def query_words(self) -> tuple[str, ...]:
        return self.groups[0]

    @property
    def query_length(self) -> int:
        return len(self.groups[0])


@dataclass
class OccurrenceIndex:
    """Frequencies of one hierarchy's groups over one scoring scope.

    The scope is the analyzed result list of a single (engine, query)
    group; documents whose fetch failed are excluded from ``tnrd``.
    """

    engine_id: str
    query_id: str
    hierarchy: WordGroupHierarchy
    tnrd: int
    docs_with_group: dict[tuple[str, ...], int]
    frequencies: dict[tuple[tuple[str, ...], str], int]

    def frequency(self, group: tuple[str, ...], url: str) -> int:
        return self.frequencies.get((group, url), 0)

    def ndwg(self, group: tuple[str, ...]) -> int:
        return self.docs_with_group.get(group, 0)


@dataclass
class GroupContribution:
    group: tuple[str, ...]
    frequency: int
    contribution: float


@dataclass
class RelevanceScore:
    """Weight of one result with its per-group breakdown."""

    engine_id: str
    query_id: str
    url: str
    weight: float
    contributions: list[GroupContribution] = field(default_factory=list)
    degenerate: bool = False  # zero-length document


def build_hierarchy(query_id: str, text: str, exact_mode: bool = False) -> WordGroupHierarchy:
    """Derive the word-group hierarchy for a query.

    Non-exact mode yields every prefix of the query from full length down
    to the first word alone; exact mode yields the full query as the only
    group.
    """
    words = tuple(tokenize(text))
    if not words:
        raise ValueError(f"query {query_id!r} has no words after tokenization")
    if exact_mode:
        groups = (words,)
    else:
        groups = tuple(words[:n] for n in range(len(words), 0, -1))
    return WordGroupHierarchy(query_id=query_id, groups=groups, exact_mode=exact_mode)


def build_index(
    engine_id: str,
    documents: list[DocumentText],
    hierarchy: WordGroupHierarchy,
) -> OccurrenceIndex:
    """Count group occurrences over one (engine, query) scope.

    ``documents`` must already be restricted to the analyzed (fetched)
    results; TNRD is their count.
    """
    docs_with_group: dict[tuple[str, ...], int] = {g: 0 for g in hierarchy.groups}
    frequencies: dict[tuple[tuple[str, ...], str], int] = {}
    for doc in documents:
        for group in hierarchy.groups:
            freq = count_group(doc.tokens, group)
            if freq > 0:
                frequencies[(group, doc.url)] = freq
                docs_with_group[group] += 1
    return OccurrenceIndex(
        engine_id=engine_id,
        query_id=hierarchy.query_id,
        hierarchy=hierarchy,
        tnrd=len(documents),
        docs_with_group=docs_with_group,
        frequencies=frequencies,
    )


def compute_weight(doc: DocumentText, index: OccurrenceIndex) -> RelevanceScore:
    """Score one document of the index scope against the query hierarchy."""
    hierarchy = index.hierarchy
    score = RelevanceScore(
        engine_id=index.engine_id,
        query_id=index.query_id,
        url=doc.url,
        weight=0.0,
    )
    if doc.length == 0:
        # The length-normalized frequency is undefined; an empty page
        # carries no information, so it scores 0 and is flagged.
        score.degenerate = True
        score.contributions = [
            GroupContribution(group=g, frequency=0, contribution=0.0)
            for g in hierarchy.groups
        ]
        return score

    query_length = hierarchy.query_length
    total = 0.0
    for group in hierarchy.groups:
        freq = index.frequency(group, doc.url)
        ndwg = index.ndwg(group)
        if freq == 0 or ndwg == 0 or ndwg == index.tnrd:
            contribution = 0.0
        else:
            contribution = (
                (freq / doc.length)
                * (len(group) ** 2 / query_length)
                * math.log2(index.tnrd / ndwg)
            )
        total += contribution
        score.contributions.append(
            GroupContribution(group=group, frequency=freq, contribution=contribution)
        )
    score.weight = total
    return score


def rank_group(
    documents: list[DocumentText],
    index: OccurrenceIndex,
    engine_ranks: dict[str, int] | None = None,
) -> list[RelevanceScore]:
    """Score and order one scope's documents by descending weight.

    Ties keep the engine's original rank order (``engine_ranks`` maps url
    to 1-based rank; document order is used when omitted).
    """
    ranks = engine_ranks or {doc.url: i + 1 for i, doc in enumerate(documents)}
    scores = [compute_weight(doc, index) for doc in documents]
    scores.sort(key=lambda s: (-s.weight, ranks.get(s.url, math.inf)))
    return scores


@dataclass
class TopicNote:
    """Per-topic note on 10 for one engine, with degeneracy flags."""

    engine_id: str
    topic_id: str
    note: float
    degenerate_queries: list[str] = field(default_factory=list)


def scale_to_ten(
    engine_id: str,
    topic_id: str,
    query_ids: list[str],
    weights_by_engine: dict[str, dict[str, list[float]]],
) -> TopicNote:
    """Convert raw weights to the engine's note on 10 for one topic.

    Per query, the engine's weights are min-max normalized against the
    pool of every engine's weights for that query, then averaged and
    scaled by 10; the topic note is the mean over the topic's queries,
    rounded to 2 decimals. A query whose pooled weights are all equal is
    degenerate and contributes the neutral note 5.0, flagged.
    """
    query_notes: list[float] = []
    degenerate: list[str] = []
    for query_id in query_ids:
        pool = [
            w
            for per_query in weights_by_engine.values()
            for w in per_query.get(query_id, [])
        ]
        own = weights_by_engine.get(engine_id, {}).get(query_id, [])
        if not own or not pool:
            continue
        lo, hi = min(pool), max(pool)
        if hi == lo:
            degenerate.append(query_id)
            query_notes.append(5.0)
            continue
        normalized = [(w - lo) / (hi - lo) for w in own]
        query_notes.append(10.0 * sum(normalized) / len(normalized))
    if not query_notes:
        return TopicNote(engine_id=engine_id, topic_id=topic_id, note=0.0,
                         degenerate_queries=degenerate)
    note = round(sum(query_notes) / len(query_notes), 2)
    return TopicNote(engine_id=engine_id, topic_id=topic_id, note=note,
                     degenerate_queries=degenerate)
