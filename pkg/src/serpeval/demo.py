"""Seed a synthetic, fully archived run without touching the network.

Useful for trying the judging UI and API locally:

    python3 -m serpeval.demo ./data --run-id demo

The generated pages embed the query words at varying densities, so
scoring and reporting produce non-trivial numbers. Result URLs carry no
engine identity, keeping blind judging meaningful.
"""

from __future__ import annotations

import argparse
import random
import time

from .corpus import QuerySpec, RunManifest, RunStore, SearchResult, SerpRecord, Topic, Triplet

TOPICS = [
    ("news", "News"), ("animals", "Animals"), ("movies", "Movies"),
    ("health", "Health"), ("sports", "Sports"), ("travel", "Travel"),
]

FILLER = (
    "lorem ipsum dolor sit amet consectetur adipiscing elit sed do eiusmod "
    "tempor incididunt ut labore et dolore magna aliqua"
).split()


def synth_content(rng: random.Random, query_words: list[str], rank: int) -> str:
    """Page text whose query-term density decays with rank."""
    words = []
    density = max(0.02, 0.5 / rank)
    for _ in range(rng.randint(40, 160)):
        if rng.random() < density:
            start = rng.randrange(len(query_words))
            end = rng.randint(start + 1, len(query_words))
            words.extend(query_words[start:end])
        else:
            words.append(rng.choice(FILLER))
    return " ".join(words)


def build_demo_run(
    data_root,
    run_id: str = "demo",
    engines: int = 2,
    topics: int = 1,
    queries_per_topic: int = 2,
    results_per_query: int = 20,
    seed: int = 2010,
) -> RunManifest:
    rng = random.Random(seed)
    engine_ids = [f"engine-{chr(ord('a') + i)}" for i in range(engines)]
    topic_objs = [Topic(id=tid, label=label) for tid, label in TOPICS[:topics]]
    query_objs = []
    query_texts = {
        "news": ["world news today", "breaking headlines"],
        "animals": ["endangered species list", "animal migration"],
        "movies": ["classic film reviews", "movie award winners"],
        "health": ["healthy diet tips", "exercise benefits"],
        "sports": ["world cup 2010", "famous football players"],
        "travel": ["cheap flight deals", "best travel destinations"],
    }
    counter = 1
    for topic in topic_objs:
        for text in query_texts[topic.id][:queries_per_topic]:
            query_objs.append(QuerySpec(id=f"q{counter:02d}", topic_id=topic.id, text=text))
            counter += 1
    manifest = RunManifest(
        run_id=run_id, engines=engine_ids, topics=topic_objs,
        queries=query_objs, results_per_query=results_per_query,
    )
    store = RunStore(data_root)
    store.create_run(manifest, force=True)
    now = time.time()
    for engine_index, engine_id in enumerate(engine_ids):
        for query in query_objs:
            query_words = query.text.split()
            results = []
            for rank in range(1, results_per_query + 1):
                doc_id = rng.randrange(10 ** 8)
                url = f"http://demo.invalid/{query.id}/doc-{doc_id}"
                results.append(
                    SearchResult(
                        engine_id=engine_id, query_id=query.id, rank=rank, url=url,
                        title=f"Document {doc_id} about {query.text}",
                        snippet=f"Snippet mentioning {query_words[0]} and more.",
                    )
                )
                store.store_triplet(
                    run_id,
                    Triplet(
                        engine_id=engine_id, query_id=query.id, rank=rank, url=url,
                        content=synth_content(rng, query_words, rank),
                        fetched_at=now, http_status=200,
                    ),
                )
            store.store_serp_record(
                run_id,
                SerpRecord(
                    engine_id=engine_id, query_id=query.id,
                    elapsed=0.1 + 0.03 * engine_index, results=results,
                ),
            )
    return manifest


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("data_root")
    parser.add_argument("--run-id", default="demo")
    parser.add_argument("--engines", type=int, default=2)
    parser.add_argument("--topics", type=int, default=1)
    parser.add_argument("--queries-per-topic", type=int, default=2)
    parser.add_argument("--results-per-query", type=int, default=20)
    parser.add_argument("--seed", type=int, default=2010)
    args = parser.parse_args()
    manifest = build_demo_run(
        args.data_root, run_id=args.run_id, engines=args.engines,
        topics=args.topics, queries_per_topic=args.queries_per_topic,
        results_per_query=args.results_per_query, seed=args.seed,
    )
    print(
        f"run {manifest.run_id}: {manifest.expected_triplets} triplets under "
        f"{args.data_root}"
    )


if __name__ == "__main__":
    main()
