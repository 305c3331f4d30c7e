"""Run-definition config files.

The protocol (engines, topics, queries, result count) is naturally a
document, so runs are defined in a YAML (or JSON) file and flags only
override. Key set:

    data_root: path              # where runs and contexts live
    run:
      run_id: demo
      results_per_query: 20
      engines:                   # one adapter per engine
        - id: fixture-a
          mode: fixture          # fixture | api
          fixtures: ./serps/a    # fixture mode: dir of <query_id>.{ndjson,html}
          delay_s: 0.0           # fixture mode: simulated latency
          url_template: ...      # api mode: {query} and {count} placeholders
          results_path: results  # api mode: dot path to the result list
          fields: {url: ..., title: ..., snippet: ...}
      topics:
        - id: sports
          label: Sports
          queries:
            - id: q01
              text: world cup 2010
              exact: false
    fetch:
      max_workers: 8
      per_host_delay_ms: 500
      timeout_s: 10
    probe:
      max_attempts: 3
      retry_delay_ms: 250       # live runs should use minutes-scale delays
      redundancy_level: exact-url   # exact-url | same-site
      soft404_phrases: [...]
      parasite_host_blocklist: []
    serve:
      addr: 127.0.0.1:8080
      blind: true
      allow_skip: false
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .corpus import QuerySpec, RunManifest, Topic
from .engines import AdapterConfigError, EngineAdapter, FixtureAdapter, GenericApiAdapter
from .probe import DEFAULT_SOFT404_PHRASES, RetryPolicy


class ConfigError(Exception):
    pass


@dataclass
class FetchSettings:
    max_workers: int = 8
    per_host_delay_ms: float = 500.0
    timeout_s: float = 10.0


@dataclass
class ProbeSettings:
    max_attempts: int = 3
    retry_delay_ms: float = 250.0
    redundancy_level: str = "exact-url"
    soft404_phrases: list[str] = field(default_factory=lambda: list(DEFAULT_SOFT404_PHRASES))
    parasite_host_blocklist: list[str] = field(default_factory=list)

    def retry_policy(self) -> RetryPolicy:
        return RetryPolicy(max_attempts=self.max_attempts,
                           retry_delay_ms=self.retry_delay_ms)


@dataclass
class ServeSettings:
    addr: str = "127.0.0.1:8080"
    blind: bool = True
    allow_skip: bool = False


@dataclass
class HarnessConfig:
    data_root: Path
    run_id: str
    results_per_query: int
    engines: list[dict]
    topics: list[dict]
    fetch: FetchSettings
    probe: ProbeSettings
    serve: ServeSettings
    config_dir: Path

    def manifest(self) -> RunManifest:
        topics = []
        queries = []
        for topic_data in self.topics:
            topic = Topic(id=str(topic_data["id"]), label=str(topic_data["label"]))
            topics.append(topic)
            for query_data in topic_data.get("queries", []):
                queries.append(
                    QuerySpec(
                        id=str(query_data["id"]),
                        topic_id=topic.id,
                        text=str(query_data["text"]),
                        exact_mode=bool(query_data.get("exact", False)),
                    )
                )
        if not queries:
            raise ConfigError("config defines no queries")
        return RunManifest(
            run_id=self.run_id,
            engines=[str(e["id"]) for e in self.engines],
            topics=topics,
            queries=queries,
            results_per_query=self.results_per_query,
        )

    def adapters(self) -> dict[str, EngineAdapter]:
        adapters: dict[str, EngineAdapter] = {}
        for engine_data in self.engines:
            engine_id = str(engine_data.get("id", ""))
            mode = engine_data.get("mode", "fixture")
            try:
                if mode == "fixture":
                    directory = Path(engine_data["fixtures"])
                    if not directory.is_absolute():
                        directory = self.config_dir / directory
                    adapters[engine_id] = FixtureAdapter(
                        engine_id, directory,
                        delay_s=float(engine_data.get("delay_s", 0.0)),
                    )
                elif mode == "api":
                    adapters[engine_id] = GenericApiAdapter(
                        engine_id,
                        url_template=str(engine_data["url_template"]),
                        results_path=str(engine_data.get("results_path", "results")),
                        fields=engine_data.get("fields"),
                        timeout_s=self.fetch.timeout_s,
                    )
                else:
                    raise ConfigError(
                        f"engine {engine_id!r}: unknown adapter mode {mode!r}"
                    )
            except KeyError as exc:
                raise ConfigError(f"engine {engine_id!r}: missing key {exc}") from exc
            except AdapterConfigError as exc:
                raise ConfigError(str(exc)) from exc
        return adapters


def load_config(path: Path | str) -> HarnessConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    run_data = data.get("run", {})
    for required in ("run_id", "engines", "topics"):
        if required not in run_data:
            raise ConfigError(f"config lacks run.{required}")
    data_root = Path(data.get("data_root", "data"))
    if not data_root.is_absolute():
        data_root = path.parent / data_root
    fetch_data = data.get("fetch", {})
    probe_data = data.get("probe", {})
    serve_data = data.get("serve", {})
    return HarnessConfig(
        data_root=data_root,
        run_id=str(run_data["run_id"]),
        results_per_query=int(run_data.get("results_per_query", 20)),
        engines=list(run_data["engines"]),
        topics=list(run_data["topics"]),
        fetch=FetchSettings(
            max_workers=int(fetch_data.get("max_workers", 8)),
            per_host_delay_ms=float(fetch_data.get("per_host_delay_ms", 500.0)),
            timeout_s=float(fetch_data.get("timeout_s", 10.0)),
        ),
        probe=ProbeSettings(
            max_attempts=int(probe_data.get("max_attempts", 3)),
            retry_delay_ms=float(probe_data.get("retry_delay_ms", 250.0)),
            redundancy_level=str(probe_data.get("redundancy_level", "exact-url")),
            soft404_phrases=list(
                probe_data.get("soft404_phrases", DEFAULT_SOFT404_PHRASES)
            ),
            parasite_host_blocklist=list(
                probe_data.get("parasite_host_blocklist", [])
            ),
        ),
        serve=ServeSettings(
            addr=str(serve_data.get("addr", "127.0.0.1:8080")),
            blind=bool(serve_data.get("blind", True)),
            allow_skip=bool(serve_data.get("allow_skip", False)),
        ),
        config_dir=path.parent,
    )
