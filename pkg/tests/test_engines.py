import json

import pytest

from serpeval.corpus import QuerySpec, RunManifest, RunStore, Topic
from serpeval.engines import (
    AdapterConfigError,
    FixtureAdapter,
    GenericApiAdapter,
    NetworkFailure,
    ParseFailure,
    execute_query,
    parse_serp,
    run_protocol,
    validate_engine_id,
)
from serpeval.fetching import FetchPool

from conftest import write_ndjson_fixture

QUERY = QuerySpec(id="q01", topic_id="t1", text="world cup")


def serp_html(entries, base=None):
    base_tag = f'<base href="{base}">' if base else ""
    items = "".join(
        f'<li class="result"><a href="{url}">{title}</a>'
        f'<p class="snippet">{snippet}</p></li>'
        for url, title, snippet in entries
    )
    return f"<html><head>{base_tag}</head><body><ol class=\"results\">{items}</ol></body></html>"


class TestParseSerp:
    def test_ten_entries_ranked(self):
        html = serp_html(
            [(f"http://s{i}.test/p", f"Title {i}", f"snip {i}") for i in range(10)]
        )
        results = parse_serp("fixture-a", html)
        assert [r.rank for r in results] == list(range(1, 11))
        assert results[0].url == "http://s0.test/p"
        assert results[0].title == "Title 0"
        assert results[0].snippet == "snip 0"

    def test_relative_href_absolutized_against_base_tag(self):
        html = serp_html([("/page/1", "One", "s")], base="http://engine.test/serp")
        results = parse_serp("fixture-a", html)
        assert results[0].url == "http://engine.test/page/1"

    def test_relative_href_absolutized_against_argument(self):
        html = serp_html([("/page/2", "Two", "s")])
        results = parse_serp("fixture-a", html, base_url="http://other.test/")
        assert results[0].url == "http://other.test/page/2"

    def test_empty_results_container_is_empty_list(self):
        html = '<html><body><ol class="results"></ol></body></html>'
        assert parse_serp("fixture-a", html) == []

    def test_unrecognized_markup_names_missing_element(self):
        with pytest.raises(ParseFailure, match="results"):
            parse_serp("fixture-a", "<html><body><p>just text</p></body></html>")

    def test_result_without_anchor_names_position(self):
        html = '<ol class="results"><li class="result">no link</li></ol>'
        with pytest.raises(ParseFailure, match="result 1"):
            parse_serp("fixture-a", html)


class TestFixtureAdapter:
    def test_ndjson_fixture_deterministic(self, tmp_path):
        items = [
            {"url": f"http://s{i}.test/p", "title": f"T{i}", "snippet": f"s{i}"}
            for i in range(20)
        ]
        write_ndjson_fixture(tmp_path / "eng", "q01", items)
        adapter = FixtureAdapter("fixture-a", tmp_path / "eng")
        first = adapter.search(QUERY, 20)
        second = adapter.search(QUERY, 20)
        assert [r.url for r in first] == [r.url for r in second]
        assert [r.rank for r in first] == list(range(1, 21))

    def test_truncation_to_k(self, tmp_path):
        items = [{"url": f"http://s{i}.test/p"} for i in range(20)]
        write_ndjson_fixture(tmp_path / "eng", "q01", items)
        adapter = FixtureAdapter("fixture-a", tmp_path / "eng")
        results = adapter.search(QUERY, 5)
        assert [r.rank for r in results] == [1, 2, 3, 4, 5]

    def test_html_fixture(self, tmp_path):
        directory = tmp_path / "eng"
        directory.mkdir()
        (directory / "q01.html").write_text(
            serp_html([("http://a.test/1", "A", "sa"), ("http://b.test/2", "B", "sb")])
        )
        adapter = FixtureAdapter("fixture-a", directory)
        results = adapter.search(QUERY, 20)
        assert len(results) == 2
        assert results[1].title == "B"

    def test_missing_fixture_is_config_error(self, tmp_path):
        directory = tmp_path / "eng"
        directory.mkdir()
        adapter = FixtureAdapter("fixture-a", directory)
        with pytest.raises(AdapterConfigError, match="q01"):
            adapter.search(QUERY, 20)

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(AdapterConfigError):
            FixtureAdapter("fixture-a", tmp_path / "absent")


class TestEngineId:
    def test_valid(self):
        assert validate_engine_id("fixture-a") == "fixture-a"

    @pytest.mark.parametrize("bad", ["Google", "has space", "", "UPPER"])
    def test_invalid(self, bad):
        with pytest.raises(AdapterConfigError):
            validate_engine_id(bad)


class TestExecuteQuery:
    def test_fixture_with_20_results(self, tmp_path):
        items = [{"url": f"http://s{i}.test/p"} for i in range(20)]
        write_ndjson_fixture(tmp_path / "eng", "q01", items)
        adapter = FixtureAdapter("fixture-a", tmp_path / "eng")
        response = execute_query(adapter, QUERY, 20)
        assert len(response.results) == 20
        assert response.elapsed > 0

    def test_injected_delay_reflected_in_elapsed(self, tmp_path):
        write_ndjson_fixture(tmp_path / "eng", "q01", [{"url": "http://s.test/p"}])
        adapter = FixtureAdapter("fixture-a", tmp_path / "eng", delay_s=0.17)
        response = execute_query(adapter, QUERY, 1)
        assert 0.17 <= response.elapsed <= 0.45

    def test_k_must_be_positive(self, tmp_path):
        write_ndjson_fixture(tmp_path / "eng", "q01", [{"url": "http://s.test/p"}])
        adapter = FixtureAdapter("fixture-a", tmp_path / "eng")
        with pytest.raises(ValueError):
            execute_query(adapter, QUERY, 0)


class TestGenericApiAdapter:
    def test_parses_json_response(self, server):
        payload = {
            "data": {
                "hits": [
                    {"link": "http://a.test/1", "name": "A", "text": "sa"},
                    {"link": "http://b.test/2", "name": "B", "text": "sb"},
                ]
            }
        }
        server.set("/search", 200, json.dumps(payload).encode(), "application/json")
        adapter = GenericApiAdapter(
            "api-x",
            server.url("/search") + "?q={query}&n={count}",
            results_path="data.hits",
            fields={"url": "link", "title": "name", "snippet": "text"},
        )
        results = adapter.search(QUERY, 2)
        assert [r.url for r in results] == ["http://a.test/1", "http://b.test/2"]
        assert results[0].title == "A"

    def test_network_failure_carries_attempt_count(self):
        adapter = GenericApiAdapter("api-x", "http://127.0.0.1:1/s?q={query}")
        with pytest.raises(NetworkFailure) as exc_info:
            execute_query(adapter, QUERY, 5, max_attempts=3)
        assert exc_info.value.attempts == 3

    def test_template_requires_query_placeholder(self):
        with pytest.raises(AdapterConfigError):
            GenericApiAdapter("api-x", "http://h.test/static")


class TestRunProtocol:
    def build_run(self, tmp_path, server, engines=("fix-a", "fix-b"), n_results=3):
        for i in range(n_results):
            server.set_page(f"/doc/{i}", f"<p>world cup page {i}</p>")
        items = [{"url": server.url(f"/doc/{i}")} for i in range(n_results)]
        adapters = {}
        for engine in engines:
            write_ndjson_fixture(tmp_path / engine, "q01", items)
            adapters[engine] = FixtureAdapter(engine, tmp_path / engine)
        manifest = RunManifest(
            run_id="run1", engines=list(engines),
            topics=[Topic(id="t1", label="Sports")],
            queries=[QUERY], results_per_query=n_results,
        )
        return manifest, adapters

    def test_small_protocol_stores_all_triplets(self, tmp_path, server):
        manifest, adapters = self.build_run(tmp_path, server)
        store = RunStore(tmp_path / "data")
        store.create_run(manifest)
        with FetchPool(max_workers=4, per_host_delay_s=0.0) as pool:
            summary = run_protocol(store, manifest, adapters, pool)
        assert summary.triplets_stored == 6
        loaded = store.load_run("run1")
        assert loaded.triplet_count == 6
        assert not loaded.gaps
        for group in loaded.groups.values():
            assert [t.rank for t in group] == [1, 2, 3]
            assert all(t.content for t in group)
        serps, _ = store.load_serps("run1")
        assert len(serps) == 2
        assert all(s.elapsed >= 0 for s in serps)
        raw = store.raw_path("run1", "fix-a", "q01", 1)
        assert raw.exists() and b"world cup" in raw.read_bytes()

    def test_404_recorded_not_fatal(self, tmp_path, server):
        manifest, adapters = self.build_run(tmp_path, server, engines=("fix-a",))
        server.set("/doc/1", 404, b"gone")
        store = RunStore(tmp_path / "data")
        store.create_run(manifest)
        with FetchPool(max_workers=2, per_host_delay_s=0.0) as pool:
            summary = run_protocol(store, manifest, adapters, pool)
        assert summary.fetch_failures == 1
        group = store.load_run("run1").groups[("fix-a", "q01")]
        failed = [t for t in group if t.rank == 2][0]
        assert failed.http_status == 404
        assert failed.content is None

    def test_missing_adapter_rejected(self, tmp_path, server):
        manifest, adapters = self.build_run(tmp_path, server)
        del adapters["fix-b"]
        store = RunStore(tmp_path / "data")
        store.create_run(manifest)
        with pytest.raises(AdapterConfigError, match="fix-b"):
            run_protocol(store, manifest, adapters)
