import pytest

from serpeval.corpus import QuerySpec, RunManifest, Topic
from serpeval.probe import EnginePerformance
from serpeval.relevance import TopicNote
from serpeval.report import (
    FinalEvaluation,
    LevelScores,
    couple_levels,
    csv_values,
    emit,
    format_cell,
    level_scores,
    render_csv,
    render_text,
    table_coupled,
    table_performance,
    table_query,
    table_user,
)


def perf(engine, dead=0.02, parasites=0.05, redundant=0.04, elapsed=0.17):
    return EnginePerformance(
        engine_id=engine, analyzed_count=600, dead_rate=dead, parasite_rate=parasites,
        redundancy_rate=redundant, suspect_count=0, avg_response_time=elapsed,
    )


class TestPerformanceTable:
    def test_column_set_matches_expected_headers(self):
        table = table_performance([perf("google")])
        assert table.columns == [
            "Dead Links", "Parasites Pages", "Redundant Results",
            "Average Response Time",
        ]
        assert table.rows == ["google"]

    def test_percent_and_seconds_rendering(self):
        table = table_performance([perf("google", dead=0.0203)])
        assert format_cell(table, "google", "Dead Links") == "2.03%"
        assert format_cell(table, "google", "Average Response Time") == "0.17 Sec"

    def test_comma_locale_rendering_only(self):
        table = table_performance([perf("google", dead=0.0203)])
        assert format_cell(table, "google", "Dead Links", locale="comma") == "2,03%"
        assert table.cell("google", "Dead Links") == 0.0203

    def test_all_clean_rows(self):
        table = table_performance([perf("g", dead=0, parasites=0, redundant=0)])
        for column in ("Dead Links", "Parasites Pages", "Redundant Results"):
            assert format_cell(table, "g", column) == "0.00%"


class TestUserTable:
    @staticmethod
    def votes_fixture():
        # One query, votes 5,4,3,2,1 at ranks 1..5, one user.
        return {
            ("google", "q01", rank): {"u1": 6 - rank} for rank in range(1, 6)
        }

    def test_row_labels_exact(self):
        table = table_user(self.votes_fixture(), ["google"])
        assert table.rows == ["R@01", "R@05", "R@10", "R@15", "R@20"]

    def test_hand_computed_cells(self):
        table = table_user(self.votes_fixture(), ["google"])
        assert table.cell("R@01", "google") == 5.00
        assert table.cell("R@05", "google") == 3.00
        # No votes beyond rank 5: deeper levels reuse the same 5 results.
        assert table.cell("R@20", "google") == 3.00

    def test_votes_averaged_per_result_first(self):
        votes = {("g", "q01", 1): {"u1": 5, "u2": 2}}
        table = table_user(votes, ["g"])
        assert table.cell("R@01", "g") == 3.5

    def test_partial_coverage_flagged_with_manifest(self):
        manifest = RunManifest(
            run_id="r", engines=["google"],
            topics=[Topic(id="t1", label="Sports")],
            queries=[QuerySpec(id="q01", topic_id="t1", text="world cup")],
            results_per_query=20,
        )
        table = table_user(self.votes_fixture(), ["google"], manifest=manifest)
        assert any("R@20/google" in flag for flag in table.flags)

    def test_engine_without_votes_has_empty_cells(self):
        table = table_user(self.votes_fixture(), ["google", "bing"])
        assert table.cell("R@01", "bing") is None
        assert format_cell(table, "R@01", "bing") == ""


class TestQueryTable:
    def test_topic_rows_in_protocol_order(self):
        topics = [("t1", "News"), ("t2", "Animals"), ("t3", "Movies"),
                  ("t4", "Health"), ("t5", "Sports"), ("t6", "Travel")]
        notes = [
            TopicNote(engine_id="google", topic_id=tid, note=5.0)
            for tid, _ in topics
        ]
        table = table_query(notes, topics, ["google"])
        assert table.rows == ["News", "Animals", "Movies", "Health", "Sports", "Travel"]

    def test_cells_and_flags(self):
        notes = [
            TopicNote(engine_id="g", topic_id="t1", note=6.91),
            TopicNote(engine_id="g", topic_id="t2", note=5.0,
                      degenerate_queries=["q03"]),
        ]
        table = table_query(notes, [("t1", "News"), ("t2", "Animals")], ["g"])
        assert table.cell("News", "g") == 6.91
        assert any("q03" in flag for flag in table.flags)


class TestCoupleLevels:
    def test_perfect_scores(self):
        scores = LevelScores("g", 1.0, 1.0, 1.0)
        assert couple_levels(scores).coupled_score == pytest.approx(1.0)

    def test_equal_weight_mean(self):
        scores = LevelScores("g", 0.9, 0.6, 0.3)
        assert couple_levels(scores).coupled_score == pytest.approx(0.6)

    def test_projection_weights(self):
        scores = LevelScores("g", 0.9, 0.6, 0.3)
        assert couple_levels(scores, (1, 0, 0)).coupled_score == 0.9
        assert couple_levels(scores, (0, 1, 0)).coupled_score == 0.6
        assert couple_levels(scores, (0, 0, 1)).coupled_score == 0.3

    def test_unnormalized_weights_warn_and_normalize(self):
        scores = LevelScores("g", 0.9, 0.6, 0.3)
        with pytest.warns(UserWarning, match="normalizing"):
            result = couple_levels(scores, (2, 2, 2))
        assert result.coupled_score == pytest.approx(0.6)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            couple_levels(LevelScores("g", 1, 1, 1), (1, -1, 1))

    def test_missing_level_redistributes(self):
        scores = LevelScores("g", 0.8, None, 0.4)
        result = couple_levels(scores)
        assert result.coupled_score == pytest.approx(0.6)
        assert any("redistributed" in flag for flag in result.flags)

    def test_linear_in_weights(self):
        scores = LevelScores("g", 0.9, 0.6, 0.3)
        for weights in [(0.5, 0.25, 0.25), (0.2, 0.3, 0.5)]:
            expected = sum(w * v for w, v in zip(weights, scores.as_tuple()))
            assert couple_levels(scores, weights).coupled_score == pytest.approx(expected)

    def test_monotone_in_each_level(self):
        base = couple_levels(LevelScores("g", 0.5, 0.5, 0.5)).coupled_score
        for bumped in [
            LevelScores("g", 0.6, 0.5, 0.5),
            LevelScores("g", 0.5, 0.6, 0.5),
            LevelScores("g", 0.5, 0.5, 0.6),
        ]:
            assert couple_levels(bumped).coupled_score > base


class TestLevelScores:
    def test_system_score_from_rates(self):
        scores = level_scores(perf("g", dead=0.1, parasites=0.2, redundant=0.3), [], None)
        assert scores.system_score == pytest.approx(1 - 0.2)

    def test_query_score_from_topic_notes(self):
        notes = [TopicNote("g", "t1", 6.0), TopicNote("g", "t2", 8.0)]
        scores = level_scores(perf("g"), notes, None)
        assert scores.query_score == pytest.approx(0.7)

    def test_user_score_from_r20(self):
        scores = level_scores(perf("g"), [], 1.91)
        assert scores.user_score == pytest.approx(1.91 / 5)

    def test_missing_levels_flagged(self):
        scores = level_scores(perf("g"), [], None)
        assert "query level missing" in scores.flags
        assert "user level missing" in scores.flags


class TestEmission:
    def fixture_tables(self):
        return {
            "performance": table_performance([perf("google"), perf("bing", dead=0.0167)]),
            "user_relevance": table_user(TestUserTable.votes_fixture(), ["google", "bing"]),
        }

    def test_csv_round_trip(self, tmp_path):
        tables = self.fixture_tables()
        emit(tables, ["csv"], tmp_path)
        text = (tmp_path / "performance.csv").read_text()
        values = csv_values(text)
        assert values[("google", "Dead Links")] == 2.00
        assert values[("bing", "Dead Links")] == 1.67
        assert values[("google", "Average Response Time")] == 0.17

    def test_text_table_stable_column_order(self, tmp_path):
        tables = self.fixture_tables()
        first = render_text(tables["performance"])
        second = render_text(tables["performance"])
        assert first == second
        assert first.splitlines()[2].startswith("Search engines")

    def test_png_emitted(self, tmp_path):
        emit(self.fixture_tables(), ["png"], tmp_path)
        assert (tmp_path / "performance.png").stat().st_size > 0
        assert (tmp_path / "user_relevance.png").stat().st_size > 0

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit(self.fixture_tables(), ["xml"], tmp_path)

    def test_comma_locale(self, tmp_path):
        emit(self.fixture_tables(), ["csv"], tmp_path, locale="comma")
        text = (tmp_path / "performance.csv").read_text()
        assert "2,00" in text

    def test_coupled_table(self):
        scores = LevelScores("g", 0.9, 0.6, 0.3)
        evaluation = couple_levels(scores)
        table = table_coupled([evaluation], {"g": scores})
        assert table.cell("g", "Coupled") == pytest.approx(0.6)
        assert table.columns == ["System", "Query", "User", "Coupled"]
