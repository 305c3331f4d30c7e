import json
import time

import pytest
from fastapi.testclient import TestClient

from serpeval.demo import build_demo_run
from serpeval.pipeline import build_run_report, stage_score
from serpeval.service import create_app

RUN = "demo"
K = 5  # results per group in the fixture run


def register_payload(email="judge@example.org"):
    return {
        "connection": {"email": email, "password": "long-enough-secret"},
        "personal": {"name": "Judge", "country": "DZ", "language": "fr"},
        "interests": {"domains": "sports", "specialty": "football"},
        "competence": {"profession": "student", "study_level": "license 2"},
    }


@pytest.fixture
def data_root(tmp_path):
    build_demo_run(
        tmp_path, run_id=RUN, engines=2, topics=1,
        queries_per_topic=2, results_per_query=K,
    )
    return tmp_path


@pytest.fixture
def client(data_root):
    return TestClient(create_app(data_root))


def login(client, email="judge@example.org"):
    response = client.post("/api/v1/register", json=register_payload(email))
    assert response.status_code == 201, response.text
    response = client.post(
        "/api/v1/login", json={"email": email, "password": "long-enough-secret"}
    )
    assert response.status_code == 200
    token = response.json()["token"]
    return {"Authorization": f"Bearer {token}"}


class TestRegister:
    def test_full_payload_created(self, client):
        response = client.post("/api/v1/register", json=register_payload())
        assert response.status_code == 201
        assert response.json()["user_id"]

    def test_missing_category_names_it(self, client):
        payload = register_payload()
        del payload["connection"]
        response = client.post("/api/v1/register", json=payload)
        assert response.status_code == 422
        body = response.json()
        assert body["code"] == "validation"
        assert "connection" in body["field"]

    def test_duplicate_email_conflict(self, client):
        client.post("/api/v1/register", json=register_payload())
        response = client.post("/api/v1/register", json=register_payload())
        assert response.status_code == 409
        assert response.json()["code"] == "duplicate-email"

    def test_weak_password(self, client):
        payload = register_payload()
        payload["connection"]["password"] = "short"
        response = client.post("/api/v1/register", json=payload)
        assert response.status_code == 422
        assert response.json()["code"] == "weak-password"


class TestLogin:
    def test_valid_credentials_token(self, client):
        headers = login(client)
        assert headers["Authorization"].startswith("Bearer ")

    def test_wrong_password_401(self, client):
        client.post("/api/v1/register", json=register_payload())
        response = client.post(
            "/api/v1/login",
            json={"email": "judge@example.org", "password": "wrong-password"},
        )
        assert response.status_code == 401

    def test_unknown_email_indistinguishable(self, client):
        client.post("/api/v1/register", json=register_payload())
        wrong_password = client.post(
            "/api/v1/login",
            json={"email": "judge@example.org", "password": "wrong-password"},
        )
        unknown_email = client.post(
            "/api/v1/login",
            json={"email": "nobody@example.org", "password": "wrong-password"},
        )
        assert wrong_password.status_code == unknown_email.status_code == 401
        assert wrong_password.json() == unknown_email.json()

    def test_expired_token(self, data_root):
        client = TestClient(create_app(data_root, token_ttl_s=0.05))
        headers = login(client)
        time.sleep(0.1)
        response = client.get(f"/api/v1/runs/{RUN}/next", headers=headers)
        assert response.status_code == 401

    def test_missing_token(self, client):
        response = client.get(f"/api/v1/runs/{RUN}/next")
        assert response.status_code == 401


class TestNextResults:
    def test_fresh_session_gets_first_group(self, client):
        headers = login(client)
        response = client.get(f"/api/v1/runs/{RUN}/next", headers=headers)
        assert response.status_code == 200
        body = response.json()
        assert not body["complete"]
        assert body["group_token"]
        assert len(body["results"]) == K
        assert body["progress"] == {"judged": 0, "total": K, "fraction": 0.0}
        assert body["query_text"]
        assert all(r["excerpt"] for r in body["results"])

    def test_unknown_run_404(self, client):
        headers = login(client)
        response = client.get("/api/v1/runs/absent/next", headers=headers)
        assert response.status_code == 404
        assert response.json()["code"] == "unknown-run"

    def test_engine_identity_hidden_when_blind(self, client):
        headers = login(client)
        response = client.get(f"/api/v1/runs/{RUN}/next", headers=headers)
        raw = response.text
        assert "engine-a" not in raw
        assert "engine-b" not in raw

    def test_engine_identity_visible_when_blind_off(self, data_root):
        client = TestClient(create_app(data_root, blind=False))
        headers = login(client)
        body = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        assert body["engine_id"] in ("engine-a", "engine-b")

    def test_same_group_until_finished(self, client):
        headers = login(client)
        first = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        again = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        assert first["group_token"] == again["group_token"]

    def test_reload_reflects_existing_votes(self, client):
        headers = login(client)
        group = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        assert all(r["my_vote"] is None for r in group["results"])
        client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": group["group_token"], "rank": 2, "vote": 4},
        )
        reloaded = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        votes = {r["rank"]: r["my_vote"] for r in reloaded["results"]}
        assert votes[2] == 4
        assert votes[1] is None


class TestVotes:
    def test_vote_progresses(self, client):
        headers = login(client)
        group = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        response = client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": group["group_token"], "rank": 1, "vote": 3},
        )
        assert response.status_code == 200
        assert response.json()["progress"] == {
            "judged": 1, "total": K, "fraction": 1 / K
        }

    def test_out_of_range_vote_422(self, client):
        headers = login(client)
        group = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        response = client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": group["group_token"], "rank": 1, "vote": 9},
        )
        assert response.status_code == 422
        assert response.json()["code"] == "validation"
        assert "vote" in response.json()["field"]

    def test_revote_leaves_progress_unchanged(self, client):
        headers = login(client)
        group = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        token = group["group_token"]
        client.post(f"/api/v1/runs/{RUN}/votes", headers=headers,
                    json={"group_token": token, "rank": 2, "vote": 4})
        response = client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": token, "rank": 2, "vote": 1},
        )
        assert response.status_code == 200
        assert response.json()["progress"]["judged"] == 1

    def test_vote_outside_current_group_409(self, client):
        headers = login(client)
        client.get(f"/api/v1/runs/{RUN}/next", headers=headers)
        response = client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": "g399", "rank": 1, "vote": 2},
        )
        assert response.status_code == 409
        assert response.json()["code"] == "outside-group"

    def test_vote_before_next_409(self, client):
        headers = login(client)
        response = client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": "g000", "rank": 1, "vote": 2},
        )
        assert response.status_code == 409
        assert response.json()["code"] == "no-open-group"

    def test_rank_outside_group_409(self, client):
        headers = login(client)
        group = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        response = client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": group["group_token"], "rank": K + 7, "vote": 2},
        )
        assert response.status_code == 409

    def test_allow_skip_accepts_other_groups(self, data_root):
        client = TestClient(create_app(data_root, allow_skip=True))
        headers = login(client)
        client.get(f"/api/v1/runs/{RUN}/next", headers=headers)
        response = client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": "g002", "rank": 1, "vote": 2},
        )
        assert response.status_code == 200


def judge_everything(client, headers, votes_fn=lambda rank: rank % 6):
    """Walk the whole run, voting on every result; returns groups seen."""
    seen = []
    for _ in range(100):
        group = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        if group["complete"]:
            return seen
        seen.append(group["group_token"])
        for result in group["results"]:
            response = client.post(
                f"/api/v1/runs/{RUN}/votes", headers=headers,
                json={
                    "group_token": group["group_token"],
                    "rank": result["rank"],
                    "vote": votes_fn(result["rank"]),
                },
            )
            assert response.status_code == 200
    raise AssertionError("run never completed")


class TestFullJudgingFlow:
    def test_advances_through_all_groups_then_completes(self, client):
        headers = login(client)
        seen = judge_everything(client, headers)
        # 2 queries x 2 engines = 4 groups, each visited exactly once.
        assert len(seen) == 4
        assert len(set(seen)) == 4
        final = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        assert final["complete"]
        assert final["overall"] == {"groups_done": 4, "groups_total": 4}

    def test_concurrent_users_keep_their_votes(self, client):
        alice = login(client, "alice@example.org")
        bob = login(client, "bob@example.org")
        judge_everything(client, alice, votes_fn=lambda rank: 5)
        judge_everything(client, bob, votes_fn=lambda rank: 1)
        reports = client.get(f"/api/v1/runs/{RUN}/reports", headers=alice).json()
        cells = reports["user_relevance"]["cells"]
        # Every result has one 5 and one 1: means are all 3.
        for engine_values in cells.values():
            for value in engine_values.values():
                assert value == 3.0


class TestReports:
    def test_no_votes_user_table_absent_with_flag(self, client):
        headers = login(client)
        body = client.get(f"/api/v1/runs/{RUN}/reports", headers=headers).json()
        assert body["user_relevance"] is None
        assert any("user_relevance" in flag for flag in body["flags"])

    def test_mid_judging_partial_flagged(self, client):
        headers = login(client)
        group = client.get(f"/api/v1/runs/{RUN}/next", headers=headers).json()
        client.post(
            f"/api/v1/runs/{RUN}/votes", headers=headers,
            json={"group_token": group["group_token"], "rank": 1, "vote": 4},
        )
        body = client.get(f"/api/v1/runs/{RUN}/reports", headers=headers).json()
        table = body["user_relevance"]
        assert table is not None
        assert any("votes cover" in flag for flag in body["flags"])

    def test_reports_match_report_module_output(self, client, data_root):
        stage_score(data_root, RUN)
        headers = login(client)
        body = client.get(f"/api/v1/runs/{RUN}/reports", headers=headers).json()
        direct = build_run_report(data_root, RUN, require_all=False)
        table = direct.tables["query_relevance"]
        assert body["query_relevance"]["rows"] == table.rows
        for row in table.rows:
            for column in table.columns:
                assert body["query_relevance"]["cells"][row][column] == pytest.approx(
                    table.cell(row, column)
                )

    def test_unknown_run_404(self, client):
        headers = login(client)
        response = client.get("/api/v1/runs/absent/reports", headers=headers)
        assert response.status_code == 404


def test_blind_invariant_full_session(client):
    """No engine identifier appears in any judging payload of a session."""
    headers = login(client)
    for _ in range(10):
        response = client.get(f"/api/v1/runs/{RUN}/next", headers=headers)
        body = response.json()
        assert "engine-a" not in json.dumps(body)
        assert "engine-b" not in json.dumps(body)
        if body["complete"]:
            break
        for result in body["results"]:
            client.post(
                f"/api/v1/runs/{RUN}/votes", headers=headers,
                json={"group_token": body["group_token"],
                      "rank": result["rank"], "vote": 2},
            )
