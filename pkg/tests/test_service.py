import time

import pytest
from fastapi.testclient import TestClient

from conftest import script_path
from threatagent.agent import AgentConfig, AgentRunner
from threatagent.model import parse_canonical
from threatagent.provider import FakeClock, ScriptedProvider
from threatagent.service import AUTH_TOKEN_ENV, create_app

DESCRIPTION = {
    "title": "Drone delivery platform",
    "narrative": "Packages are assigned to drones and telemetry is "
                 "monitored by a ground-control station over an API.",
    "tags": ["transport", "drone"],
}


def make_factory(kb, corpus, script, config=None):
    def factory():
        clock = FakeClock()
        provider = ScriptedProvider.from_script_file(script_path(script),
                                                     clock=clock)
        return AgentRunner(kb, corpus, provider, config or AgentConfig(),
                           clock=clock)
    return factory


@pytest.fixture
def client(kb, corpus):
    app = create_app(make_factory(kb, corpus, "happy_path.json"),
                     long_poll_s=0.2)
    with TestClient(app) as c:
        yield c


@pytest.fixture
def clarify_client(kb, corpus):
    app = create_app(make_factory(kb, corpus, "one_clarify_round.json"),
                     long_poll_s=0.2)
    with TestClient(app) as c:
        yield c


def wait_for_state(client, session_id, targets, timeout_s=5.0):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        doc = client.get(f"/sessions/{session_id}").json()
        if doc["state"] in targets:
            return doc
        time.sleep(0.02)
    raise AssertionError(f"session never reached {targets}: {doc}")


class TestLifecycle:
    def test_healthz(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.text == "ok"

    def test_create_session_returns_resource(self, client):
        response = client.post("/sessions", json=DESCRIPTION)
        assert response.status_code == 201
        doc = response.json()
        assert doc["session_id"]
        assert doc["links"]["events"].endswith("/events")

    def test_runs_to_delivered_and_serves_model(self, client):
        sid = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        wait_for_state(client, sid, {"delivered"})
        response = client.get(f"/sessions/{sid}/model")
        assert response.status_code == 200
        model = parse_canonical(response.text)
        assert model.revision == 0
        assert response.text.endswith("\n")

    def test_model_before_delivery_conflicts(self, clarify_client):
        sid = clarify_client.post("/sessions",
                                  json=DESCRIPTION).json()["session_id"]
        wait_for_state(clarify_client, sid, {"awaiting_clarification"})
        response = clarify_client.get(f"/sessions/{sid}/model")
        assert response.status_code == 409
        assert response.json()["error"] == "not_delivered"

    def test_sessions_are_isolated(self, client):
        a = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        b = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        assert a != b
        wait_for_state(client, a, {"delivered"})
        wait_for_state(client, b, {"delivered"})
        assert client.get(f"/sessions/{a}/model").text == \
            client.get(f"/sessions/{b}/model").text


class TestValidationErrors:
    @pytest.mark.parametrize("body,needle", [
        ({"narrative": "x"}, "title"),
        ({"title": "x"}, "narrative"),
        ({"title": " ", "narrative": "x"}, "title"),
    ])
    def test_missing_fields_named_in_400(self, client, body, needle):
        response = client.post("/sessions", json=body)
        assert response.status_code == 400
        doc = response.json()
        assert doc["error"] == "bad_request"
        assert needle in doc["detail"]

    def test_non_json_body_rejected(self, client):
        response = client.post("/sessions", content=b"not json",
                               headers={"content-type": "application/json"})
        assert response.status_code == 400

    def test_unknown_session_404(self, client):
        for path in ("/sessions/nope", "/sessions/nope/events",
                     "/sessions/nope/model"):
            response = client.get(path)
            assert response.status_code == 404
            assert response.json()["error"] == "not_found"

    def test_provider_unavailable_503(self, kb, corpus):
        def broken_factory():
            raise RuntimeError("script missing")
        app = create_app(broken_factory, long_poll_s=0.2)
        with TestClient(app) as client:
            response = client.post("/sessions", json=DESCRIPTION)
            assert response.status_code == 503
            assert response.json()["error"] == "provider_unavailable"


class TestClarification:
    def test_full_clarification_flow(self, clarify_client):
        client = clarify_client
        sid = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        doc = wait_for_state(client, sid, {"awaiting_clarification"})
        questions = doc["pending_questions"]
        assert questions and all(q["text"].endswith("?") for q in questions)
        response = client.post(f"/sessions/{sid}/answers", json=[
            {"question_id": q["question_id"], "answer": "Use signed feeds."}
            for q in questions
        ])
        assert response.status_code == 202
        assert response.json()["accepted"] == len(questions)
        wait_for_state(client, sid, {"delivered"})
        model = parse_canonical(client.get(f"/sessions/{sid}/model").text)
        assert model.revision == 1

    def test_answers_in_wrong_state_409(self, client):
        sid = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        wait_for_state(client, sid, {"delivered"})
        response = client.post(f"/sessions/{sid}/answers", json=[
            {"question_id": "Q1", "answer": "x"}])
        assert response.status_code == 409
        assert response.json()["error"] == "wrong_state"

    def test_unknown_question_id_422(self, clarify_client):
        client = clarify_client
        sid = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        wait_for_state(client, sid, {"awaiting_clarification"})
        response = client.post(f"/sessions/{sid}/answers", json=[
            {"question_id": "Q999", "answer": "x"}])
        assert response.status_code == 422
        assert response.json()["error"] == "unknown_question_id"
        assert client.get(f"/sessions/{sid}").json()["state"] == \
            "awaiting_clarification"

    def test_malformed_answers_body_400(self, clarify_client):
        client = clarify_client
        sid = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        wait_for_state(client, sid, {"awaiting_clarification"})
        assert client.post(f"/sessions/{sid}/answers",
                           json={"Q1": "x"}).status_code == 400
        assert client.post(f"/sessions/{sid}/answers",
                           json=[{"answer": "x"}]).status_code == 400


class TestEvents:
    def test_incremental_reads_never_duplicate(self, client):
        sid = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        wait_for_state(client, sid, {"delivered"})
        seen = []
        after = 0
        while True:
            events = client.get(f"/sessions/{sid}/events",
                                params={"after": after}).json()["events"]
            if not events:
                break
            seen.extend(events)
            after = events[-1]["seq"]
        seqs = [e["seq"] for e in seen]
        assert seqs == sorted(set(seqs))
        assert any(e["kind"] == "delivered" for e in seen)

    def test_long_poll_returns_empty_after_timeout_at_terminal(self, client):
        sid = client.post("/sessions", json=DESCRIPTION).json()["session_id"]
        wait_for_state(client, sid, {"delivered"})
        last = client.get(f"/sessions/{sid}/events").json()["events"][-1]
        start = time.monotonic()
        events = client.get(f"/sessions/{sid}/events",
                            params={"after": last["seq"]}).json()["events"]
        assert events == []
        assert time.monotonic() - start >= 0.15  # waited for the poll window


class TestAuth:
    def test_bearer_token_enforced_when_configured(self, kb, corpus,
                                                   monkeypatch):
        monkeypatch.setenv(AUTH_TOKEN_ENV, "sekrit")
        app = create_app(make_factory(kb, corpus, "happy_path.json"),
                         long_poll_s=0.2)
        with TestClient(app) as client:
            assert client.get("/healthz").status_code == 200
            denied = client.post("/sessions", json=DESCRIPTION)
            assert denied.status_code == 401
            allowed = client.post(
                "/sessions", json=DESCRIPTION,
                headers={"Authorization": "Bearer sekrit"})
            assert allowed.status_code == 201

    def test_no_token_configured_means_open(self, client, monkeypatch):
        monkeypatch.delenv(AUTH_TOKEN_ENV, raising=False)
        assert client.post("/sessions", json=DESCRIPTION).status_code == 201


class TestSnapshots:
    def test_sessions_survive_restart_read_only(self, kb, corpus, tmp_path):
        snap = str(tmp_path / "snaps")
        factory = make_factory(kb, corpus, "happy_path.json")
        app = create_app(factory, snapshot_dir=snap, long_poll_s=0.2)
        with TestClient(app) as client:
            sid = client.post("/sessions",
                              json=DESCRIPTION).json()["session_id"]
            wait_for_state(client, sid, {"delivered"})
            model_text = client.get(f"/sessions/{sid}/model").text
        # exiting the context manager fires the shutdown snapshot
        app2 = create_app(factory, snapshot_dir=snap, long_poll_s=0.2)
        with TestClient(app2) as client:
            doc = client.get(f"/sessions/{sid}").json()
            assert doc["state"] == "delivered"
            assert client.get(f"/sessions/{sid}/model").text == model_text
            events = client.get(f"/sessions/{sid}/events").json()["events"]
            assert any(e["kind"] == "delivered" for e in events)
