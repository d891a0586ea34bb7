import json

import pytest
from fastapi.testclient import TestClient

from btplanner.providers import ReplayChatProvider, Transcript
from btplanner.scenarios import scenario_dir
from btplanner.service import create_app

from conftest import SMOOTHIE_XML


@pytest.fixture
def smoothie_client(tmp_path):
    chat = ReplayChatProvider(Transcript(scenario_dir("smoothie") / "transcript.jsonl"))
    app = create_app(data_dir=tmp_path / "data", chat=chat, clock=lambda: 1000.0)
    return TestClient(app)


def smoothie_manifest():
    return json.loads((scenario_dir("smoothie") / "manifest.json").read_text())


class TestSessionLifecycle:
    def test_create(self, smoothie_client):
        resp = smoothie_client.post("/sessions", json={"instruction": "Make a cocktail."})
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "AwaitingModel"
        assert body["turn_count"] == 0

    def test_empty_instruction_rejected(self, smoothie_client):
        resp = smoothie_client.post("/sessions", json={"instruction": "   "})
        assert resp.status_code == 422

    def test_duplicate_creates_distinct_ids(self, smoothie_client):
        a = smoothie_client.post("/sessions", json={"instruction": "Make a smoothie."})
        b = smoothie_client.post("/sessions", json={"instruction": "Make a smoothie."})
        assert a.json()["session_id"] != b.json()["session_id"]

    def test_idempotency_key_reuses_response(self, smoothie_client):
        headers = {"Idempotency-Key": "abc"}
        a = smoothie_client.post(
            "/sessions", json={"instruction": "Make a smoothie."}, headers=headers
        )
        b = smoothie_client.post(
            "/sessions", json={"instruction": "Make a smoothie."}, headers=headers
        )
        assert a.json()["session_id"] == b.json()["session_id"]

    def test_unknown_session_404(self, smoothie_client):
        assert smoothie_client.get("/sessions/nope").status_code == 404


class TestSmoothieFlow:
    def _create(self, client):
        resp = client.post("/sessions", json={"instruction": "Make a smoothie."})
        return resp.json()["session_id"]

    def test_advance_yields_three_pending(self, smoothie_client):
        sid = self._create(smoothie_client)
        resp = smoothie_client.post(f"/sessions/{sid}/advance")
        assert resp.status_code == 200
        assert resp.json()["status"] == "AwaitingHuman"
        assert resp.json()["pending_questions"] == 3

        questions = smoothie_client.get(f"/sessions/{sid}/questions").json()
        assert len(questions) == 3
        # each card carries the agents' analyses
        for q in questions:
            assert "robot_expert" in q["agent_analyses"]

    def test_wrong_state_advance(self, smoothie_client):
        sid = self._create(smoothie_client)
        smoothie_client.post(f"/sessions/{sid}/advance")
        resp = smoothie_client.post(f"/sessions/{sid}/advance")
        assert resp.status_code == 409

    def test_full_session(self, smoothie_client):
        manifest = smoothie_manifest()
        sid = self._create(smoothie_client)
        smoothie_client.post(f"/sessions/{sid}/advance")
        pending = smoothie_client.get(f"/sessions/{sid}/questions").json()
        answers = [
            {"label": q["label"], "text": manifest["human_answers"][q["label"]]}
            for q in pending
        ]
        resp = smoothie_client.post(f"/sessions/{sid}/answers", json={"answers": answers})
        assert resp.json()["status"] == "AwaitingModel"

        resp = smoothie_client.post(f"/sessions/{sid}/advance")
        assert resp.json()["status"] == "Converged"
        assert smoothie_client.get(f"/sessions/{sid}/questions").json() == []

        final = smoothie_client.post(f"/sessions/{sid}/finalize")
        assert final.status_code == 200
        expected = (scenario_dir("smoothie") / "final.bt.xml").read_text()
        assert final.text == expected

    def test_partial_answers_rejected(self, smoothie_client):
        manifest = smoothie_manifest()
        sid = self._create(smoothie_client)
        smoothie_client.post(f"/sessions/{sid}/advance")
        pending = smoothie_client.get(f"/sessions/{sid}/questions").json()
        answers = [
            {"label": q["label"], "text": manifest["human_answers"][q["label"]]}
            for q in pending[:-1]
        ]
        resp = smoothie_client.post(f"/sessions/{sid}/answers", json={"answers": answers})
        assert resp.status_code == 422
        assert "missing" in resp.json()["detail"]

    def test_finalize_before_convergence(self, smoothie_client):
        sid = self._create(smoothie_client)
        resp = smoothie_client.post(f"/sessions/{sid}/finalize")
        assert resp.status_code == 409


class TestExecution:
    def _payload(self):
        directory = scenario_dir("smoothie")
        return {
            "tree_xml": (directory / "final.bt.xml").read_text(),
            "bindings": json.loads((directory / "bindings.json").read_text()),
            "profile": json.loads((directory / "table_v_profile.json").read_text()),
            "seed": 1,
            "runs": 1,
        }

    def test_simulate_fixture(self, smoothie_client):
        resp = smoothie_client.post("/executions", json=self._payload())
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] in ("Success", "Failure")
        assert body["statistics"]["runs"] == 1

    def test_missing_binding_rejected_before_events(self, smoothie_client):
        payload = self._payload()
        del payload["bindings"]["close lid"]
        resp = smoothie_client.post("/executions", json=payload)
        assert resp.status_code == 422
        assert "close lid" in resp.json()["detail"]

    def test_two_subscribers_identical_events(self, smoothie_client):
        resp = smoothie_client.post("/executions", json=self._payload())
        eid = resp.json()["execution_id"]
        a = smoothie_client.get(f"/executions/{eid}/events").text
        b = smoothie_client.get(f"/executions/{eid}/events").text
        assert a == b
        assert "Terminal" in a

    def test_resume_from_index(self, smoothie_client):
        resp = smoothie_client.post("/executions", json=self._payload())
        eid = resp.json()["execution_id"]
        full = smoothie_client.get(f"/executions/{eid}/events").text
        tail = smoothie_client.get(f"/executions/{eid}/events", params={"from_index": 5}).text
        assert tail in full
        assert len(tail) < len(full)


class TestEval:
    def test_ted_endpoint(self, smoothie_client):
        a = '<Root><Sequence name="A"><Action name="B"/><Action name="C"/></Sequence></Root>'
        b = '<Root><Sequence name="A"><Action name="B"/><Action name="D"/></Sequence></Root>'
        resp = smoothie_client.post("/eval/ted", json={"a_xml": a, "b_xml": b})
        body = resp.json()
        assert body["raw"] == 1.0
        assert body["normalized"] == pytest.approx(2 / 7)
        assert body["alpha"] == 1.0

    def test_sim_endpoint(self, smoothie_client):
        resp = smoothie_client.post(
            "/eval/sim", json={"source_xml": SMOOTHIE_XML, "target_xml": SMOOTHIE_XML}
        )
        assert resp.json()["mean_max"] == pytest.approx(1.0, abs=1e-9)

    def test_bad_xml_rejected(self, smoothie_client):
        resp = smoothie_client.post("/eval/ted", json={"a_xml": "<x", "b_xml": "<y"})
        assert resp.status_code == 422


class TestPersistence:
    def test_events_written_to_disk(self, tmp_path):
        chat = ReplayChatProvider(
            Transcript(scenario_dir("smoothie") / "transcript.jsonl")
        )
        app = create_app(data_dir=tmp_path / "data", chat=chat, clock=lambda: 1.0)
        client = TestClient(app)
        sid = client.post("/sessions", json={"instruction": "Make a smoothie."}).json()[
            "session_id"
        ]
        client.post(f"/sessions/{sid}/advance")
        path = tmp_path / "data" / f"{sid}.events.jsonl"
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert lines[0]["event"] == "session_started"
        assert any(l["event"] == "turn_drafted" for l in lines)

    def test_no_credentials_in_responses(self, smoothie_client, monkeypatch):
        monkeypatch.setenv("BTPLANNER_API_KEY", "sekret")
        resp = smoothie_client.post("/sessions", json={"instruction": "Make a smoothie."})
        assert "sekret" not in resp.text
