import numpy as np
import pytest
from fastapi.testclient import TestClient

from rtdtr.recsvc import create_app


@pytest.fixture()
def client():
    return TestClient(create_app())


def make_session(client, **overrides):
    body = {
        "baseline": {"bmi": 37.0, "dilation": 3.0},
        "dose_range": [0.0, 8.0],
        "delta": 4.0,
        "eta": [-1.822, 1.189, 0.333, 1.181],
        "seed": 11,
    }
    body.update(overrides)
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


class TestCreate:
    def test_healthz(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_create_echoes_policy_and_initial_state(self, client):
        created = make_session(client)
        snap = created["snapshot"]
        assert snap["eta"] == [-1.822, 1.189, 0.333, 1.181]
        assert snap["dose"] == 0.0
        assert snap["stratum"] == 0
        assert snap["clock"] == 0.0
        assert snap["history"][0]["kind"] == "created"

    def test_median_default_threshold(self, client):
        created = make_session(client, delta=None)
        assert created["snapshot"]["delta"] == 4.0

    def test_invalid_range_rejected(self, client):
        resp = client.post(
            "/sessions",
            json={"baseline": {"bmi": 30}, "dose_range": [5.0, 1.0]},
        )
        assert resp.status_code == 400
        assert resp.json()["code"] == "invalid_range"

    def test_threshold_outside_range_rejected(self, client):
        resp = client.post(
            "/sessions",
            json={"baseline": {"bmi": 30}, "dose_range": [0.0, 8.0], "delta": 9.0},
        )
        assert resp.status_code == 400

    def test_missing_bmi_rejected(self, client):
        resp = client.post("/sessions", json={"baseline": {}, "dose_range": [0.0, 8.0]})
        assert resp.status_code == 422
        assert resp.json()["code"] == "missing_covariates"


class TestAdvance:
    def test_advance_returns_intensity_path(self, client):
        sid = make_session(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/advance", json={"dt_steps": 50})
        assert resp.status_code == 200
        delta = resp.json()
        assert len(delta["intensity"]) == 50
        assert all(lam > 0 for lam in delta["intensity"])
        assert delta["recommended_stratum"] in (0, 1)
        assert 0.0 < delta["survival_probability"] <= 1.0
        assert delta["clock"] == pytest.approx(0.5)

    def test_higher_bmi_higher_intensity(self, client):
        low = make_session(client, baseline={"bmi": 25.0, "dilation": 3.0})["session_id"]
        high = make_session(client, baseline={"bmi": 42.0, "dilation": 3.0})["session_id"]
        a = client.post(f"/sessions/{low}/advance", json={"dt_steps": 30}).json()
        b = client.post(f"/sessions/{high}/advance", json={"dt_steps": 30}).json()
        assert all(hb >= la for la, hb in zip(a["intensity"], b["intensity"]))

    def test_replayed_session_identical(self, client):
        a = make_session(client, seed=99)["session_id"]
        b = make_session(client, seed=99)["session_id"]
        ra = client.post(f"/sessions/{a}/advance", json={"dt_steps": 40}).json()
        rb = client.post(f"/sessions/{b}/advance", json={"dt_steps": 40}).json()
        assert ra == rb

    def test_floor_clamped_policy_never_recommends_change(self, client):
        sid = make_session(client, eta=[-1e6, 0.0, 0.0, 0.0], seed=1)["session_id"]
        for _ in range(5):
            delta = client.post(f"/sessions/{sid}/advance", json={"dt_steps": 50}).json()
            assert delta["n_events"] == 0
            assert delta["recommended_stratum"] == 0

    def test_unknown_session_404(self, client):
        resp = client.post("/sessions/nope/advance", json={"dt_steps": 10})
        assert resp.status_code == 404

    def test_completed_session_409(self, client):
        sid = make_session(client)["session_id"]
        # run to the end of the window
        while True:
            resp = client.post(f"/sessions/{sid}/advance", json={"dt_steps": 600})
            if resp.json().get("completed"):
                break
        resp = client.post(f"/sessions/{sid}/advance", json={"dt_steps": 10})
        assert resp.status_code == 409


class TestDose:
    def test_conforming_dose_accepted(self, client):
        sid = make_session(client)["session_id"]
        delta = client.post(f"/sessions/{sid}/advance", json={"dt_steps": 10}).json()
        rec = delta["recommended_stratum"]
        dose = 6.0 if rec == 1 else 2.0
        resp = client.post(f"/sessions/{sid}/dose", json={"dose": dose})
        assert resp.status_code == 200
        snap = resp.json()
        assert snap["dose"] == dose
        assert snap["stratum"] == rec

    def test_nonconforming_requires_override(self, client):
        sid = make_session(client)["session_id"]
        delta = client.post(f"/sessions/{sid}/advance", json={"dt_steps": 10}).json()
        rec = delta["recommended_stratum"]
        bad_dose = 2.0 if rec == 1 else 6.0
        resp = client.post(f"/sessions/{sid}/dose", json={"dose": bad_dose})
        assert resp.status_code == 409
        body = resp.json()
        assert body["code"] == "stratum_mismatch"
        assert body["detail"]["recommended_stratum"] == rec

        resp = client.post(f"/sessions/{sid}/dose", json={"dose": bad_dose, "override": True})
        assert resp.status_code == 200
        hist = resp.json()["history"]
        assert hist[-1]["override"] is True

    def test_out_of_range_dose(self, client):
        sid = make_session(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/dose", json={"dose": 11.0})
        assert resp.status_code == 400

    def test_stratum_change_updates_last_change(self, client):
        sid = make_session(client)["session_id"]
        client.post(f"/sessions/{sid}/advance", json={"dt_steps": 20})
        snap = client.get(f"/sessions/{sid}").json()
        rec = snap["recommended_stratum"]
        dose = 6.0 if rec == 1 else 2.0
        resp = client.post(f"/sessions/{sid}/dose", json={"dose": dose, "override": False})
        if resp.status_code != 200:
            resp = client.post(f"/sessions/{sid}/dose", json={"dose": dose, "override": True})
        snap2 = resp.json()
        if snap2["stratum"] != snap["stratum"]:
            assert snap2["last_change"] == pytest.approx(snap2["clock"])


class TestState:
    def test_snapshot_round_trip_and_clock(self, client):
        sid = make_session(client)["session_id"]
        for _ in range(3):
            client.post(f"/sessions/{sid}/advance", json={"dt_steps": 10})
        snap = client.get(f"/sessions/{sid}").json()
        assert snap["clock"] == pytest.approx(0.3)
        kinds = [h["kind"] for h in snap["history"]]
        assert kinds == ["created", "advance", "advance", "advance"]
        import json as json_mod

        assert json_mod.loads(json_mod.dumps(snap)) == snap

    def test_stratum_threshold_coherence_on_every_entry(self, client):
        sid = make_session(client, delta=4.0)["session_id"]
        client.post(f"/sessions/{sid}/advance", json={"dt_steps": 10})
        client.post(f"/sessions/{sid}/dose", json={"dose": 5.0, "override": True})
        client.post(f"/sessions/{sid}/advance", json={"dt_steps": 10})
        snap = client.get(f"/sessions/{sid}").json()
        for entry in snap["history"]:
            assert (entry["dose"] >= 4.0) == bool(entry["stratum"])
