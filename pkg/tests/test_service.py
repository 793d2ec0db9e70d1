"""HTTP API: endpoint contracts, error-code mapping (400 configuration /
409 numerical / 422 validation), and agreement between service responses
and direct library calls."""

import json

import pytest
from fastapi.testclient import TestClient

from pidlab.harness import build_comparison, validate_config
from pidlab.service.app import create_app

TINY = {
    "sim_len": 60,
    "seeds": [0, 1],
    "pso": {"pop_size": 6, "max_iter": 4},
    "zn": {"open_sim_len": 60, "ultimate_sim_len": 400, "max_kp": 50.0},
    "identify": {"samples": 300},
}

STABLE = [[0.5, 0.3, 0.05], [0.5, 0.3, 0.05]]


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["name"] == "pidlab"


def test_simulate_closed_loop(client):
    r = client.post("/simulate", json={"config": TINY, "mode": "closed", "gains": STABLE})
    assert r.status_code == 200
    body = r.json()
    assert body["csv"].startswith("k,t,u1,u2,y1,y2")
    assert len(body["csv"].strip().splitlines()) == TINY["sim_len"] + 1
    assert set(body["indices"]) == {"iae", "ise", "itse"}
    assert not body["diverged"]


def test_simulate_open_loop(client):
    r = client.post("/simulate", json={"config": TINY, "mode": "open", "steps": [1.0, 0.0]})
    assert r.status_code == 200
    lines = r.json()["csv"].strip().splitlines()
    assert lines[1].split(",")[2] == "1"  # u1 column carries the step


def test_simulate_closed_requires_gains(client):
    r = client.post("/simulate", json={"config": TINY, "mode": "closed"})
    assert r.status_code == 400
    assert r.json()["error"] == "ConfigurationError"


def test_simulate_numerical_failure_maps_to_409(client):
    cfg = dict(TINY)
    cfg["plant"] = {"a": [0.7, 1.0, 1.0, 0.3, 2e6, 0.2]}
    cfg["saturation"] = {"lo": -1e9, "hi": 1e9}
    r = client.post("/simulate", json={"config": cfg, "mode": "open"})
    assert r.status_code == 409
    assert r.json()["error"] == "PlantDivergenceError"


def test_unknown_config_key_is_422(client):
    r = client.post("/simulate", json={"config": {"simlen": 12}, "mode": "open"})
    assert r.status_code == 422


def test_tune_zn_record_shape(client):
    r = client.post("/tune/zn", json={"config": TINY})
    assert r.status_code == 200
    methods = r.json()["methods"]
    assert set(methods) == {"zn-open", "zn-closed"}
    for entry in methods.values():
        assert entry["status"] == "ok"
        for rec in entry["tuning"]:
            assert set(rec) == {"method", "loop", "kp", "Ti", "Td", "fit"}


def test_tune_pso_matches_library(client):
    r = client.post("/tune/pso", json={"config": TINY, "index": "ise", "seed": 1})
    assert r.status_code == 200
    body = r.json()
    from pidlab.harness import tune_pso

    ref = tune_pso(validate_config(TINY), "ise", 1)
    assert body["gains_vector"] == ref["gains_vector"]
    assert body["objective_value"] == ref["objective_value"]
    assert body["convergence_csv"].startswith("iter,gbest_f")
    assert len(body["history"]) == TINY["pso"]["max_iter"] + 1


def test_identify_generates_excitation(client):
    r = client.post("/identify", json={"config": TINY})
    assert r.status_code == 200
    body = r.json()
    assert [e["channel"] for e in body["results"]] == [0, 1]
    assert body["io_csv"].startswith("k,t,u1,u2,y1,y2")
    for entry in body["results"]:
        assert set(entry["model"]) == {"r", "lags", "centers", "widths", "theta"}
        assert entry["report"]["rmse_holdout"] >= 0


def test_identify_accepts_existing_csv(client):
    first = client.post("/identify", json={"config": TINY}).json()
    again = client.post(
        "/identify", json={"config": TINY, "csv": first["io_csv"], "channels": [0]}
    ).json()
    assert again["io_csv"] is None
    assert [e["channel"] for e in again["results"]] == [0]
    # CSV rounding (12 significant digits) leaves RMSE essentially unchanged
    assert again["results"][0]["report"]["rmse_holdout"] == pytest.approx(
        first["results"][0]["report"]["rmse_holdout"], rel=1e-6
    )


def test_identify_rejects_malformed_csv(client):
    r = client.post("/identify", json={"config": TINY, "csv": "bogus,header\n1,2\n"})
    assert r.status_code == 400


def test_compare_returns_report_and_files(client):
    r = client.post("/compare", json={"config": TINY})
    assert r.status_code == 200
    body = r.json()
    assert set(body["files"]) >= {"report.json", "tables.md"}
    assert json.loads(body["files"]["report.json"]) == body["report"]
    # service bytes match a local run exactly
    _, local_files = build_comparison(validate_config(TINY))
    assert body["files"] == local_files


def test_render_tables_round_trip(client):
    report = client.post("/compare", json={"config": TINY}).json()["report"]
    r = client.post("/report/tables", json={"report": report})
    assert r.status_code == 200
    assert "Optimized PID parameters" in r.json()["tables_md"]


def test_render_tables_rejects_invalid_report(client):
    r = client.post("/report/tables", json={"report": {"bogus": 1}})
    assert r.status_code == 400
