"""Tests for the HTTP surface."""
import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src import api
from src.run_ledger import RunLedger


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(api, "run_ledger", RunLedger(str(tmp_path / "api_runs.db")))
    return TestClient(api.app)


def test_root_and_health(client):
    assert client.get("/").json()["status"] == "operational"
    assert client.get("/health").json()["status"] == "healthy"


def test_models(client):
    response = client.get("/models")
    assert response.status_code == 200
    names = {m["name"] for m in response.json()}
    assert {"horn-like", "filter-like", "constant"} <= names


def test_sweep_and_ledger(client):
    response = client.post("/sweep", json={
        "model": "constant",
        "dense_points": 101,
        "n_parts": 10,
        "include_curve": True
    })
    assert response.status_code == 200
    body = response.json()
    assert body["converged"] is True
    assert body["solver_calls"] == 10
    assert len(body["samples"]) == 10
    assert len(body["curve"]) == 101

    run = client.get(f"/runs/{body['run_id']}")
    assert run.status_code == 200
    assert run.json()["source"] == "api"
    assert len(client.get("/runs").json()) == 1
    stats = client.get("/runs/stats").json()
    assert stats["total_runs"] == 1 and stats["by_oracle"] == {"constant": 1}


def test_sweep_uploaded_csv(client):
    rows = "\n".join(f"{1e9 + k * 1e8:.1f},0.25" for k in range(11))
    response = client.post("/sweep", json={"csv_data": "frequency_hz,value\n" + rows, "n_parts": 2})
    assert response.status_code == 200
    body = response.json()
    assert body["oracle"] == "csv=upload"
    assert body["dense_points"] == 11
    assert body["curve"] is None


def test_sweep_errors(client):
    assert client.post("/sweep", json={"model": "no-such-model"}).status_code == 404
    assert client.post("/sweep", json={}).status_code == 400
    assert client.post("/sweep", json={"model": "constant", "band": [2e9, 1e9]}).status_code == 400
    rows = "\n".join(f"{1e9 + k * 1e8:.1f},0.25" for k in range(11))
    beyond = client.post("/sweep", json={"csv_data": rows, "band": [1e9, 3e9], "n_parts": 2})
    assert beyond.status_code == 502


def test_run_not_found(client):
    assert client.get("/runs/does-not-exist").status_code == 404


def test_bounds(client):
    response = client.post("/bounds", json={"n": 2, "h": 0.05, "f0": 1.0, "B": 1.0})
    assert response.status_code == 200
    assert response.json()["nyquist_check"] is True
    assert client.post("/bounds", json={"n": 2, "h": 0.0, "f0": 1.0, "B": 1.0}).status_code == 400


def test_compare(client):
    response = client.post("/compare", json={"reconstructed": [0.5, 0.5, 0.5, 0.5], "truth": [1, 1, 1, 1],
                                             "n_parts": 2})
    assert response.status_code == 200
    body = response.json()
    assert body["global_error"] == pytest.approx(0.5)
    assert body["part_errors"] == pytest.approx([0.5, 0.5])

    assert client.post("/compare", json={"reconstructed": [1, 2], "truth": [1]}).status_code == 400
    assert client.post("/compare", json={"reconstructed": [1, 2], "truth": [0, 0]}).status_code == 400
