import math

import pytest
from fastapi.testclient import TestClient

from isolab.service import app

client = TestClient(app)

FLAT = {"mode": "constellation", "w": "r", "g": "1", "h": "0", "m": 2, "R": 2.0, "analyses": ["isoperimetry"]}


def test_health_and_schema():
    assert client.get("/health").json() == {"status": "ok"}
    assert "properties" in client.get("/schema").json()["config"]
    assert set(client.get("/examples").json()) == {"catenoid", "hyperboloid", "cone", "paraboloid", "sphere"}


def test_run_ok():
    r = client.post("/run", json={"config": FLAT})
    assert r.status_code == 200
    body = r.json()
    assert body["exit_code"] == 0
    assert body["reports"]["isoperimetry"]["result"]["model_value"] == pytest.approx(1.0, rel=1e-9)
    assert body["tables"]["isoperimetry"]["header"] == ["r", "model_quotient", "closed_form"]


def test_single_endpoint():
    r = client.post("/exit-time", json=FLAT)
    assert r.status_code == 200
    assert list(r.json()["reports"]) == ["exit-time"]


def test_capacity_endpoint():
    cfg = {**FLAT, "analyses": [{"kind": "capacity", "rho": 0.5}], "output": {"v0": False}}
    r = client.post("/capacity", json=cfg)
    assert r.json()["reports"]["capacity"]["result"]["capacity_bound"] == pytest.approx(1 / math.log(4.0), rel=1e-9)


def test_status_codes():
    assert client.post("/run", json={"config": {**FLAT, "w": "r+"}}).status_code == 422
    assert client.post("/run", json={"config": {**FLAT, "w": "sin(r)", "R": 3.0}}).status_code == 409
    bad = {**FLAT, "w": "sinh(r)", "g": "1/(1+r^2)", "m": 3, "R": 8.0}
    r = client.post("/run", json={"config": bad})
    assert r.status_code == 500 and r.json()["exit_code"] == 2


def test_surface_verify_endpoint():
    r = client.post("/surface-verify", json={"mode": "surface", "surface": "paraboloid", "analyses": ["isoperimetry"]})
    assert r.status_code == 200
    assert r.json()["reports"]["isoperimetry"]["result"]["all_hold"] is True


def test_cli_remote_client(tmp_path, monkeypatch):
    import json

    import httpx

    from isolab.cli import main

    monkeypatch.setattr(httpx, "post", lambda url, json, timeout: client.post(url.replace("http://svc", ""), json=json))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**FLAT, "analyses": ["volume"]}))
    assert main(["volume", "--config", str(cfg), "--server", "http://svc", "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "volume.csv").read_text().startswith("r,volume_bound,boundary_gradient_bound\n")
    cfg.write_text(json.dumps({**FLAT, "w": "sin(r)", "R": 3.0}))
    assert main(["run", "--config", str(cfg), "--server", "http://svc", "--out", str(tmp_path / "o")]) == 3
