import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from airsig.service.app import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


@pytest.fixture(scope="module")
def dataset_dir(client, tmp_path_factory):
    out = tmp_path_factory.mktemp("svc") / "ds"
    response = client.post(
        "/synth",
        json={"out_dir": str(out), "users": 4, "seed": 21, "forgeries_per_user": 2},
    )
    assert response.status_code == 200, response.text
    return out


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"


def test_synth_writes_dataset(client, dataset_dir):
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    assert len(manifest["samples"]) == 4 * (4 * 2 + 2)
    assert (dataset_dir / "run_manifest.json").is_file()


def test_synth_rerun_is_byte_identical(client, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        r = client.post("/synth", json={"out_dir": str(out), "users": 2, "seed": 5})
        assert r.status_code == 200
    for rel in sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file()):
        if rel.name == "run_manifest.json":
            continue  # records the requested out_dir, which differs
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_preprocess_endpoint(client, dataset_dir, tmp_path):
    out = tmp_path / "processed"
    response = client.post(
        "/preprocess",
        json={"dataset": str(dataset_dir), "out_dir": str(out), "profile": "verify"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["n_samples"] == 4 * (4 * 2 + 2)
    assert body["n_failed"] == 0
    assert (out / "manifest.json").is_file()


def test_preprocess_missing_dataset_is_404(client, tmp_path):
    response = client.post(
        "/preprocess",
        json={"dataset": str(tmp_path / "nope"), "out_dir": str(tmp_path / "x")},
    )
    assert response.status_code == 404


def test_eval_endpoint(client, dataset_dir, tmp_path):
    out = tmp_path / "eval"
    response = client.post(
        "/eval",
        json={
            "dataset": str(dataset_dir),
            "out_dir": str(out),
            "cells": [
                {"sensors": ["linacc"], "mode": "4vs1", "impostor": "random"},
                {"sensors": ["acc", "gyro"], "mode": "1vs1", "impostor": "skilled"},
            ],
        },
    )
    assert response.status_code == 200, response.text
    body = response.json()
    assert len(body["reports"]) == 2
    for report in body["reports"]:
        assert 0.0 <= report["eer"] <= 0.5
        assert (out / report["scores_file"]).is_file()
        assert (out / report["det_file"]).is_file()
    # 4 users x 2 probes = 8 genuine scores: below the confidence floor
    assert body["reports"][0]["low_confidence"] is True
    assert (out / "reports.json").is_file()


def test_eval_embedding_scorer(client, dataset_dir, tmp_path):
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    rng = np.random.default_rng(0)
    per_user = {}
    lines = ["sample_id," + ",".join(f"e{i}" for i in range(6))]
    for entry in manifest["samples"]:
        base = per_user.setdefault(entry["user_id"], rng.normal(size=6))
        vec = base + 0.05 * rng.normal(size=6)
        if entry["label"] == "skilled_forgery":
            vec = vec + rng.normal(size=6)
        lines.append(entry["sample_id"] + "," + ",".join(repr(float(v)) for v in vec))
    emb = tmp_path / "emb.csv"
    emb.write_text("\n".join(lines) + "\n")
    out = tmp_path / "eval_emb"
    response = client.post(
        "/eval",
        json={
            "dataset": str(dataset_dir),
            "out_dir": str(out),
            "cells": [
                {"sensors": ["linacc"], "mode": "4vs1", "impostor": "random", "scorer": "embedding"}
            ],
            "embedding_file": str(emb),
        },
    )
    assert response.status_code == 200, response.text
    assert response.json()["reports"][0]["eer"] < 0.3


def test_reconstruct_endpoint(client, dataset_dir, tmp_path):
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    sid = manifest["samples"][0]["sample_id"]
    out = tmp_path / "rec"
    response = client.post(
        "/reconstruct",
        json={
            "dataset": str(dataset_dir),
            "sample_id": sid,
            "out_dir": str(out),
            "profile": "none",
        },
    )
    assert response.status_code == 200, response.text
    body = response.json()
    traj_lines = (out / f"{sid}.trajectory.csv").read_text().splitlines()
    assert traj_lines[0] == "t,x,y,z,vx,vy,vz,ax,ay,az"
    proj_lines = (out / f"{sid}.projection.csv").read_text().splitlines()
    assert proj_lines[0] == "t,u,v"
    assert body["alignment_residual"] is not None
    assert body["alignment_residual"] < 0.5


def test_reconstruct_unknown_sample_is_404(client, dataset_dir, tmp_path):
    response = client.post(
        "/reconstruct",
        json={
            "dataset": str(dataset_dir),
            "sample_id": "ghost",
            "out_dir": str(tmp_path / "rec"),
        },
    )
    assert response.status_code == 404


def test_score_endpoint_identity(client):
    rng = np.random.default_rng(1)
    t = (np.arange(300) / 100.0).tolist()
    def trace():
        burst = np.zeros((300, 3))
        burst[100:200] = rng.normal(0, 1.0, size=(100, 3))
        return {"timestamps": t, "samples": burst.tolist()}

    payload_traces = {
        "acc": trace(),
        "linacc": trace(),
        "gyro": trace(),
    }
    sample = {"traces": payload_traces}
    response = client.post(
        "/score",
        json={"probe": sample, "references": [sample], "sensors": ["acc", "linacc", "gyro"]},
    )
    assert response.status_code == 200, response.text
    body = response.json()
    assert body["score"] == 0.0
    assert set(body["per_sensor"]) == {
        "accelerometer",
        "linear_accelerometer",
        "gyroscope",
    }


def test_score_requires_references(client):
    response = client.post(
        "/score",
        json={"probe": {"traces": {}}, "references": [], "sensors": ["acc"]},
    )
    assert response.status_code == 400


def test_score_missing_sensor_is_400(client):
    t = (np.arange(50) / 100.0).tolist()
    x = np.random.default_rng(0).normal(size=(50, 3)).tolist()
    sample = {"traces": {"acc": {"timestamps": t, "samples": x}}}
    response = client.post(
        "/score",
        json={"probe": sample, "references": [sample], "sensors": ["gyro"]},
    )
    assert response.status_code == 400
    assert "linear" in response.json()["detail"] or "gyro" in response.json()["detail"]


def test_export_endpoint(client, dataset_dir, tmp_path):
    out = tmp_path / "export"
    response = client.post(
        "/export",
        json={"dataset": str(dataset_dir), "out_dir": str(out), "length": 700},
    )
    assert response.status_code == 200, response.text
    manifest = json.loads((out / "fixed_manifest.json").read_text())
    assert manifest["length"] == 700
    first = manifest["samples"][0]
    rows = (out / first["file"]).read_text().splitlines()
    assert len(rows) == 701
    split = json.loads((out / "split_manifest.json").read_text())
    assert set(split) >= {"train", "test", "seed"}
    assert len(split["train"]) + len(split["test"]) == 4


def test_validation_error_is_422(client):
    response = client.post("/synth", json={"out_dir": "/tmp/x"})  # users missing
    assert response.status_code == 422
