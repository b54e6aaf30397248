"""Tests for the inference API."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from wikg.core.config import settings
from wikg.main import app
from wikg.services.data_service import load_bags, resolve_bag_path

client = TestClient(app)


@pytest.fixture
def served(trained_checkpoint, monkeypatch):
    monkeypatch.setattr(settings, "checkpoint_path", str(trained_checkpoint))
    return trained_checkpoint


@pytest.fixture
def bag_file(small_dataset):
    record = small_dataset.manifest.records[0]
    return str(resolve_bag_path(small_dataset.manifest.root, record.bag_path))


def test_root_and_health(served):
    response = client.get("/")
    assert response.status_code == 200
    data = response.json()
    assert data["endpoints"]["predict"] == "/inference/predict"
    assert data["checkpoint"] == str(served)
    assert data["checkpoint_state"] == "ready"
    assert client.get("/health").json() == {"status": "healthy", "checkpoint_state": "ready"}


def test_health_without_checkpoint(monkeypatch, tmp_path):
    monkeypatch.setattr(settings, "checkpoint_path", None)
    assert client.get("/health").json() == {"status": "degraded", "checkpoint_state": "unconfigured"}
    monkeypatch.setattr(settings, "checkpoint_path", str(tmp_path / "gone.wkgc"))
    assert client.get("/health").json()["checkpoint_state"] == "missing"


def test_model_info(served):
    response = client.get("/inference/model")
    assert response.status_code == 200
    data = response.json()
    assert data["config"]["kind"] == "wikg"
    assert data["config"]["d_in"] == 8
    assert data["dtype"] == "float64"
    assert data["param_count"] > 0


def test_predict_from_path_and_inline(served, bag_file, small_dataset):
    by_path = client.post("/inference/predict", json={"bag_path": bag_file})
    assert by_path.status_code == 200
    result = by_path.json()
    assert sum(result["probabilities"]) == pytest.approx(1.0)
    assert result["predicted_class"] in (0, 1)

    features = load_bags(small_dataset.manifest)[0].features
    inline = client.post("/inference/predict", json={"features": features.tolist()})
    assert inline.status_code == 200
    assert inline.json()["n_instances"] == features.shape[0]
    assert np.allclose(inline.json()["probabilities"], result["probabilities"])


def test_wrong_feature_size(served):
    response = client.post("/inference/predict", json={"features": [[0.1, 0.2, 0.3]] * 5})
    assert response.status_code == 400


def test_request_needs_exactly_one_source(served, bag_file):
    assert client.post("/inference/predict", json={}).status_code == 422
    both = {"bag_path": bag_file, "features": [[0.0] * 8]}
    assert client.post("/inference/predict", json=both).status_code == 422


def test_missing_bag_file(served, tmp_path):
    response = client.post("/inference/predict", json={"bag_path": str(tmp_path / "none.wkgb")})
    assert response.status_code == 404


def test_instance_limit(served, bag_file, monkeypatch):
    monkeypatch.setattr(settings, "max_instances_per_request", 2)
    response = client.post("/inference/predict", json={"bag_path": bag_file})
    assert response.status_code == 400
    assert "limit" in response.json()["detail"]


def test_graph_endpoint(served, bag_file):
    response = client.post("/inference/graph", json={"bag_path": bag_file})
    assert response.status_code == 200
    document = response.json()
    assert document["k"] == 3
    assert len(document["edges"]) == document["n"] * 3
    assert len(document["top_attention"]) == document["n"]


def test_unconfigured_checkpoint(monkeypatch):
    monkeypatch.setattr(settings, "checkpoint_path", None)
    assert client.get("/inference/model").status_code == 500


def test_missing_checkpoint(monkeypatch, tmp_path):
    monkeypatch.setattr(settings, "checkpoint_path", str(tmp_path / "gone.wkgc"))
    assert client.get("/inference/model").status_code == 404
