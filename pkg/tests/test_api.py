import numpy as np
import pytest
from fastapi.testclient import TestClient

from app import api
from app.config import settings
from app.datasets import generate_dataset
from app.main import app
from app.net import BeamformingCNN, InputScaler, save_checkpoint
from app.net.checkpoint import Checkpoint
from app.numerics import RandomStream
from app.schemas.training import NetworkConfig

client = TestClient(app)

INSTANCE = {"h_re": [[2.0, 0.0], [0.0, 2.0]], "h_im": [[0.0, 0.0], [0.0, 0.0]], "power_w": 10.0}


@pytest.fixture
def served(tmp_path, small_config, monkeypatch):
    pool = generate_dataset(small_config, 8, RandomStream(70))
    model = BeamformingCNN(NetworkConfig(num_antennas=2, num_users=2))
    params, buffers = model.init_params(RandomStream(71))
    path = save_checkpoint(tmp_path / "served.ckpt", Checkpoint(
        network=model.config, params=params, buffers=buffers,
        scaler=InputScaler.fit(pool.instances()), power_w=pool.power_w,
    ))
    monkeypatch.setattr(settings, "CHECKPOINT_PATH", str(path))
    api._checkpoint.cache_clear()
    yield pool
    api._checkpoint.cache_clear()


def test_health():
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_solve_orthogonal_users():
    response = client.post("/api/v1/solve", json=INSTANCE)
    assert response.status_code == 200
    body = response.json()
    assert body["q"] == pytest.approx([5.0, 5.0], rel=1e-8)
    assert body["balanced_sinr"] == pytest.approx(20.0, rel=1e-8)
    assert body["downlink"]["total_power"] == pytest.approx(10.0)
    assert body["balanced_sinr_db"] == pytest.approx(10 * np.log10(20.0))


def test_solve_accepts_dbm():
    doc = {"h_re": [[1.0]], "h_im": [[0.0]], "power_dbm": 30.0}
    response = client.post("/api/v1/solve", json=doc)
    assert response.status_code == 200
    assert response.json()["q"] == pytest.approx([1.0])


def test_solve_rejects_shape_mismatch():
    doc = {**INSTANCE, "sigma2": [1.0, 1.0, 1.0]}
    response = client.post("/api/v1/solve", json=doc)
    assert response.status_code == 400
    assert "DimensionMismatch" in response.json()["detail"]


def test_solve_needs_exactly_one_power():
    response = client.post("/api/v1/solve", json={**INSTANCE, "power_dbm": 40.0})
    assert response.status_code == 422


def test_zero_channel_is_degenerate():
    doc = {"h_re": [[1.0, 0.0], [0.0, 0.0]], "h_im": [[0.0, 0.0], [0.0, 0.0]], "power_w": 1.0}
    response = client.post("/api/v1/solve", json=doc)
    assert response.status_code == 400
    assert "DegenerateInstance" in response.json()["detail"]


def test_recover_from_equal_split():
    response = client.post("/api/v1/recover", json={"instance": INSTANCE, "q": [5.0, 5.0]})
    assert response.status_code == 200
    body = response.json()
    assert body["sinr"] == pytest.approx([20.0, 20.0], rel=1e-6)
    assert body["p"] == pytest.approx([5.0, 5.0], rel=1e-6)


def test_predict_without_checkpoint(monkeypatch):
    monkeypatch.setattr(settings, "CHECKPOINT_PATH", None)
    response = client.post("/api/v1/predict", json=INSTANCE)
    assert response.status_code == 503


def test_predict_with_checkpoint(served):
    inst = served[0].instance
    doc = {"h_re": inst.H.real.tolist(), "h_im": inst.H.imag.tolist(), "power_w": inst.power}
    response = client.post("/api/v1/predict", json=doc)
    assert response.status_code == 200
    body = response.json()
    assert sum(body["q"]) == pytest.approx(inst.power)
    assert len(body["fractions"]) == 2
    assert body["downlink"]["total_power"] == pytest.approx(inst.power)


def test_predict_rejects_other_problem_size(served):
    doc = {"h_re": [[1.0, 0.0, 0.0]], "h_im": [[0.0, 0.0, 0.0]], "power_w": served.power_w}
    response = client.post("/api/v1/predict", json=doc)
    assert response.status_code == 400


def test_predict_rejects_other_power(served):
    inst = served[0].instance
    doc = {"h_re": inst.H.real.tolist(), "h_im": inst.H.imag.tolist(), "power_w": 2 * inst.power}
    response = client.post("/api/v1/predict", json=doc)
    assert response.status_code == 400
