import numpy as np
import pytest
from fastapi.testclient import TestClient

from fadec.pipeline import PipelineConfig, generate_model, model_to_payload
from fadec.schedule import reference_profile
from fadec.service import create_app
from fadec.synth import calibration_images, default_intrinsics
from fadec.tensor import tensor_from_b64, tensor_to_b64


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def small_model_payload():
    cfg = PipelineConfig(hyp_count=8, measurement_frames=2)
    return model_to_payload(generate_model(cfg, seed=9)), cfg


def _frames_payload(cfg, seed=4, n=2):
    rng = np.random.default_rng(seed)
    k = default_intrinsics(cfg.height, cfg.width)
    frames = []
    pose = np.eye(4)
    for i in range(n):
        from fadec.tensor import FTensor

        img = FTensor.from_array(rng.normal(size=(3, cfg.height, cfg.width)))
        gt = FTensor.from_array(np.full((cfg.height, cfg.width), 2.0))
        if i:
            pose = pose.copy()
            pose[0, 3] += 0.02
        frames.append({
            "image": tensor_to_b64(img),
            "pose": [float(v) for v in pose.reshape(-1)],
            "intrinsics": [float(v) for v in k.reshape(-1)],
            "depth": tensor_to_b64(gt),
        })
    return frames


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_analyze_reference_endpoint(client):
    r = client.post("/analyze", json={"reference": True})
    assert r.status_code == 200
    body = r.json()
    assert body["matches_reference"] is True
    assert body["report"]["instance_counts"]["CVF"]["grid_sampling"] == 128
    assert body["partition"]["summary"]["CVF"]["grid_sampling"]["side"] == "SW"
    assert "Grid Sampling" in body["table"]


def test_analyze_requires_graph_or_reference(client):
    r = client.post("/analyze", json={})
    assert r.status_code == 422


def test_analyze_custom_graph(client):
    graph = {
        "nodes": [
            {"id": "c", "kind": "conv", "process": "FE",
             "in_shapes": [[1, 4, 4]], "out_shape": [1, 4, 4],
             "spec": {"kernel": 1, "stride": 1, "in_ch": 1, "out_ch": 1,
                      "padding": 0}},
            {"id": "g", "kind": "grid_sampling", "process": "CVF",
             "in_shapes": [[1, 4, 4], [4, 4, 2]], "out_shape": [1, 4, 4]},
        ],
        "edges": [],
    }
    r = client.post("/analyze", json={"graph": graph})
    assert r.status_code == 200
    body = r.json()
    assert body["report"]["instance_counts"]["FE"]["conv(1,1)"] == 1
    assert body["partition"]["placements"]["g"]["side"] == "SW"
    assert body["matches_reference"] is None


def test_schedule_reference_endpoint(client):
    r = client.post("/schedule", json={"reference": True, "frames": 4})
    assert r.status_code == 200
    body = r.json()
    assert body["metrics"]["cvf_hidden_fraction"] == 0.93
    assert abs(body["metrics"]["extern_overhead_share"] - 0.0169) < 1e-4
    assert body["svg"].startswith("<svg")
    assert body["timeline"]["frame_makespan_us"] == 278_000


def test_schedule_custom_profile_and_cycle_rejected(client):
    prof = reference_profile().to_json()
    r = client.post("/schedule", json={"profile": prof, "frames": 2})
    assert r.status_code == 200
    # introduce a cycle
    bad = reference_profile().to_json()
    for s in bad["stages"]:
        if s["name"] == "FE":
            s["deps"].append({"stage": "CVD", "offset": 0})
    r = client.post("/schedule", json={"profile": bad, "frames": 2})
    assert r.status_code == 422
    assert "cycle" in r.json()["detail"]


def test_calibrate_and_infer_roundtrip(client, small_model_payload):
    payload, cfg = small_model_payload
    r = client.post("/calibrate", json={
        "model": payload,
        "synthetic": {"count": 2, "seed": 3},
    })
    assert r.status_code == 200
    quant = r.json()["quant"]
    assert quant["bits"] == {"weight": 8, "bias": 32, "scale": 8, "act": 16}
    assert "image" in quant["act_exps"]

    frames = _frames_payload(cfg)
    r = client.post("/infer", json={
        "model": payload, "frames": frames, "mode": "quant", "quant": quant,
    })
    assert r.status_code == 200
    body = r.json()
    assert len(body["depths"]) == 2
    ratio = body["metrics"]["quant_vs_float_mse_ratio"]
    assert ratio < 1.10
    depth = tensor_from_b64(body["depths"][0])
    assert depth.shape == (cfg.height, cfg.width)
    assert body["frames_meta"][0]["fusion"] == "self"
    assert body["frames_meta"][1]["fusion"] == "keyframes"


def test_infer_quant_without_manifest_rejected(client, small_model_payload):
    payload, cfg = small_model_payload
    r = client.post("/infer", json={
        "model": payload, "frames": _frames_payload(cfg, n=1), "mode": "quant",
    })
    assert r.status_code == 422


def test_infer_malformed_pose_rejected(client, small_model_payload):
    payload, cfg = small_model_payload
    frames = _frames_payload(cfg, n=1)
    frames[0]["pose"] = [1.0, 2.0]
    r = client.post("/infer", json={"model": payload, "frames": frames})
    assert r.status_code == 422
    assert "pose" in r.json()["detail"]


def test_calibrate_all_zero_images_warns(client, small_model_payload):
    payload, cfg = small_model_payload
    r = client.post("/calibrate", json={
        "model": payload,
        "synthetic": {"count": 1, "std": 0.0, "mean": 0.0},
    })
    assert r.status_code == 200
    body = r.json()
    assert any("image" in w for w in body["warnings"])
    assert body["quant"]["act_exps"]["image"] == 0
