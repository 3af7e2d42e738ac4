import json

import cv2
import numpy as np
import pytest
from fastapi.testclient import TestClient

from tumorvision.classifiers import CnnConfig, build_baseline_cnn
from tumorvision.service import ServiceConfig, Store, create_app
from tumorvision.training import checkpoint_from_model, save_checkpoint
from tumorvision.unet import UNetConfig, build_unet


@pytest.fixture(scope="module")
def checkpoints(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpts")
    clf = build_baseline_cnn(CnnConfig(conv_blocks=((8, 3, True),), fc_width=16, input_size=64), seed=0)
    seg = build_unet(UNetConfig(levels=3, base_filters=4, input_size=64), seed=0)
    save_checkpoint(checkpoint_from_model(clf), out / "classifier.ckpt")
    save_checkpoint(checkpoint_from_model(seg), out / "segmenter.ckpt")
    return out


@pytest.fixture
def service(checkpoints, tmp_path):
    config = ServiceConfig(
        store_path=str(tmp_path / "store.db"),
        classifier_checkpoint=str(checkpoints / "classifier.ckpt"),
        segmenter_checkpoint=str(checkpoints / "segmenter.ckpt"),
    )
    return config, TestClient(create_app(config))


@pytest.fixture
def client(service):
    return service[1]


def png_bytes(seed=0, size=256):
    image = np.random.default_rng(seed).integers(0, 256, (size, size), dtype=np.uint8).astype(np.uint8)
    ok, buf = cv2.imencode(".png", image)
    assert ok
    return buf.tobytes()


def make_patient(client, patient_id="p1"):
    response = client.post("/api/v1/patients", json={"patient_id": patient_id, "display_name": "Test"})
    assert response.status_code == 201
    return response.json()["patient_id"]


def upload(client, patient_id, payload):
    return client.post(
        f"/api/v1/patients/{patient_id}/scans",
        content=payload,
        headers={"content-type": "image/png"},
    )


class TestHealth:
    def test_healthz(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["classifier_loaded"] and body["segmenter_loaded"]


class TestUpload:
    def test_happy_path(self, client):
        pid = make_patient(client)
        response = upload(client, pid, png_bytes())
        assert response.status_code == 201
        assert response.json()["scan_id"]

    def test_idempotent_per_payload(self, client):
        pid = make_patient(client)
        payload = png_bytes(1)
        first = upload(client, pid, payload).json()["scan_id"]
        second = upload(client, pid, payload).json()["scan_id"]
        assert first == second

    def test_undecodable_payload(self, client):
        pid = make_patient(client)
        response = upload(client, pid, b"this is not an image")
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "undecodable_image"

    def test_unknown_patient_without_autocreate(self, checkpoints, tmp_path):
        config = ServiceConfig(
            store_path=str(tmp_path / "s.db"),
            classifier_checkpoint=str(checkpoints / "classifier.ckpt"),
            auto_create_patients=False,
        )
        client = TestClient(create_app(config))
        response = upload(client, "ghost", png_bytes())
        assert response.status_code == 404


class TestClassify:
    def test_result_contract(self, client):
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes(2)).json()["scan_id"]
        response = client.post(f"/api/v1/scans/{scan_id}/classify")
        assert response.status_code == 200
        result = response.json()
        probs = list(result["probabilities"].values())
        assert abs(sum(probs) - 1) < 1e-6
        assert result["confidence"] == pytest.approx(max(probs))
        assert result["latency_ms"] >= 0
        assert result["model_digest"]
        assert result["predicted_class"] in {"glioma", "meningioma", "pituitary", "no_tumor"}

    def test_deterministic(self, client):
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes(3)).json()["scan_id"]
        r1 = client.post(f"/api/v1/scans/{scan_id}/classify").json()
        r2 = client.post(f"/api/v1/scans/{scan_id}/classify").json()
        assert r1["probabilities"] == r2["probabilities"]

    def test_unknown_scan(self, client):
        response = client.post("/api/v1/scans/deadbeef/classify")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "scan_not_found"

    def test_no_model_loaded(self, tmp_path):
        config = ServiceConfig(store_path=str(tmp_path / "s.db"))
        client = TestClient(create_app(config))
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes()).json()["scan_id"]
        response = client.post(f"/api/v1/scans/{scan_id}/classify")
        assert response.status_code == 503
        assert response.json()["error"]["code"] == "no_classifier"


class TestSegment:
    def test_mask_retrievable_with_model_dims(self, client):
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes(4)).json()["scan_id"]
        result = client.post(f"/api/v1/scans/{scan_id}/segment").json()
        mask_response = client.get(result["mask_ref"])
        assert mask_response.status_code == 200
        mask = cv2.imdecode(np.frombuffer(mask_response.content, np.uint8), cv2.IMREAD_GRAYSCALE)
        assert mask.shape == (64, 64)  # the segmenter's preprocessed input dims
        assert set(np.unique(mask)) <= {0, 255}

    def test_byte_identical_masks(self, client):
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes(5)).json()["scan_id"]
        client.post(f"/api/v1/scans/{scan_id}/segment")
        first = client.get(f"/api/v1/scans/{scan_id}/mask").content
        client.post(f"/api/v1/scans/{scan_id}/segment")
        second = client.get(f"/api/v1/scans/{scan_id}/mask").content
        assert first == second

    def test_no_segmenter_loaded(self, checkpoints, tmp_path):
        config = ServiceConfig(
            store_path=str(tmp_path / "s.db"),
            classifier_checkpoint=str(checkpoints / "classifier.ckpt"),
        )
        client = TestClient(create_app(config))
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes()).json()["scan_id"]
        assert client.post(f"/api/v1/scans/{scan_id}/segment").status_code == 503


class TestHistory:
    def test_new_patient_empty(self, client):
        pid = make_patient(client)
        body = client.get(f"/api/v1/patients/{pid}/history").json()
        assert body["scans"] == []

    def test_workflow_composition(self, client):
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes(6)).json()["scan_id"]
        classified = client.post(f"/api/v1/scans/{scan_id}/classify").json()
        body = client.get(f"/api/v1/patients/{pid}/history").json()
        assert len(body["scans"]) == 1
        entry = body["scans"][0]
        assert entry["scan_id"] == scan_id
        assert entry["result"]["predicted_class"] == classified["predicted_class"]
        assert entry["result"]["confidence"] == classified["confidence"]

    def test_upload_order_preserved(self, client):
        pid = make_patient(client)
        first = upload(client, pid, png_bytes(7)).json()["scan_id"]
        second = upload(client, pid, png_bytes(8)).json()["scan_id"]
        body = client.get(f"/api/v1/patients/{pid}/history").json()
        assert [s["scan_id"] for s in body["scans"]] == [first, second]

    def test_unknown_patient(self, client):
        assert client.get("/api/v1/patients/ghost/history").status_code == 404


class TestExport:
    def test_document_composition(self, client):
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes(9)).json()["scan_id"]
        client.post(f"/api/v1/scans/{scan_id}/classify")
        doc = json.loads(client.get(f"/api/v1/patients/{pid}/export").content)
        assert doc["patient"]["patient_id"] == pid
        assert len(doc["scans"]) == 1
        assert "predicted_class" in doc["scans"][0]["result"]
        assert "confidence" in doc["scans"][0]["result"]

    def test_empty_patient(self, client):
        pid = make_patient(client)
        doc = json.loads(client.get(f"/api/v1/patients/{pid}/export").content)
        assert doc["scans"] == []

    def test_byte_identical_without_writes(self, client):
        pid = make_patient(client)
        upload(client, pid, png_bytes(10))
        first = client.get(f"/api/v1/patients/{pid}/export").content
        second = client.get(f"/api/v1/patients/{pid}/export").content
        assert first == second


class TestTumorInfo:
    def test_all_sections_nonempty(self, client):
        body = client.get("/api/v1/tumor-info/glioma").json()
        for section in ("overview", "causes", "symptoms", "treatments"):
            assert body[section]

    def test_class_field_matches(self, client):
        assert client.get("/api/v1/tumor-info/meningioma").json()["class"] == "meningioma"

    def test_unknown_class(self, client):
        assert client.get("/api/v1/tumor-info/astrocytoma").status_code == 404


class TestPersistence:
    def test_scans_survive_restart(self, checkpoints, tmp_path):
        store_path = str(tmp_path / "persist.db")
        config = ServiceConfig(store_path=store_path,
                               classifier_checkpoint=str(checkpoints / "classifier.ckpt"))
        client = TestClient(create_app(config))
        pid = make_patient(client)
        scan_id = upload(client, pid, png_bytes(11)).json()["scan_id"]
        client.post(f"/api/v1/scans/{scan_id}/classify")

        # simulate restart: fresh app over the same store file
        reopened = TestClient(create_app(ServiceConfig(
            store_path=store_path,
            classifier_checkpoint=str(checkpoints / "classifier.ckpt"),
        )))
        body = reopened.get(f"/api/v1/patients/{pid}/history").json()
        assert [s["scan_id"] for s in body["scans"]] == [scan_id]
        assert body["scans"][0]["result"]["predicted_class"]

    def test_store_direct_roundtrip(self, tmp_path):
        store = Store(str(tmp_path / "direct.db"))
        store.create_patient("p", "P")
        scan_id = store.add_scan("p", b"payload-bytes")
        assert store.get_scan(scan_id)["image"] == b"payload-bytes"
