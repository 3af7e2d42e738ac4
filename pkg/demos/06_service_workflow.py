"""Full clinical workflow against an in-process service instance:
upload -> classify -> segment -> history -> export."""

import json
import tempfile
from pathlib import Path

import cv2
import numpy as np
from fastapi.testclient import TestClient

from tumorvision import CnnConfig, UNetConfig, build_baseline_cnn, build_unet
from tumorvision.service import ServiceConfig, create_app
from tumorvision.training import checkpoint_from_model, save_checkpoint

out = Path(tempfile.mkdtemp(prefix="tv_demo_"))
save_checkpoint(checkpoint_from_model(build_baseline_cnn(CnnConfig(input_size=64))), out / "clf.ckpt")
save_checkpoint(
    checkpoint_from_model(build_unet(UNetConfig(levels=3, base_filters=8, input_size=64))),
    out / "seg.ckpt",
)

client = TestClient(create_app(ServiceConfig(
    store_path=str(out / "store.db"),
    classifier_checkpoint=str(out / "clf.ckpt"),
    segmenter_checkpoint=str(out / "seg.ckpt"),
)))

client.post("/api/v1/patients", json={"patient_id": "demo", "display_name": "Demo Patient"})
scan = np.random.default_rng(0).integers(0, 256, (256, 256), dtype=np.uint8).astype(np.uint8)
payload = cv2.imencode(".png", scan)[1].tobytes()
scan_id = client.post("/api/v1/patients/demo/scans", content=payload,
                      headers={"content-type": "image/png"}).json()["scan_id"]
print(f"uploaded scan {scan_id}")

result = client.post(f"/api/v1/scans/{scan_id}/classify").json()
print(f"classified as {result['predicted_class']} "
      f"(confidence {result['confidence']:.2f}, latency {result['latency_ms']} ms)")

seg = client.post(f"/api/v1/scans/{scan_id}/segment").json()
mask = client.get(seg["mask_ref"]).content
print(f"mask PNG: {len(mask)} bytes at {seg['mask_ref']}")

history = client.get("/api/v1/patients/demo/history").json()
print(f"history entries: {len(history['scans'])}")
export = json.loads(client.get("/api/v1/patients/demo/export").content)
print(f"export document keys: {sorted(export)}")
info = client.get(f"/api/v1/tumor-info/{result['predicted_class']}").json()
print(f"tumor info overview: {info['overview'][:70]}...")
