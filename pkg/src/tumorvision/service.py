"""HTTP inference service: upload, classify, segment, patient history.

Storage is a single SQLite file (images and masks stored as blobs), so a
killed-and-restarted service lists exactly the scans whose uploads were
acknowledged. Models are loaded once from checkpoint files and treated as
immutable; classification latency is measured server-side against the
2000 ms budget.
"""

from __future__ import annotations

import hashlib
import json
import os
import sqlite3
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import cv2
import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .classifiers import classify, predict_class
from .data import CLASS_ORDER, TumorClass
from .training import checkpoint_digest, load_checkpoint, prepare_image, restore_model
from .unet import segment, threshold_mask

LATENCY_BUDGET_MS = 2000


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    store_path: str = "tumorvision.db"
    classifier_checkpoint: str | None = None
    segmenter_checkpoint: str | None = None
    auto_create_patients: bool = True
    content_path: str | None = None
    static_dir: str | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown service config keys: {sorted(unknown)}")
        config = cls(**raw)
        return config.with_env_overrides()

    def with_env_overrides(self) -> "ServiceConfig":
        env = {
            "host": os.environ.get("TUMORVISION_HOST"),
            "port": os.environ.get("TUMORVISION_PORT"),
            "store_path": os.environ.get("TUMORVISION_STORE_PATH"),
            "classifier_checkpoint": os.environ.get("TUMORVISION_CLASSIFIER_CKPT"),
            "segmenter_checkpoint": os.environ.get("TUMORVISION_SEGMENTER_CKPT"),
        }
        updates = {k: v for k, v in env.items() if v is not None}
        if "port" in updates:
            updates["port"] = int(updates["port"])
        return ServiceConfig(**{**self.__dict__, **updates})


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class Store:
    """SQLite-backed persistence for patients, scans, and results."""

    def __init__(self, path: str):
        self.conn = sqlite3.connect(path, check_same_thread=False)
        self.conn.execute("PRAGMA journal_mode=WAL")
        self.conn.executescript(
            """
            CREATE TABLE IF NOT EXISTS patients (
                patient_id TEXT PRIMARY KEY,
                display_name TEXT NOT NULL,
                created_at TEXT NOT NULL
            );
            CREATE TABLE IF NOT EXISTS scans (
                scan_id TEXT PRIMARY KEY,
                patient_id TEXT NOT NULL REFERENCES patients(patient_id),
                digest TEXT NOT NULL,
                image BLOB NOT NULL,
                uploaded_at TEXT NOT NULL,
                seq INTEGER NOT NULL,
                result_json TEXT,
                mask_png BLOB,
                UNIQUE (patient_id, digest)
            );
            """
        )
        self.conn.commit()

    def create_patient(self, patient_id: str, display_name: str) -> dict:
        created_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        with self.conn:
            self.conn.execute(
                "INSERT OR IGNORE INTO patients VALUES (?, ?, ?)",
                (patient_id, display_name, created_at),
            )
        return self.get_patient(patient_id)

    def get_patient(self, patient_id: str) -> dict | None:
        row = self.conn.execute(
            "SELECT patient_id, display_name, created_at FROM patients WHERE patient_id = ?",
            (patient_id,),
        ).fetchone()
        if row is None:
            return None
        return {"patient_id": row[0], "display_name": row[1], "created_at": row[2]}

    def add_scan(self, patient_id: str, payload: bytes) -> str:
        digest = hashlib.sha256(payload).hexdigest()
        existing = self.conn.execute(
            "SELECT scan_id FROM scans WHERE patient_id = ? AND digest = ?",
            (patient_id, digest),
        ).fetchone()
        if existing:
            return existing[0]
        scan_id = hashlib.sha256(f"{patient_id}:{digest}".encode()).hexdigest()[:16]
        uploaded_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        seq = self.conn.execute("SELECT COALESCE(MAX(seq), 0) + 1 FROM scans").fetchone()[0]
        with self.conn:
            self.conn.execute(
                "INSERT INTO scans (scan_id, patient_id, digest, image, uploaded_at, seq) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (scan_id, patient_id, digest, payload, uploaded_at, seq),
            )
        return scan_id

    def get_scan(self, scan_id: str) -> dict | None:
        row = self.conn.execute(
            "SELECT scan_id, patient_id, digest, image, uploaded_at, result_json, mask_png "
            "FROM scans WHERE scan_id = ?",
            (scan_id,),
        ).fetchone()
        if row is None:
            return None
        return {
            "scan_id": row[0],
            "patient_id": row[1],
            "digest": row[2],
            "image": row[3],
            "uploaded_at": row[4],
            "result": json.loads(row[5]) if row[5] else None,
            "mask_png": row[6],
        }

    def set_result(self, scan_id: str, result: dict) -> None:
        with self.conn:
            self.conn.execute(
                "UPDATE scans SET result_json = ? WHERE scan_id = ?",
                (json.dumps(result, sort_keys=True), scan_id),
            )

    def set_mask(self, scan_id: str, mask_png: bytes) -> None:
        with self.conn:
            self.conn.execute(
                "UPDATE scans SET mask_png = ? WHERE scan_id = ?", (mask_png, scan_id)
            )

    def history(self, patient_id: str) -> list[dict]:
        rows = self.conn.execute(
            "SELECT scan_id, uploaded_at, result_json, mask_png IS NOT NULL "
            "FROM scans WHERE patient_id = ? ORDER BY seq",
            (patient_id,),
        ).fetchall()
        return [
            {
                "scan_id": r[0],
                "uploaded_at": r[1],
                "result": json.loads(r[2]) if r[2] else None,
                "has_mask": bool(r[3]),
            }
            for r in rows
        ]


def load_tumor_info(path: str | None) -> dict:
    if path is not None:
        raw = json.loads(Path(path).read_text())
    else:
        raw = json.loads(
            resources.files("tumorvision").joinpath("content/tumor_info.json").read_text()
        )
    for cls in TumorClass:
        entry = raw.get(cls.value)
        if not entry or any(
            not entry.get(k) for k in ("overview", "causes", "symptoms", "treatments")
        ):
            raise ValueError(f"tumor info content missing or incomplete for {cls.value}")
    return raw


def _decode_image(payload: bytes) -> np.ndarray | None:
    array = np.frombuffer(payload, dtype=np.uint8)
    image = cv2.imdecode(array, cv2.IMREAD_GRAYSCALE)
    return image


def create_app(config: ServiceConfig) -> FastAPI:
    store = Store(config.store_path)
    tumor_info = load_tumor_info(config.content_path)

    classifier = None
    classifier_digest = None
    if config.classifier_checkpoint:
        classifier = restore_model(load_checkpoint(config.classifier_checkpoint))
        classifier_digest = checkpoint_digest(config.classifier_checkpoint)
    segmenter = None
    segmenter_digest = None
    if config.segmenter_checkpoint:
        segmenter = restore_model(load_checkpoint(config.segmenter_checkpoint))
        segmenter_digest = checkpoint_digest(config.segmenter_checkpoint)

    app = FastAPI(title="tumorvision", version="0.1.0")
    app.state.store = store

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    def require_patient(patient_id: str) -> dict:
        patient = store.get_patient(patient_id)
        if patient is None:
            raise ApiError(404, "patient_not_found", f"unknown patient {patient_id}")
        return patient

    def require_scan(scan_id: str) -> dict:
        scan = store.get_scan(scan_id)
        if scan is None:
            raise ApiError(404, "scan_not_found", f"unknown scan {scan_id}")
        return scan

    @app.get("/healthz")
    @app.get("/api/v1/healthz")
    async def healthz():
        return {
            "status": "ok",
            "classifier_loaded": classifier is not None,
            "segmenter_loaded": segmenter is not None,
        }

    @app.post("/api/v1/patients", status_code=201)
    async def create_patient(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise ApiError(422, "invalid_body", "request body must be JSON")
        patient_id = body.get("patient_id") or hashlib.sha256(os.urandom(16)).hexdigest()[:12]
        display_name = body.get("display_name", patient_id)
        return store.create_patient(patient_id, display_name)

    @app.post("/api/v1/patients/{patient_id}/scans", status_code=201)
    async def upload_scan(patient_id: str, request: Request):
        if store.get_patient(patient_id) is None:
            if not config.auto_create_patients:
                raise ApiError(404, "patient_not_found", f"unknown patient {patient_id}")
            store.create_patient(patient_id, patient_id)
        payload = await request.body()
        if not payload or _decode_image(payload) is None:
            raise ApiError(422, "undecodable_image", "payload is not a decodable PNG/JPEG image")
        scan_id = store.add_scan(patient_id, payload)
        return {"scan_id": scan_id, "patient_id": patient_id}

    @app.post("/api/v1/scans/{scan_id}/classify")
    async def classify_scan(scan_id: str):
        started = time.perf_counter()
        scan = require_scan(scan_id)
        if classifier is None:
            raise ApiError(503, "no_classifier", "no classifier checkpoint is loaded")
        image = _decode_image(scan["image"])
        prepped = prepare_image(image, classifier.input_size)
        probs = classify(classifier, prepped)
        predicted, confidence = predict_class(probs)
        latency_ms = int(round((time.perf_counter() - started) * 1000))
        result = dict(scan["result"] or {})
        result.update(
            {
                "predicted_class": predicted.value,
                "confidence": confidence,
                "probabilities": {
                    cls.value: float(p) for cls, p in zip(CLASS_ORDER, probs.values)
                },
                "latency_ms": latency_ms,
                "model_digest": classifier_digest,
            }
        )
        store.set_result(scan_id, result)
        return result

    @app.post("/api/v1/scans/{scan_id}/segment")
    async def segment_scan(scan_id: str):
        scan = require_scan(scan_id)
        if segmenter is None:
            raise ApiError(503, "no_segmenter", "no segmenter checkpoint is loaded")
        image = _decode_image(scan["image"])
        prepped = prepare_image(image, segmenter.input_size)
        mask = threshold_mask(segment(segmenter, prepped))
        ok, png = cv2.imencode(".png", mask * 255)
        if not ok:
            raise ApiError(500, "mask_encode_failed", "could not encode mask PNG")
        store.set_mask(scan_id, png.tobytes())
        result = dict(scan["result"] or {})
        result.update(
            {
                "mask_ref": f"/api/v1/scans/{scan_id}/mask",
                "segmenter_digest": segmenter_digest,
            }
        )
        store.set_result(scan_id, result)
        return result

    @app.get("/api/v1/scans/{scan_id}")
    async def get_scan(scan_id: str):
        scan = require_scan(scan_id)
        return {
            "scan_id": scan["scan_id"],
            "patient_id": scan["patient_id"],
            "uploaded_at": scan["uploaded_at"],
            "result": scan["result"],
            "has_mask": scan["mask_png"] is not None,
        }

    @app.get("/api/v1/scans/{scan_id}/image")
    async def get_scan_image(scan_id: str):
        scan = require_scan(scan_id)
        return Response(content=scan["image"], media_type="image/png")

    @app.get("/api/v1/scans/{scan_id}/mask")
    async def get_scan_mask(scan_id: str):
        scan = require_scan(scan_id)
        if scan["mask_png"] is None:
            raise ApiError(404, "mask_not_found", f"scan {scan_id} has no segmentation mask")
        return Response(content=scan["mask_png"], media_type="image/png")

    @app.get("/api/v1/patients/{patient_id}/history")
    async def patient_history(patient_id: str):
        require_patient(patient_id)
        return {"patient_id": patient_id, "scans": store.history(patient_id)}

    @app.get("/api/v1/patients/{patient_id}/export")
    async def export_patient(patient_id: str):
        patient = require_patient(patient_id)
        document = {
            "patient": patient,
            "scans": store.history(patient_id),
            "format": "tumorvision-patient-export/1",
        }
        return Response(
            content=json.dumps(document, sort_keys=True, indent=2),
            media_type="application/json",
        )

    @app.get("/api/v1/tumor-info/{class_name}")
    async def get_tumor_info(class_name: str):
        try:
            cls = TumorClass.parse(class_name)
        except ValueError:
            raise ApiError(404, "unknown_class", f"unknown tumor class {class_name!r}")
        return {"class": cls.value, **tumor_info[cls.value]}

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app
