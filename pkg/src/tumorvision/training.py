"""Training, evaluation, checkpointing, and model selection.

Training is a pure function of (initial parameters, split, config): shuffling
and augmentation draws come from one explicit generator seeded by the config,
so identical inputs reproduce identical histories and parameters.
"""

from __future__ import annotations

import copy
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import unet as unet_mod
from .classifiers import NUM_CLASSES, ClassifierModel, classify, predict_class
from .classifiers import model_from_arch as classifier_from_arch
from .data import CLASS_ORDER, DatasetSplit, ScanRecord
from .preprocess import AugmentConfig, apply_augment, draw_augment, normalize, resize
from .unet import SegModel, dice, segment, soft_dice_loss, threshold_mask


class DataError(Exception):
    """Training data violates a precondition (missing label or mask)."""


class CheckpointError(Exception):
    """A checkpoint file is corrupt, version-mismatched, or inconsistent."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    augment: AugmentConfig | None = None
    early_stop_patience: int | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_metric: float
    val_loss: float | None
    val_metric: float | None


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_metric,val_loss,val_metric"]
        for r in self.records:
            val_loss = "" if r.val_loss is None else f"{r.val_loss:.6f}"
            val_metric = "" if r.val_metric is None else f"{r.val_metric:.6f}"
            lines.append(
                f"{r.epoch},{r.train_loss:.6f},{r.train_metric:.6f},{val_loss},{val_metric}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class MetricsReport:
    split_name: str
    n_samples: int
    accuracy: float | None = None
    mean_dice: float | None = None
    confusion: np.ndarray | None = None  # 4x4, rows = true class, cols = predicted

    def __post_init__(self):
        if self.confusion is not None:
            total = int(self.confusion.sum())
            if total != self.n_samples:
                raise ValueError("confusion entries must sum to n_samples")
            trace_acc = float(np.trace(self.confusion)) / self.n_samples
            if abs(trace_acc - self.accuracy) > 1e-9:
                raise ValueError("accuracy must equal trace(confusion)/n_samples")

    @property
    def metric(self) -> float:
        return self.accuracy if self.accuracy is not None else self.mean_dice

    def to_dict(self, config_digest: str | None = None) -> dict:
        doc = {"split": self.split_name}
        if self.accuracy is not None:
            doc["accuracy"] = self.accuracy
        if self.mean_dice is not None:
            doc["mean_dice"] = self.mean_dice
        if self.confusion is not None:
            doc["confusion"] = self.confusion.astype(int).tolist()
        doc["n_samples"] = self.n_samples
        if config_digest is not None:
            doc["config_digest"] = config_digest
        return doc


def _source_max(image: np.ndarray) -> float:
    if image.dtype == np.uint16:
        return 65535.0
    if np.issubdtype(image.dtype, np.floating):
        return 1.0
    return 255.0


def prepare_image(image: np.ndarray, size: int) -> np.ndarray:
    """Resize to the model's square input and normalize to [0, 1]."""
    return normalize(resize(image, size), _source_max(image))


def prepare_mask(mask: np.ndarray, size: int) -> np.ndarray:
    return resize(mask, size, is_mask=True).astype(np.float32)


def _as_record_map(data) -> dict[str, ScanRecord]:
    if isinstance(data, dict):
        return data
    return {record.id: record for record in data}


def _gray(image: np.ndarray) -> np.ndarray:
    return image.mean(axis=2) if image.ndim == 3 else image


def train_classifier(
    model: ClassifierModel,
    split: DatasetSplit,
    data,
    config: TrainConfig,
) -> tuple[ClassifierModel, TrainHistory]:
    records = _as_record_map(data)
    class_index = {c: i for i, c in enumerate(CLASS_ORDER)}
    for rid in split.train:
        if records[rid].label is None:
            raise DataError(f"record {rid} in the training split has no label")

    net = copy.deepcopy(model.net)
    trained = ClassifierModel(
        arch=dict(model.arch), net=net, input_size=model.input_size,
        class_order=list(model.class_order),
    )
    history = TrainHistory()
    if config.epochs == 0:
        return trained, history

    size = model.input_size
    rng = np.random.default_rng(config.seed)
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()

    prepped = {rid: _gray(prepare_image(records[rid].image, size)) for rid in split.train}
    val_ids = [rid for rid in split.val if records[rid].label is not None]

    best_metric = -np.inf
    best_state = None
    stale = 0

    for epoch in range(config.epochs):
        order = rng.permutation(len(split.train))
        epoch_loss = 0.0
        correct = 0
        net.train()
        for start in range(0, len(order), config.batch_size):
            batch_ids = [split.train[i] for i in order[start : start + config.batch_size]]
            images, labels = [], []
            for rid in batch_ids:
                img = prepped[rid]
                if config.augment is not None:
                    draw = draw_augment(config.augment, rng)
                    img, _ = apply_augment(img, None, draw)
                images.append(img)
                labels.append(class_index[records[rid].label])
            x = torch.from_numpy(np.stack(images).astype(np.float32)).unsqueeze(1)
            y = torch.tensor(labels, dtype=torch.long)
            optimizer.zero_grad()
            logits = net(x)
            loss = loss_fn(logits, y)
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(batch_ids)
            correct += int((logits.argmax(dim=1) == y).sum())

        net.eval()
        train_loss = epoch_loss / len(split.train)
        train_acc = correct / len(split.train)
        val_loss = val_acc = None
        if val_ids:
            val_loss, val_acc = _classifier_val(net, records, val_ids, size, loss_fn)
        history.records.append(EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc))

        monitor = val_acc if val_acc is not None else train_acc
        if monitor > best_metric:
            best_metric = monitor
            best_state = copy.deepcopy(net.state_dict())
            stale = 0
        else:
            stale += 1
            if config.early_stop_patience is not None and stale >= config.early_stop_patience:
                break

    if config.early_stop_patience is not None and best_state is not None:
        net.load_state_dict(best_state)
    net.eval()
    return trained, history


def _classifier_val(net, records, val_ids, size, loss_fn):
    images = np.stack([_gray(prepare_image(records[r].image, size)) for r in val_ids])
    labels = [CLASS_ORDER.index(records[r].label) for r in val_ids]
    with torch.no_grad():
        x = torch.from_numpy(images.astype(np.float32)).unsqueeze(1)
        y = torch.tensor(labels, dtype=torch.long)
        logits = net(x)
        loss = float(loss_fn(logits, y))
        acc = float((logits.argmax(dim=1) == y).float().mean())
    return loss, acc


def evaluate_classifier(model: ClassifierModel, records: list[ScanRecord]) -> MetricsReport:
    """Accuracy plus a 4x4 confusion matrix (rows true, cols predicted)."""
    if not records:
        raise ValueError("cannot evaluate on an empty record set")
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for record in records:
        if record.label is None:
            raise DataError(f"record {record.id} has no label")
        probs = classify(model, _gray(prepare_image(record.image, model.input_size)))
        predicted, _ = predict_class(probs)
        confusion[CLASS_ORDER.index(record.label), CLASS_ORDER.index(predicted)] += 1
    accuracy = float(np.trace(confusion)) / len(records)
    return MetricsReport(
        split_name="eval", n_samples=len(records), accuracy=accuracy, confusion=confusion
    )


def train_segmenter(
    model: SegModel,
    records: list[ScanRecord],
    config: TrainConfig,
) -> tuple[SegModel, TrainHistory]:
    for record in records:
        if record.mask is None:
            raise DataError(f"record {record.id} has no mask")

    net = copy.deepcopy(model.net)
    trained = SegModel(arch=dict(model.arch), net=net, input_size=model.input_size)
    history = TrainHistory()
    if config.epochs == 0:
        return trained, history

    size = model.input_size
    rng = np.random.default_rng(config.seed)
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)

    prepped = [
        (_gray(prepare_image(r.image, size)), prepare_mask(r.mask, size)) for r in records
    ]

    best_metric = -np.inf
    best_state = None
    stale = 0

    for epoch in range(config.epochs):
        order = rng.permutation(len(prepped))
        epoch_loss = 0.0
        dices = []
        net.train()
        for start in range(0, len(order), config.batch_size):
            batch = [prepped[i] for i in order[start : start + config.batch_size]]
            images, masks = [], []
            for img, msk in batch:
                if config.augment is not None:
                    draw = draw_augment(config.augment, rng)
                    img, msk = apply_augment(img, msk, draw)
                images.append(img)
                masks.append(msk.astype(np.float32))
            x = torch.from_numpy(np.stack(images).astype(np.float32)).unsqueeze(1)
            y = torch.from_numpy(np.stack(masks)).unsqueeze(1)
            optimizer.zero_grad()
            prob = torch.sigmoid(net(x))
            loss = soft_dice_loss(prob, y)
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(batch)
            with torch.no_grad():
                hard = (prob >= 0.5).numpy().astype(np.uint8)
                for i in range(len(batch)):
                    dices.append(dice(hard[i, 0], masks[i] >= 0.5))

        net.eval()
        train_loss = epoch_loss / len(prepped)
        train_dice = float(np.mean(dices))
        history.records.append(EpochRecord(epoch, train_loss, train_dice, None, None))

        if train_dice > best_metric:
            best_metric = train_dice
            best_state = copy.deepcopy(net.state_dict())
            stale = 0
        else:
            stale += 1
            if config.early_stop_patience is not None and stale >= config.early_stop_patience:
                break

    if config.early_stop_patience is not None and best_state is not None:
        net.load_state_dict(best_state)
    net.eval()
    return trained, history


def evaluate_segmenter(model: SegModel, records: list[ScanRecord]) -> MetricsReport:
    """Mean Dice of thresholded predictions against ground-truth masks."""
    if not records:
        raise ValueError("cannot evaluate on an empty record set")
    scores = []
    for record in records:
        if record.mask is None:
            raise DataError(f"record {record.id} has no mask")
        prob = segment(model, _gray(prepare_image(record.image, model.input_size)))
        pred = threshold_mask(prob)
        truth = prepare_mask(record.mask, model.input_size) >= 0.5
        scores.append(dice(pred, truth))
    return MetricsReport(
        split_name="eval", n_samples=len(records), mean_dice=float(np.mean(scores))
    )


# ---------------------------------------------------------------------------
# Checkpoints: magic + version + JSON header + little-endian tensor payloads.
# ---------------------------------------------------------------------------

CKPT_MAGIC = b"TVCK"
CKPT_VERSION = 1


@dataclass
class Checkpoint:
    kind: str  # "classifier" | "segmenter"
    arch: dict
    params: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)


def checkpoint_from_model(model: ClassifierModel | SegModel, meta: dict | None = None) -> Checkpoint:
    kind = "segmenter" if isinstance(model, SegModel) else "classifier"
    params = {
        name: tensor.detach().cpu().numpy().copy()
        for name, tensor in model.net.state_dict().items()
    }
    return Checkpoint(kind=kind, arch=dict(model.arch), params=params, meta=dict(meta or {}))


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    entries = []
    payload = bytearray()
    for name, array in ckpt.params.items():
        arr = np.ascontiguousarray(array)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = le.tobytes()
        entries.append(
            {"name": name, "dtype": arr.dtype.name, "shape": list(arr.shape), "nbytes": len(raw)}
        )
        payload.extend(raw)
    header = json.dumps(
        {"kind": ckpt.kind, "arch": ckpt.arch, "meta": ckpt.meta, "tensors": entries},
        sort_keys=True,
    ).encode()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<IQ", CKPT_VERSION, len(header)))
        fh.write(header)
        fh.write(payload)
    tmp.replace(path)


def load_checkpoint(path: str | Path, expect_arch: dict | None = None) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < 16 or blob[:4] != CKPT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic bytes)")
    version, header_len = struct.unpack("<IQ", blob[4:16])
    if version != CKPT_VERSION:
        raise CheckpointError(
            f"{path} has format version {version}, this build reads version {CKPT_VERSION}"
        )
    try:
        header = json.loads(blob[16 : 16 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has a corrupt header: {exc}") from exc

    params = {}
    offset = 16 + header_len
    for entry in header["tensors"]:
        raw = blob[offset : offset + entry["nbytes"]]
        if len(raw) != entry["nbytes"]:
            raise CheckpointError(f"{path} is truncated at tensor {entry['name']}")
        dtype = np.dtype(entry["dtype"]).newbyteorder("<")
        params[entry["name"]] = (
            np.frombuffer(raw, dtype=dtype).reshape(entry["shape"]).astype(entry["dtype"])
        )
        offset += entry["nbytes"]

    ckpt = Checkpoint(kind=header["kind"], arch=header["arch"], params=params, meta=header["meta"])
    if expect_arch is not None and ckpt.arch != expect_arch:
        raise CheckpointError(
            f"checkpoint arch {ckpt.arch} does not match expected arch {expect_arch}"
        )
    return ckpt


def restore_model(ckpt: Checkpoint) -> ClassifierModel | SegModel:
    """Rebuild the architecture from its descriptor and load the saved parameters."""
    if ckpt.kind == "classifier":
        model = classifier_from_arch(ckpt.arch)
    elif ckpt.kind == "segmenter":
        model = unet_mod.model_from_arch(ckpt.arch)
    else:
        raise CheckpointError(f"unknown checkpoint kind {ckpt.kind!r}")
    state = {name: torch.from_numpy(arr.copy()) for name, arr in ckpt.params.items()}
    try:
        model.net.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"parameters do not fit arch {ckpt.arch}: {exc}") from exc
    model.net.eval()
    return model


def checkpoint_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]


def select_best(candidates: list[tuple[object, MetricsReport]]):
    """Highest validation metric wins; ties keep the earliest candidate."""
    if not candidates:
        raise ValueError("no candidates to select from")
    best_model, best_report = candidates[0]
    for model, report in candidates[1:]:
        if report.metric > best_report.metric:
            best_model, best_report = model, report
    return best_model
