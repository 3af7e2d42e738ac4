"""Dataset ingestion and deterministic train/val/test splitting.

Expected layout::

    <root>/<class_name>/<image>.{png,jpg,jpeg}
    <root>/masks/<same stem>.png        # optional, 8-bit, nonzero = tumor

with class_name one of glioma, meningioma, pituitary, no_tumor.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}


class DataError(Exception):
    """A dataset violates its layout or labeling contract."""


class TumorClass(enum.Enum):
    GLIOMA = "glioma"
    MENINGIOMA = "meningioma"
    PITUITARY = "pituitary"
    NO_TUMOR = "no_tumor"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "TumorClass":
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(f"unknown tumor class {name!r}")


# Fixed output ordering of every classifier head.
CLASS_ORDER = [
    TumorClass.GLIOMA,
    TumorClass.MENINGIOMA,
    TumorClass.PITUITARY,
    TumorClass.NO_TUMOR,
]


@dataclass
class ScanRecord:
    id: str
    image: np.ndarray  # H x W or H x W x 3, source bit range
    label: TumorClass | None
    mask: np.ndarray | None  # H x W binary, or None
    source_path: str

    def __post_init__(self):
        if self.mask is not None and self.mask.shape[:2] != self.image.shape[:2]:
            raise ValueError(
                f"mask shape {self.mask.shape[:2]} does not match image "
                f"shape {self.image.shape[:2]} for record {self.id}"
            )


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.8
    val_frac: float = 0.1
    test_frac: float = 0.1
    seed: int = 0

    def __post_init__(self):
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {total}, expected 1")
        for frac in (self.train_frac, self.val_frac, self.test_frac):
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"fraction {frac} outside [0, 1]")


@dataclass
class DatasetSplit:
    train: list[str]
    val: list[str]
    test: list[str]


@dataclass
class IngestResult:
    records: list[ScanRecord]
    skipped: int = 0
    per_class: dict[str, int] = field(default_factory=dict)


def _record_id(root: Path, path: Path) -> str:
    return str(path.relative_to(root)).replace("/", "__").replace("\\", "__")


def ingest_dataset(root: str | Path) -> IngestResult:
    """Walk the class folders under root, returning records plus a skip count."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} does not exist or is not a directory")

    paths = []
    for class_dir in sorted(root.iterdir()):
        if not class_dir.is_dir() or class_dir.name == "masks":
            continue
        try:
            label = TumorClass.parse(class_dir.name)
        except ValueError:
            logger.warning("ignoring non-class directory %s", class_dir)
            continue
        for path in sorted(class_dir.iterdir()):
            if path.suffix.lower() in IMAGE_EXTENSIONS:
                paths.append((label, path))

    paths.sort(key=lambda item: str(item[1]))

    result = IngestResult(records=[])
    for label, path in paths:
        image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if image is None:
            logger.warning("skipping unreadable image %s", path)
            result.skipped += 1
            continue
        if image.ndim == 3:
            image = cv2.cvtColor(image, cv2.COLOR_BGR2RGB)
        result.records.append(
            ScanRecord(
                id=_record_id(root, path),
                image=image,
                label=label,
                mask=None,
                source_path=str(path),
            )
        )
        result.per_class[label.value] = result.per_class.get(label.value, 0) + 1

    seen = set()
    for record in result.records:
        if record.id in seen:
            raise DataError(f"duplicate record id {record.id}")
        seen.add(record.id)
    return result


def load_dataset(root: str | Path) -> list[ScanRecord]:
    """One ScanRecord per readable image, sorted by source path."""
    return ingest_dataset(root).records


def load_mask_subset(root: str | Path, records: list[ScanRecord]) -> list[ScanRecord]:
    """Attach masks paired by file stem; keep only tumor-labeled records with a valid mask."""
    mask_dir = Path(root) / "masks"
    subset = []
    for record in records:
        if record.label is None or record.label is TumorClass.NO_TUMOR:
            continue
        mask_path = mask_dir / (Path(record.source_path).stem + ".png")
        if not mask_path.is_file():
            continue
        mask = cv2.imread(str(mask_path), cv2.IMREAD_GRAYSCALE)
        if mask is None:
            logger.warning("skipping unreadable mask %s", mask_path)
            continue
        if mask.shape[:2] != record.image.shape[:2]:
            logger.warning(
                "mask %s has shape %s but image has %s; record %s excluded",
                mask_path,
                mask.shape[:2],
                record.image.shape[:2],
                record.id,
            )
            continue
        binary = (mask != 0).astype(np.uint8)
        subset.append(
            ScanRecord(
                id=record.id,
                image=record.image,
                label=record.label,
                mask=binary,
                source_path=record.source_path,
            )
        )
    return subset


def split_dataset(records: list[ScanRecord], spec: SplitSpec) -> DatasetSplit:
    """Seed-deterministic shuffle then floor-rule partition of record ids."""
    if not records:
        raise ValueError("cannot split an empty record list")
    ids = sorted(record.id for record in records)
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]

    n = len(ids)
    n_train = int(np.floor(spec.train_frac * n))
    n_val = int(np.floor(spec.val_frac * n))
    return DatasetSplit(
        train=shuffled[:n_train],
        val=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
    )
