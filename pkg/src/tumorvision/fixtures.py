"""Synthetic fixture dataset: 32 labeled images plus 8 paired tumor masks.

The real Kaggle MRI dataset cannot be redistributed, so tests and demos run on
small generated scans: an elliptical "brain" on black background with a
class-specific geometric lesion (blob, ring, or small disk). Generation is
seed-deterministic so fixture-trained runs reproduce exactly.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .data import TumorClass

FIXTURE_SIZE = 64
PER_CLASS = 8
MASKED_PER_CLASS = {TumorClass.GLIOMA: 3, TumorClass.MENINGIOMA: 3, TumorClass.PITUITARY: 2}


def _brain_background(rng: np.random.Generator, size: int) -> np.ndarray:
    image = np.zeros((size, size), dtype=np.float32)
    center = (size // 2, size // 2)
    axes = (int(size * 0.42), int(size * 0.36))
    cv2.ellipse(image, center, axes, 0, 0, 360, 110.0, -1)
    image += rng.normal(0, 6, image.shape).astype(np.float32)
    return image


def _lesion(rng: np.random.Generator, label: TumorClass, size: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=np.uint8)
    jitter = lambda lo, hi: int(rng.integers(lo, hi))
    if label is TumorClass.GLIOMA:
        # irregular blob, upper-left quadrant
        cx, cy = jitter(18, 26), jitter(18, 26)
        for _ in range(4):
            cv2.circle(mask, (cx + jitter(-4, 5), cy + jitter(-4, 5)), jitter(4, 8), 1, -1)
    elif label is TumorClass.MENINGIOMA:
        # ring near the top-right rim
        cx, cy = jitter(40, 48), jitter(18, 26)
        cv2.circle(mask, (cx, cy), jitter(7, 10), 1, 2)
    elif label is TumorClass.PITUITARY:
        # small bright disk, bottom center
        cx, cy = jitter(28, 36), jitter(44, 52)
        cv2.circle(mask, (cx, cy), jitter(3, 6), 1, -1)
    return mask


def generate_fixture_dataset(
    root: str | Path,
    per_class: int = PER_CLASS,
    size: int = FIXTURE_SIZE,
    seed: int = 7,
) -> Path:
    """Write the fixture tree under root and return it."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    mask_dir = root / "masks"
    mask_dir.mkdir(parents=True, exist_ok=True)

    for label in TumorClass:
        class_dir = root / label.value
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            image = _brain_background(rng, size)
            mask = _lesion(rng, label, size)
            image[mask == 1] = 230.0 + rng.normal(0, 3)
            image = np.clip(image, 0, 255).astype(np.uint8)
            stem = f"{label.value}_{i:02d}"
            cv2.imwrite(str(class_dir / f"{stem}.png"), image)
            if i < MASKED_PER_CLASS.get(label, 0):
                cv2.imwrite(str(mask_dir / f"{stem}.png"), mask * 255)
    return root
