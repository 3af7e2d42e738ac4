"""Deterministic preprocessing and seeded augmentation.

Augmentation applies one shared geometric map (rotate about center, optional
horizontal flip, central zoom) to an image and its mask so the pair can never
drift apart: both are resampled bilinearly off the same inverse-affine
coordinates, and the mask is re-binarized at 0.5 afterwards.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import cv2
import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreprocessConfig:
    target_size: int = 256
    normalize_mode: str = "unit_range"

    def __post_init__(self):
        if self.target_size < 32 or self.target_size % 16 != 0:
            raise ValueError(
                f"target_size must be >= 32 and divisible by 16, got {self.target_size}"
            )
        if self.normalize_mode != "unit_range":
            raise ValueError(f"unknown normalize_mode {self.normalize_mode!r}")


@dataclass(frozen=True)
class AugmentConfig:
    rotation_max_deg: float = 15.0
    hflip_prob: float = 0.5
    zoom_range: tuple[float, float] = (0.9, 1.1)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rotation_max_deg <= 180.0:
            raise ValueError("rotation_max_deg must be in [0, 180]")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValueError("hflip_prob must be in [0, 1]")
        low, high = self.zoom_range
        if not 0.0 < low <= 1.0 <= high:
            raise ValueError("zoom_range must satisfy 0 < low <= 1 <= high")


@dataclass(frozen=True)
class AugmentDraw:
    angle_deg: float
    do_hflip: bool
    zoom: float


def resize(image: np.ndarray, target_size: int, is_mask: bool = False) -> np.ndarray:
    """Square resize: bilinear for images, nearest-neighbor for masks."""
    if target_size <= 0:
        raise ValueError(f"target_size must be positive, got {target_size}")
    if image.size == 0:
        raise ValueError("cannot resize an empty image")
    if image.shape[0] == target_size and image.shape[1] == target_size:
        return image.copy()
    interp = cv2.INTER_NEAREST if is_mask else cv2.INTER_LINEAR
    return cv2.resize(image, (target_size, target_size), interpolation=interp)


def normalize(image: np.ndarray, max_rep: float = 255.0) -> np.ndarray:
    """Scale intensities to [0, 1] by the source max-representable value."""
    out = np.asarray(image, dtype=np.float32)
    if (out < 0).any():
        logger.warning("negative intensities clamped to 0 during normalization")
        out = np.clip(out, 0, None)
    return out / np.float32(max_rep)


def draw_augment(config: AugmentConfig, rng: np.random.Generator) -> AugmentDraw:
    """Sample one transform: uniform angle, Bernoulli flip, uniform zoom."""
    angle = rng.uniform(-config.rotation_max_deg, config.rotation_max_deg)
    do_hflip = bool(rng.random() < config.hflip_prob)
    zoom = rng.uniform(config.zoom_range[0], config.zoom_range[1])
    return AugmentDraw(angle_deg=float(angle), do_hflip=do_hflip, zoom=float(zoom))


def _inverse_affine(draw: AugmentDraw, h: int, w: int) -> np.ndarray:
    """2x3 map from output pixel coords back to input coords.

    Forward order is rotate -> flip -> zoom, all about the image center with
    zero fill; the inverse composes in reverse.
    """
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    theta = math.radians(draw.angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    # rotation inverse: rotate by -theta
    rot = np.array([[cos_t, sin_t], [-sin_t, cos_t]])
    flip = np.array([[1.0, 0.0], [0.0, -1.0 if draw.do_hflip else 1.0]])
    scale = np.eye(2) / draw.zoom

    m = rot @ flip @ scale  # applied to centered (y, x) output coords
    return np.hstack([m, np.array([[cy], [cx]]) - m @ np.array([[cy], [cx]])])


def _sample_bilinear(image: np.ndarray, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    """Gather at fractional (yy, xx) with zero fill outside the grid."""
    h, w = image.shape[:2]
    y0 = np.floor(yy).astype(np.int64)
    x0 = np.floor(xx).astype(np.int64)
    fy = (yy - y0).astype(np.float32)
    fx = (xx - x0).astype(np.float32)

    def tap(iy, ix):
        valid = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
        iy_c = np.clip(iy, 0, h - 1)
        ix_c = np.clip(ix, 0, w - 1)
        values = image[iy_c, ix_c].astype(np.float32)
        if image.ndim == 3:
            return values * valid[..., None]
        return values * valid

    w00 = (1 - fy) * (1 - fx)
    w01 = (1 - fy) * fx
    w10 = fy * (1 - fx)
    w11 = fy * fx
    if image.ndim == 3:
        w00, w01, w10, w11 = (w[..., None] for w in (w00, w01, w10, w11))
    return (
        tap(y0, x0) * w00
        + tap(y0, x0 + 1) * w01
        + tap(y0 + 1, x0) * w10
        + tap(y0 + 1, x0 + 1) * w11
    )


def apply_augment(
    image: np.ndarray, mask: np.ndarray | None, draw: AugmentDraw
) -> tuple[np.ndarray, np.ndarray | None]:
    """Resample image (and mask, off the same map) through one affine transform."""
    if mask is not None and mask.shape[:2] != image.shape[:2]:
        raise ValueError(
            f"mask shape {mask.shape[:2]} does not match image shape {image.shape[:2]}"
        )
    h, w = image.shape[:2]
    if draw.angle_deg == 0.0 and not draw.do_hflip and draw.zoom == 1.0:
        return image.copy(), None if mask is None else mask.copy()

    affine = _inverse_affine(draw, h, w)
    out_y, out_x = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    coords = np.stack([out_y.ravel(), out_x.ravel()]).astype(np.float64)
    src = affine[:, :2] @ coords + affine[:, 2:]
    yy = src[0].reshape(h, w)
    xx = src[1].reshape(h, w)

    out_image = _sample_bilinear(image, yy, xx).astype(np.float32)
    out_mask = None
    if mask is not None:
        out_mask = (
            _sample_bilinear(mask.astype(np.float32), yy, xx) >= 0.5
        ).astype(mask.dtype)
    return out_image, out_mask


def preprocess_image(
    image: np.ndarray, config: PreprocessConfig, max_rep: float = 255.0
) -> np.ndarray:
    """Resize to the configured square size and normalize to [0, 1]."""
    return normalize(resize(image, config.target_size), max_rep)
