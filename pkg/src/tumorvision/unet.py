"""U-Net segmenter: contracting and expansive paths joined by skip connections.

Downsampling is by max pooling, upsampling by transposed convolutions, and each
decoder stage concatenates the same-level encoder features before convolving.
The head is a single-channel sigmoid, so outputs are per-pixel tumor
probabilities at the input resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .classifiers import ConfigError, _seeded_init, to_input_tensor

DICE_EPS = 1e-7


@dataclass(frozen=True)
class UNetConfig:
    levels: int = 4
    base_filters: int = 16
    input_size: int = 256

    def __post_init__(self):
        if self.levels < 1 or self.base_filters < 1:
            raise ValueError("levels and base_filters must be >= 1")
        if self.input_size % (2**self.levels) != 0:
            raise ConfigError(
                f"input_size {self.input_size} is not divisible by 2^{self.levels}"
            )


def _double_conv(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class _UNet(nn.Module):
    def __init__(self, config: UNetConfig):
        super().__init__()
        self.levels = config.levels
        filters = [config.base_filters * 2**i for i in range(config.levels + 1)]

        self.down = nn.ModuleList()
        in_ch = 1
        for f in filters[:-1]:
            self.down.append(_double_conv(in_ch, f))
            in_ch = f
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _double_conv(filters[-2], filters[-1])

        self.up = nn.ModuleList()
        self.decode = nn.ModuleList()
        for f_coarse, f_fine in zip(filters[:0:-1], filters[-2::-1]):
            self.up.append(nn.ConvTranspose2d(f_coarse, f_fine, 2, stride=2))
            self.decode.append(_double_conv(f_fine * 2, f_fine))
        self.head = nn.Conv2d(filters[0], 1, 1)

    def forward(self, x, drop_skip: int | None = None):
        # drop_skip zeroes one encoder skip; test hook proving skips are live
        skips = []
        for stage in self.down:
            x = stage(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for i, (up, decode) in enumerate(zip(self.up, self.decode)):
            x = up(x)
            skip = skips[self.levels - 1 - i]
            if drop_skip == self.levels - 1 - i:
                skip = torch.zeros_like(skip)
            x = decode(torch.cat([skip, x], dim=1))
        return self.head(x)


@dataclass
class SegModel:
    arch: dict
    net: nn.Module
    input_size: int


def build_unet(config: UNetConfig, seed: int = 0) -> SegModel:
    net = _UNet(config)
    _seeded_init(net, seed)
    net.eval()
    return SegModel(
        arch={
            "kind": "unet",
            "levels": config.levels,
            "base_filters": config.base_filters,
            "input_size": config.input_size,
            "seed": seed,
        },
        net=net,
        input_size=config.input_size,
    )


def model_from_arch(arch: dict) -> SegModel:
    if arch.get("kind") != "unet":
        raise ConfigError(f"unknown segmenter arch kind {arch.get('kind')!r}")
    config = UNetConfig(arch["levels"], arch["base_filters"], arch["input_size"])
    return build_unet(config, seed=arch.get("seed", 0))


def segment(model: SegModel, image: np.ndarray, drop_skip: int | None = None) -> np.ndarray:
    """Tumor probability map with the same spatial dims as the input."""
    if image.shape[0] != model.input_size or image.shape[1] != model.input_size:
        raise ValueError(
            f"expected {model.input_size}x{model.input_size} input, "
            f"got {image.shape[0]}x{image.shape[1]}"
        )
    with torch.no_grad():
        logits = model.net(to_input_tensor(image), drop_skip=drop_skip)
        return torch.sigmoid(logits).squeeze(0).squeeze(0).numpy()


def threshold_mask(prob_map: np.ndarray, tau: float = 0.5) -> np.ndarray:
    """Binarize at tau; the boundary is inclusive (>= tau maps to 1)."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    return (np.asarray(prob_map) >= tau).astype(np.uint8)


def dice(pred: np.ndarray, truth: np.ndarray, eps: float = DICE_EPS) -> float:
    """Smoothed overlap score 2|A n B| / (|A| + |B|); empty vs empty scores 1."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    intersection = float(np.logical_and(pred, truth).sum())
    total = float((pred != 0).sum() + (truth != 0).sum())
    return (2.0 * intersection + eps) / (total + eps)


def soft_dice_loss(prob: torch.Tensor, truth: torch.Tensor, eps: float = 1.0) -> torch.Tensor:
    """1 - soft Dice over the batch, differentiable through the probability map."""
    prob = prob.reshape(prob.shape[0], -1)
    truth = truth.reshape(truth.shape[0], -1)
    intersection = (prob * truth).sum(dim=1)
    total = prob.sum(dim=1) + truth.sum(dim=1)
    return 1.0 - ((2.0 * intersection + eps) / (total + eps)).mean()
