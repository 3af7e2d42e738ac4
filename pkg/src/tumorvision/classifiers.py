"""Classifier architectures: a plain CNN baseline and a compound-scaled family.

The scaled family follows the depth/width/resolution recipe: a base network is
grown by alpha^phi, beta^phi, gamma^phi under the constraint
alpha * beta^2 * gamma^2 ~= 2, and built from inverted-residual blocks with
depthwise convolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import CLASS_ORDER, TumorClass

NUM_CLASSES = 4


class ConfigError(Exception):
    """A model configuration cannot produce a valid network."""


@dataclass(frozen=True)
class CnnConfig:
    conv_blocks: tuple[tuple[int, int, bool], ...] = ((16, 3, True), (32, 3, True), (64, 3, True))
    fc_width: int = 128
    num_classes: int = NUM_CLASSES
    input_size: int = 64

    def __post_init__(self):
        if not self.conv_blocks:
            raise ValueError("at least one conv block is required")
        for filters, kernel, _pool in self.conv_blocks:
            if filters <= 0 or kernel <= 0:
                raise ValueError("filters and kernel must be positive")
        if self.fc_width <= 0:
            raise ValueError("fc_width must be positive")
        if self.num_classes != NUM_CLASSES:
            raise ValueError(f"num_classes must be {NUM_CLASSES}")


@dataclass(frozen=True)
class CompoundScaleConfig:
    phi: float = 0.0
    alpha: float = 1.2
    beta: float = 1.1
    gamma: float = 1.15
    base_depth: int = 7
    base_width: int = 16
    base_resolution: int = 224

    def __post_init__(self):
        product = self.alpha * self.beta**2 * self.gamma**2
        if not 1.9 <= product <= 2.1:
            raise ValueError(
                f"alpha * beta^2 * gamma^2 = {product:.4f} outside [1.9, 2.1]"
            )
        if self.phi < 0:
            raise ValueError("phi must be nonnegative")


@dataclass(frozen=True)
class ScaledDims:
    depth: int
    width: int
    resolution: int

    def __post_init__(self):
        if self.depth <= 0 or self.width <= 0 or self.resolution <= 0:
            raise ValueError("depth, width, and resolution must be positive")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def compound_scale(config: CompoundScaleConfig) -> ScaledDims:
    """depth = round(d * alpha^phi), width = round(w * beta^phi),
    resolution = round(r * gamma^phi) to the nearest multiple of 16."""
    depth = _round_half_up(config.base_depth * config.alpha**config.phi)
    width = _round_half_up(config.base_width * config.beta**config.phi)
    resolution = 16 * _round_half_up(config.base_resolution * config.gamma**config.phi / 16)
    return ScaledDims(depth=depth, width=width, resolution=resolution)


@dataclass
class Probabilities:
    values: np.ndarray  # 4 reals in [0, 1], summing to 1

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (NUM_CLASSES,):
            raise ValueError(f"expected {NUM_CLASSES} probabilities")
        if (self.values < 0).any() or (self.values > 1).any():
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(float(self.values.sum()) - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {self.values.sum()}, expected 1")


@dataclass
class ClassifierModel:
    arch: dict
    net: nn.Module
    input_size: int
    class_order: list[TumorClass] = field(default_factory=lambda: list(CLASS_ORDER))


def _seeded_init(net: nn.Module, seed: int) -> None:
    """Fan-in-scaled uniform init from an explicit generator, for bit reproducibility."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in net.modules():
            if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                weight = module.weight
                fan_in = weight[0].numel()
                if isinstance(module, nn.ConvTranspose2d):
                    fan_in = weight.shape[0] * weight.shape[2] * weight.shape[3]
                bound = 1.0 / math.sqrt(max(fan_in, 1))
                weight.uniform_(-bound, bound, generator=gen)
                if module.bias is not None:
                    module.bias.uniform_(-bound, bound, generator=gen)


class _BaselineCnn(nn.Module):
    def __init__(self, config: CnnConfig):
        super().__init__()
        layers: list[nn.Module] = []
        channels = 1
        size = config.input_size
        for index, (filters, kernel, pool) in enumerate(config.conv_blocks):
            layers.append(nn.Conv2d(channels, filters, kernel, padding=kernel // 2))
            layers.append(nn.ReLU(inplace=True))
            channels = filters
            if pool:
                size //= 2
                if size < 1:
                    raise ConfigError(
                        f"conv block {index} pools the spatial size below 1x1 "
                        f"for input_size={config.input_size}"
                    )
                layers.append(nn.MaxPool2d(2))
        self.features = nn.Sequential(*layers)
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(channels * size * size, config.fc_width),
            nn.ReLU(inplace=True),
            nn.Linear(config.fc_width, config.num_classes),
        )

    def forward(self, x):
        return self.classifier(self.features(x))


class _InvertedResidual(nn.Module):
    """1x1 expand -> 3x3 depthwise -> 1x1 project, with identity skip when shapes match."""

    def __init__(self, in_ch: int, out_ch: int, stride: int, expand: int = 4):
        super().__init__()
        hidden = in_ch * expand
        self.use_skip = stride == 1 and in_ch == out_ch
        self.block = nn.Sequential(
            nn.Conv2d(in_ch, hidden, 1),
            nn.SiLU(inplace=True),
            nn.Conv2d(hidden, hidden, 3, stride=stride, padding=1, groups=hidden),
            nn.SiLU(inplace=True),
            nn.Conv2d(hidden, out_ch, 1),
        )

    def forward(self, x):
        out = self.block(x)
        return x + out if self.use_skip else out


class _ScaledNet(nn.Module):
    def __init__(self, dims: ScaledDims):
        super().__init__()
        self.stem = nn.Sequential(
            nn.Conv2d(1, dims.width, 3, stride=2, padding=1),
            nn.SiLU(inplace=True),
        )
        # Downsample on early blocks until the map is small, doubling channels
        # (capped) as resolution drops.
        max_downs = max(0, int(math.log2(dims.resolution // 2 // 7)) if dims.resolution >= 28 else 0)
        blocks = []
        channels = dims.width
        for i in range(dims.depth):
            downsample = i < min(dims.depth, max_downs)
            out_ch = min(channels * 2, dims.width * 8) if downsample else channels
            blocks.append(_InvertedResidual(channels, out_ch, stride=2 if downsample else 1))
            channels = out_ch
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Sequential(
            nn.Conv2d(channels, channels * 2, 1),
            nn.SiLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(channels * 2, NUM_CLASSES),
        )

    def forward(self, x):
        return self.head(self.blocks(self.stem(x)))


def build_baseline_cnn(config: CnnConfig, seed: int = 0) -> ClassifierModel:
    net = _BaselineCnn(config)
    _seeded_init(net, seed)
    net.eval()
    return ClassifierModel(
        arch={
            "kind": "baseline_cnn",
            "conv_blocks": [list(b) for b in config.conv_blocks],
            "fc_width": config.fc_width,
            "num_classes": config.num_classes,
            "input_size": config.input_size,
            "seed": seed,
        },
        net=net,
        input_size=config.input_size,
    )


def build_scaled_classifier(dims: ScaledDims, seed: int = 0) -> ClassifierModel:
    if dims.resolution % 16 != 0:
        raise ConfigError(f"resolution {dims.resolution} is not a multiple of 16")
    net = _ScaledNet(dims)
    _seeded_init(net, seed)
    net.eval()
    return ClassifierModel(
        arch={
            "kind": "scaled",
            "depth": dims.depth,
            "width": dims.width,
            "resolution": dims.resolution,
            "seed": seed,
        },
        net=net,
        input_size=dims.resolution,
    )


def model_from_arch(arch: dict) -> ClassifierModel:
    kind = arch.get("kind")
    if kind == "baseline_cnn":
        config = CnnConfig(
            conv_blocks=tuple(tuple(b) for b in arch["conv_blocks"]),
            fc_width=arch["fc_width"],
            num_classes=arch["num_classes"],
            input_size=arch["input_size"],
        )
        return build_baseline_cnn(config, seed=arch.get("seed", 0))
    if kind == "scaled":
        dims = ScaledDims(arch["depth"], arch["width"], arch["resolution"])
        return build_scaled_classifier(dims, seed=arch.get("seed", 0))
    raise ConfigError(f"unknown classifier arch kind {kind!r}")


def to_input_tensor(image: np.ndarray) -> torch.Tensor:
    """Float [0,1] HxW or HxWxC array to a 1x1xHxW tensor (RGB averaged to gray)."""
    arr = np.asarray(image, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    return torch.from_numpy(arr).unsqueeze(0).unsqueeze(0)


def classify(model: ClassifierModel, image: np.ndarray) -> Probabilities:
    """Forward pass to a normalized-exponential distribution over the 4 classes."""
    if image.shape[0] != model.input_size or image.shape[1] != model.input_size:
        raise ValueError(
            f"expected {model.input_size}x{model.input_size} input, "
            f"got {image.shape[0]}x{image.shape[1]}"
        )
    with torch.no_grad():
        logits = model.net(to_input_tensor(image))
        probs = torch.softmax(logits.double(), dim=1).squeeze(0).numpy()
    # guard against double rounding drifting the sum off 1
    return Probabilities(probs / probs.sum())


def predict_class(p: Probabilities) -> tuple[TumorClass, float]:
    """Argmax over the fixed class order; ties break to the lowest index."""
    index = int(np.argmax(p.values))
    return CLASS_ORDER[index], float(p.values[index])
