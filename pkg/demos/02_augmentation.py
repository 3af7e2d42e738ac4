"""Seeded augmentation: rotation, flip, and zoom applied jointly to an image
and its mask through one shared geometric map."""

import numpy as np

from tumorvision import AugmentConfig, apply_augment, draw_augment, normalize, resize

size = 64
yy, xx = np.mgrid[:size, :size]
mask = (((yy - 28) ** 2 + (xx - 36) ** 2) <= 100).astype(np.uint8)
image = normalize((mask * 200 + 30).astype(np.uint8))

config = AugmentConfig(rotation_max_deg=20, hflip_prob=0.5, zoom_range=(0.9, 1.1), seed=0)
rng = np.random.default_rng(config.seed)

for i in range(3):
    draw = draw_augment(config, rng)
    out_image, out_mask = apply_augment(image, mask, draw)
    print(f"draw {i}: angle={draw.angle_deg:+6.2f} deg, hflip={draw.do_hflip}, "
          f"zoom={draw.zoom:.3f} -> mask pixels {int(mask.sum())} -> {int(out_mask.sum())}")
    assert out_image.shape == image.shape and out_mask.shape == mask.shape

resized = resize((image * 255).astype(np.uint8), 256)
print(f"resize: {image.shape} -> {resized.shape}")
print("mask stays binary after augmentation:", sorted(np.unique(out_mask)))
