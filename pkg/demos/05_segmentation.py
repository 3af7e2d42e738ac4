"""Train the U-Net on the 8-mask fixture subset and report mean Dice."""

import tempfile

from tumorvision import (
    TrainConfig,
    UNetConfig,
    build_unet,
    evaluate_segmenter,
    load_dataset,
    load_mask_subset,
    train_segmenter,
)
from tumorvision.fixtures import generate_fixture_dataset

root = generate_fixture_dataset(tempfile.mkdtemp(prefix="tv_demo_"))
records = load_dataset(root)
masked = load_mask_subset(root, records)
print(f"{len(masked)} tumor records with masks")

model = build_unet(UNetConfig(levels=3, base_filters=8, input_size=64), seed=0)
config = TrainConfig(epochs=150, batch_size=4, learning_rate=1e-3, seed=0)
trained, history = train_segmenter(model, masked, config)
print(f"final train mean Dice: {history.records[-1].train_metric:.3f}")

report = evaluate_segmenter(trained, masked)
print(f"evaluation mean Dice: {report.mean_dice:.3f} over {report.n_samples} masks")
