"""Train the baseline CNN on the fixture dataset, evaluate it, and round-trip
the result through a checkpoint file."""

import tempfile
from pathlib import Path

from tumorvision import (
    CnnConfig,
    SplitSpec,
    TrainConfig,
    build_baseline_cnn,
    evaluate_classifier,
    load_checkpoint,
    load_dataset,
    restore_model,
    save_checkpoint,
    split_dataset,
    train_classifier,
)
from tumorvision.fixtures import generate_fixture_dataset
from tumorvision.training import checkpoint_from_model

root = generate_fixture_dataset(tempfile.mkdtemp(prefix="tv_demo_"))
records = load_dataset(root)
record_map = {r.id: r for r in records}
split = split_dataset(records, SplitSpec(seed=0))

model = build_baseline_cnn(CnnConfig(input_size=64), seed=0)
config = TrainConfig(epochs=60, batch_size=16, learning_rate=1e-3, seed=0)
trained, history = train_classifier(model, split, record_map, config)
print(f"trained {len(history)} epochs; final train accuracy "
      f"{history.records[-1].train_metric:.3f}")

for name, ids in (("train", split.train), ("val", split.val), ("test", split.test)):
    report = evaluate_classifier(trained, [record_map[i] for i in ids])
    print(f"{name}: accuracy={report.accuracy:.3f} n={report.n_samples}")

path = Path(tempfile.mkdtemp()) / "classifier.ckpt"
save_checkpoint(checkpoint_from_model(trained), path)
restored = restore_model(load_checkpoint(path))
print(f"checkpoint round trip ok: {path.stat().st_size:,} bytes")
