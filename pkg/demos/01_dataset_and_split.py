"""Generate the synthetic fixture dataset, load it, and split it 80/10/10.

The split is a pure function of (sorted record ids, spec): rerunning with the
same seed reproduces it exactly.
"""

import tempfile

from tumorvision import SplitSpec, load_dataset, load_mask_subset, split_dataset
from tumorvision.fixtures import generate_fixture_dataset

root = generate_fixture_dataset(tempfile.mkdtemp(prefix="tv_demo_"))
print(f"dataset written to {root}")

records = load_dataset(root)
print(f"{len(records)} records loaded")
for record in records[:3]:
    print(f"  {record.id}: label={record.label}, shape={record.image.shape}")

masked = load_mask_subset(root, records)
print(f"{len(masked)} records carry segmentation masks")

spec = SplitSpec(train_frac=0.8, val_frac=0.1, test_frac=0.1, seed=42)
split = split_dataset(records, spec)
print(f"split sizes: train={len(split.train)} val={len(split.val)} test={len(split.test)}")
assert split == split_dataset(records, spec), "splits are seed-deterministic"
print("re-splitting with the same seed reproduced the partition exactly")
