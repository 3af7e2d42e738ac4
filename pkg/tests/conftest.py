import numpy as np
import pytest

from tumorvision.data import ScanRecord, TumorClass, load_dataset, load_mask_subset
from tumorvision.fixtures import generate_fixture_dataset


@pytest.fixture(scope="session")
def fixture_root(tmp_path_factory):
    return generate_fixture_dataset(tmp_path_factory.mktemp("dataset"))


@pytest.fixture(scope="session")
def fixture_records(fixture_root):
    return load_dataset(fixture_root)


@pytest.fixture(scope="session")
def fixture_masked(fixture_root, fixture_records):
    return load_mask_subset(fixture_root, fixture_records)


def make_records(n: int, size: int = 4) -> list[ScanRecord]:
    """Lightweight labeled records for split/selection tests."""
    classes = list(TumorClass)
    return [
        ScanRecord(
            id=f"rec_{i:05d}",
            image=np.zeros((size, size), dtype=np.uint8),
            label=classes[i % 4],
            mask=None,
            source_path=f"rec_{i:05d}.png",
        )
        for i in range(n)
    ]
