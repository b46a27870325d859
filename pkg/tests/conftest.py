import os

import numpy as np
import pytest

from radseg.store import Dataset, write_dataset
from radseg.synthesis import GenerationConfig, generate

SMALL = GenerationConfig(n_samples=2048, toa_us=(0.0, 200.0), pri_us=(120.0, 400.0), global_seed=11)


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RADSEG_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow benchmark; set RADSEG_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def small_config():
    return SMALL


@pytest.fixture
def small_dataset(tmp_path):
    write_dataset(generate(SMALL, 6), tmp_path / "train", SMALL, "train", compute_stats=True)
    return Dataset(tmp_path / "train")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
