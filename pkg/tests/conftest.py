import os
from pathlib import Path

import numpy as np
import pytest

from weightscope import kernels
from weightscope.dataset import load_idx_file

MNIST_DIR = Path(os.environ.get("WEIGHTSCOPE_MNIST_DIR", "/root/data/mnist"))
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def mnist_path(key):
    base = MNIST_DIR / MNIST_FILES[key]
    for candidate in (base, base.with_name(base.name + ".gz")):
        if candidate.exists():
            return candidate
    return None


@pytest.fixture(scope="session")
def mnist():
    paths = {k: mnist_path(k) for k in MNIST_FILES}
    if any(p is None for p in paths.values()):
        pytest.skip(f"MNIST IDX files not found under {MNIST_DIR} (set WEIGHTSCOPE_MNIST_DIR)")
    train = (load_idx_file(paths["train_images"], "images"),
             load_idx_file(paths["train_labels"], "labels", 10))
    test = (load_idx_file(paths["test_images"], "images"),
            load_idx_file(paths["test_labels"], "labels", 10))
    return train, test


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return kernels.backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
