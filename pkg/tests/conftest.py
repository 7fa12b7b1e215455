"""Pytest configuration and fixtures for adaptive-rff tests."""

import os
from pathlib import Path

import numpy as np
import pytest
from dotenv import load_dotenv

from adaptive_rff.classify import dump_idx_images, dump_idx_labels
from adaptive_rff.models import (
    Dataset,
    FrequencySet,
    IdxImages,
    IdxLabels,
    LatticeSpec,
    SpectrumTerm,
    TargetSpec,
)
from adaptive_rff.rng import RngStream

# Load environment variables from .env file
load_dotenv()

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@pytest.fixture
def rng():
    """A seeded random stream."""
    return RngStream(20240917)


@pytest.fixture
def make_dataset():
    """Factory for small datasets with normal inputs and complex targets."""

    def factory(J: int, d: int, rng: RngStream) -> Dataset:
        inputs = rng.normal((J, d))
        targets = rng.normal(J) + 1j * rng.normal(J)
        return Dataset(inputs=inputs, targets=targets)

    return factory


@pytest.fixture
def make_instance(make_dataset):
    """Factory for (frequencies, dataset) pairs of a least-squares problem."""

    def factory(K: int, J: int, d: int, rng: RngStream, scale: float = 1.5):
        freqs = FrequencySet.continuous(scale * rng.normal((K, d)))
        return freqs, make_dataset(J, d, rng)

    return factory


@pytest.fixture
def lattice_1d():
    """Lattice of a 12-periodic target in one dimension."""
    return LatticeSpec(half_period=6.0, dimension=1)


@pytest.fixture
def cosine_target():
    """f(x) = cos(w_1 x) on the 12-periodic torus."""
    return TargetSpec(
        kind="spectrum",
        period=12.0,
        spectrum=(
            SpectrumTerm(index=(1,), re=0.5),
            SpectrumTerm(index=(-1,), re=0.5),
        ),
    )


@pytest.fixture
def digit_images():
    """Synthetic 4x4 images of four digits, each lighting its own pixel block.

    Returns (images, labels) with 40 examples per digit and mild noise.
    """
    generator = np.random.default_rng(7)
    digits = (0, 1, 2, 8)
    per_digit = 40
    pixels, labels = [], []
    for position, digit in enumerate(digits):
        base = np.zeros((4, 4))
        base[position, :] = 1.0
        for _ in range(per_digit):
            noisy = np.clip(base + 0.1 * generator.random((4, 4)), 0.0, 1.0)
            pixels.append(np.rint(noisy * 255) / 255)
            labels.append(digit)
    order = generator.permutation(len(labels))
    images = IdxImages(
        count=len(labels), rows=4, cols=4, pixels=np.array(pixels)[order]
    )
    return images, IdxLabels(count=len(labels), labels=np.array(labels)[order])


@pytest.fixture
def idx_files(tmp_path, digit_images):
    """The synthetic digit images written as IDX files."""
    images, labels = digit_images
    images_path = tmp_path / "images.idx3"
    labels_path = tmp_path / "labels.idx1"
    images_path.write_bytes(dump_idx_images(images))
    labels_path.write_bytes(dump_idx_labels(labels))
    return images_path, labels_path


@pytest.fixture
def mnist_dir():
    """Directory with the MNIST IDX files, from ARFF_MNIST_DIR."""
    directory = os.getenv("ARFF_MNIST_DIR")
    if not directory:
        pytest.skip("ARFF_MNIST_DIR environment variable not set")
    paths = {}
    for key, name in MNIST_FILES.items():
        candidates = [Path(directory) / name, Path(directory) / f"{name}.gz"]
        found = next((p for p in candidates if p.exists()), None)
        if found is None:
            pytest.skip(f"{name} not found in {directory}")
        paths[key] = found
    return paths
