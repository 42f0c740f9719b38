"""Test configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest
from sklearn.datasets import load_breast_cancer, load_digits, load_wine

from pqc_reupload.circuits import CircuitTemplate, build_template
from pqc_reupload.datasets import DATASETS, LabeledDataset, gen_parity, write_csv
from pqc_reupload.encoding import ConvSpec
from pqc_reupload.training import TrainConfig


@pytest.fixture
def parity() -> LabeledDataset:
    """The 16-sample 4-bit parity dataset."""
    return gen_parity(4)


@pytest.fixture
def simple_template() -> CircuitTemplate:
    """The default tabular architecture."""
    return build_template("simple-a")


@pytest.fixture
def image_template() -> CircuitTemplate:
    """The default image architecture: 3x3 receptive fields, stride 2."""
    return build_template("mnist-c", ConvSpec())


@pytest.fixture
def fast_config() -> TrainConfig:
    """A training configuration small enough for unit tests."""
    return TrainConfig(iterations=2, batch_size=4, master_seed=11)


@pytest.fixture
def toy_multiclass() -> LabeledDataset:
    """30 samples, 4 features, 3 well separated classes."""
    rng = np.random.default_rng(5)
    labels = np.repeat([0, 1, 2], 10)
    centers = np.array([[-2.0, 0.0, 1.0, 0.5], [0.0, 2.0, -1.0, 0.0], [2.0, -2.0, 0.0, -0.5]])
    features = centers[labels] + 0.3 * rng.standard_normal((30, 4))
    return LabeledDataset(features, labels, ("f0", "f1", "f2", "f3"), "toy")


@pytest.fixture
def toy_images() -> LabeledDataset:
    """12 random 8x7 images in [0, 1] with labels 0..2."""
    rng = np.random.default_rng(3)
    return LabeledDataset(rng.random((12, 56)), np.repeat([0, 1, 2], 4), None, "toy-images")


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Canonical CSVs of the three file-backed datasets, written once per session."""
    directory = tmp_path_factory.mktemp("data")
    cancer, wine = load_breast_cancer(), load_wine()
    for name, bunch in (("cancer", cancer), ("wines", wine)):
        dataset = LabeledDataset(
            np.asarray(bunch.data, dtype=float),
            np.asarray(bunch.target, dtype=int),
            tuple(str(c) for c in bunch.feature_names),
            name,
        )
        write_csv(dataset, directory / str(DATASETS[name].filename))
    digits = load_digits()
    write_csv(
        LabeledDataset(np.asarray(digits.data, dtype=float), np.asarray(digits.target), None, "mnist"),
        directory / str(DATASETS["mnist"].filename),
    )
    return directory
