"""Dataset generation, parsing and splitting.

Four datasets are supported, with the counts the loaders validate against:

| name   | samples | features | classes |
|--------|---------|----------|---------|
| parity | 16      | 4        | 2       |
| cancer | 569     | 30       | 2       |
| wines  | 178     | 13       | 3       |
| mnist  | 1797    | 56       | 10      |

``parity`` is generated in memory. The other three are read from canonical CSV snapshots in a
data directory (see ``scripts/fetch_datasets.py``): a header row naming the feature columns
and a final integer column named ``label``.

Example:
    >>> train, test = split(gen_parity(4), ratio=1.0, seed=7)
    >>> train.n_samples, test.n_samples
    (8, 8)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from pqc_reupload.errors import (
    CountMismatchError,
    DataError,
    DatasetNotFoundError,
    InvalidArgumentError,
    MalformedCellError,
)

logger = logging.getLogger(__name__)

LABEL_COLUMN = "label"
DIGIT_SOURCE_SIDE = 8

ColumnCrop = Literal["right", "left"]


@dataclass(frozen=True)
class DatasetSpec:
    """Expected shape of a dataset."""

    name: str
    n_samples: int
    n_features: int
    n_classes: int
    filename: str | None = None


DATASETS: dict[str, DatasetSpec] = {
    "parity": DatasetSpec("parity", 16, 4, 2),
    "cancer": DatasetSpec("cancer", 569, 30, 2, "cancer.csv"),
    "wines": DatasetSpec("wines", 178, 13, 3, "wines.csv"),
    "mnist": DatasetSpec("mnist", 1797, 56, 10, "digits.csv"),
}


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature matrix with one label per row.

    Labels are either class ids ``0..k-1`` or binary ``{-1, +1}``.
    """

    features: np.ndarray
    labels: np.ndarray
    columns: tuple[str, ...] | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise InvalidArgumentError(f"features must be a matrix, got shape {self.features.shape}")
        if self.features.shape[0] != self.labels.shape[0]:
            raise InvalidArgumentError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.columns is not None and len(self.columns) != self.features.shape[1]:
            raise InvalidArgumentError(
                f"{len(self.columns)} column names for {self.features.shape[1]} features"
            )

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[1])

    def classes(self) -> np.ndarray:
        """Sorted distinct labels."""
        return np.unique(self.labels)

    @property
    def n_classes(self) -> int:
        return int(self.classes().size)

    def is_signed_binary(self) -> bool:
        return set(self.classes().tolist()) <= {-1, 1}

    def column_names(self) -> list[str]:
        if self.columns is not None:
            return list(self.columns)
        return [f"x{j}" for j in range(self.n_features)]

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=int)
        return LabeledDataset(
            self.features[indices], self.labels[indices], self.columns, self.name
        )

    def with_features(self, features: np.ndarray) -> "LabeledDataset":
        """Same labels over a transformed feature matrix (column names are dropped)."""
        return LabeledDataset(np.asarray(features, dtype=float), self.labels, None, self.name)

    def one_vs_others(self, positive_class: int) -> "LabeledDataset":
        """Binary view: ``positive_class`` becomes +1, every other class -1."""
        labels = np.where(self.labels == positive_class, 1, -1)
        return LabeledDataset(self.features, labels, self.columns, self.name)

    def as_binary(self) -> "LabeledDataset":
        """Signed binary view of a two-class dataset; class id 1 maps to +1."""
        if self.is_signed_binary():
            return self
        if self.n_classes != 2:
            raise InvalidArgumentError(
                f"{self.name or 'dataset'} has {self.n_classes} classes, expected 2"
            )
        return self.one_vs_others(int(self.classes()[-1]))

    def to_dataframe(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=self.column_names())
        frame[LABEL_COLUMN] = self.labels
        return frame


def gen_parity(n_bits: int = 4) -> LabeledDataset:
    """All ``2**n_bits`` bit strings; label +1 when the number of ones is odd.

    Row ``k`` is the binary expansion of ``k`` with the most significant bit first.
    """
    if not 1 <= n_bits <= 16:
        raise InvalidArgumentError(f"n_bits must be in [1, 16], got {n_bits}")
    index = np.arange(2**n_bits)
    shifts = np.arange(n_bits - 1, -1, -1)
    bits = (index[:, None] >> shifts[None, :]) & 1
    labels = np.where(bits.sum(axis=1) % 2 == 1, 1, -1)
    columns = tuple(f"b{j}" for j in range(n_bits))
    return LabeledDataset(bits.astype(float), labels, columns, "parity")


def _read_frame(path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise DatasetNotFoundError(f"dataset file not found: {path}")
    # strings first, so malformed cells can be reported with their position
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if LABEL_COLUMN not in frame.columns:
        raise DataError(f"{path}: no '{LABEL_COLUMN}' column in header")
    return frame


def _to_numeric(frame: pd.DataFrame, path: Path) -> pd.DataFrame:
    numeric = {}
    for column in frame.columns:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = values.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise MalformedCellError(str(path), row + 1, column, frame[column].iloc[row])
        numeric[column] = values
    return pd.DataFrame(numeric)


def _labels(frame: pd.DataFrame, path: Path) -> np.ndarray:
    labels = frame[LABEL_COLUMN].to_numpy()
    as_int = labels.astype(int)
    if not np.array_equal(as_int, labels):
        raise DataError(f"{path}: labels must be integers")
    return as_int


def _check_counts(spec: DatasetSpec, dataset: LabeledDataset) -> None:
    if dataset.n_samples != spec.n_samples:
        raise CountMismatchError(spec.name, "samples", spec.n_samples, dataset.n_samples)
    if dataset.n_features != spec.n_features:
        raise CountMismatchError(spec.name, "features", spec.n_features, dataset.n_features)
    if dataset.n_classes != spec.n_classes:
        raise CountMismatchError(spec.name, "classes", spec.n_classes, dataset.n_classes)


def load_csv(path: Path, spec: DatasetSpec) -> LabeledDataset:
    """Parse a canonical dataset CSV and validate it against ``spec``."""
    path = Path(path)
    frame = _to_numeric(_read_frame(path), path)
    features = frame.drop(columns=[LABEL_COLUMN])
    dataset = LabeledDataset(
        features.to_numpy(dtype=float),
        _labels(frame, path),
        tuple(str(c) for c in features.columns),
        spec.name,
    )
    _check_counts(spec, dataset)
    logger.debug("Loaded %s: %d samples x %d features", spec.name, *dataset.features.shape)
    return dataset


def load_digits(
    path: Path, crop: ColumnCrop = "right", spec: DatasetSpec = DATASETS["mnist"]
) -> LabeledDataset:
    """Read 8x8 digit images and return 8x7 images with intensities in [0, 1].

    One pixel column is removed per ``crop`` and intensities are divided by the largest
    source intensity. Features are the cropped images flattened row-major.
    """
    path = Path(path)
    frame = _to_numeric(_read_frame(path), path)
    pixels = frame.drop(columns=[LABEL_COLUMN]).to_numpy(dtype=float)
    side = DIGIT_SOURCE_SIDE
    if pixels.shape[1] != side * side:
        raise CountMismatchError(spec.name, "pixels per row", side * side, pixels.shape[1])
    if crop not in ("right", "left"):
        raise InvalidArgumentError(f"crop must be 'right' or 'left', got {crop!r}")
    peak = pixels.max(initial=0.0)
    images = pixels.reshape(-1, side, side)
    images = images[:, :, :-1] if crop == "right" else images[:, :, 1:]
    if peak > 0:
        images = images / peak
    columns = tuple(f"p{r}_{c}" for r in range(side) for c in range(side - 1))
    dataset = LabeledDataset(
        images.reshape(images.shape[0], -1), _labels(frame, path), columns, spec.name
    )
    _check_counts(spec, dataset)
    return dataset


def load_dataset(name: str, data_dir: Path, crop: ColumnCrop = "right") -> LabeledDataset:
    """Load a named dataset from ``data_dir`` (``parity`` is generated)."""
    if name not in DATASETS:
        raise InvalidArgumentError(f"unknown dataset {name!r}; choose from {sorted(DATASETS)}")
    spec = DATASETS[name]
    if name == "parity":
        return gen_parity(spec.n_features)
    assert spec.filename is not None
    path = Path(data_dir) / spec.filename
    if name == "mnist":
        return load_digits(path, crop, spec)
    return load_csv(path, spec)


def write_csv(dataset: LabeledDataset, path: Path) -> None:
    """Write ``dataset`` in the canonical CSV layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset.to_dataframe().to_csv(path, index=False)


def split(
    dataset: LabeledDataset, ratio: float, seed: int
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified train/test split with ``n_train : n_test ~= ratio : 1``.

    The training side gets ``ceil(n * ratio / (ratio + 1))`` samples. Both sides keep the
    original row order.
    """
    if ratio <= 0:
        raise InvalidArgumentError(f"split ratio must be positive, got {ratio}")
    n = dataset.n_samples
    n_train = math.ceil(n * ratio / (ratio + 1))
    if n_train < 1 or n - n_train < 1:
        raise DataError(f"cannot split {n} samples at ratio {ratio}:1")
    try:
        train_idx, test_idx = train_test_split(
            np.arange(n), train_size=n_train, stratify=dataset.labels, random_state=seed
        )
    except ValueError as e:
        raise DataError(f"cannot split {dataset.name or 'dataset'}: {e}") from e
    return dataset.subset(np.sort(train_idx)), dataset.subset(np.sort(test_idx))
