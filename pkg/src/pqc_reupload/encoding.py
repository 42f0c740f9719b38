"""Feature encoding: raw features to circuit angles.

Three encodings are supported:

- Tabular data (cancer, wines): four selected columns are z-scored with moments of the
  training split and passed through ``arctan``, giving angles in (-pi/2, pi/2) that are
  merged into the first rotation layer of the circuit.
- Bit strings (parity): columns holding only 0 and 1 map to ``-pi/2`` and ``+pi/2``, so the
  two values of a bit become orthogonal states on every qubit.
- Images (8x7 digits): the image is padded with a zero bottom row and cut into local
  receptive fields (LRF). Every data slot of the circuit owns an independent kernel, and its
  angle is ``theta_i = beta_i + sum_j w_ij x_j`` over the pixels of its LRF. Slots are
  assigned to LRF placements row-major, cycling over the image once per pass.

Example:
    >>> spec = ConvSpec()
    >>> spec.placements, spec.passes
    (12, 2)
"""

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from pqc_reupload.datasets import LabeledDataset
from pqc_reupload.errors import InvalidArgumentError

# Columns published for the two tabular datasets with named selections.
NAMED_SELECTIONS: dict[str, tuple[str, ...]] = {
    "cancer": ("worst radius", "worst concave points", "worst texture", "mean texture"),
    "wines": ("proline", "flavanoids", "color_intensity", "alcohol"),
}

SIMPLE_FEATURE_COUNT = 4
BIT_ANGLE = math.pi / 2
KERNEL_INIT_SCALE = 0.1


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of the convolutional LRF encoding."""

    lrf_rows: int = 3
    lrf_cols: int = 3
    stride: int = 2
    passes: int = 2
    image_rows: int = 8
    image_cols: int = 7
    pad_bottom_rows: int = 1

    def __post_init__(self) -> None:
        values = (self.lrf_rows, self.lrf_cols, self.stride, self.passes)
        if min(values) < 1 or min(self.image_rows, self.image_cols) < 1:
            raise InvalidArgumentError(f"invalid convolution geometry {self!r}")
        if self.pad_bottom_rows < 0:
            raise InvalidArgumentError("pad_bottom_rows must be >= 0")
        if self.lrf_rows > self.padded_rows or self.lrf_cols > self.padded_cols:
            raise InvalidArgumentError(
                f"LRF {self.lrf_rows}x{self.lrf_cols} does not fit the "
                f"{self.padded_rows}x{self.padded_cols} padded image"
            )

    @property
    def padded_rows(self) -> int:
        return self.image_rows + self.pad_bottom_rows

    @property
    def padded_cols(self) -> int:
        return self.image_cols

    @property
    def kernel_size(self) -> int:
        return self.lrf_rows * self.lrf_cols

    @property
    def key(self) -> str:
        """Catalog key, e.g. ``3x3/2``."""
        return f"{self.lrf_rows}x{self.lrf_cols}/{self.stride}"

    def row_starts(self) -> list[int]:
        count = math.ceil((self.padded_rows - self.lrf_rows) / self.stride) + 1
        return [r * self.stride for r in range(count)]

    def col_starts(self) -> list[int]:
        count = math.ceil((self.padded_cols - self.lrf_cols) / self.stride) + 1
        return [c * self.stride for c in range(count)]

    @property
    def placements(self) -> int:
        """LRF placements per pass."""
        return len(self.row_starts()) * len(self.col_starts())

    def passes_for(self, n_kernels: int) -> int:
        """Number of passes needed to feed ``n_kernels`` data slots."""
        return math.ceil(n_kernels / self.placements)

    def describe(self) -> str:
        return f"{self.lrf_rows}x{self.lrf_cols}/{self.stride}/{self.passes}"

    @classmethod
    def parse(cls, text: str) -> "ConvSpec":
        """Inverse of ``describe``; ``3x3/2`` is accepted with the default pass count."""
        try:
            parts = text.split("/")
            rows, cols = (int(v) for v in parts[0].split("x"))
            stride = int(parts[1])
            passes = int(parts[2]) if len(parts) > 2 else cls.passes
        except (ValueError, IndexError) as e:
            raise InvalidArgumentError(f"cannot parse convolution spec {text!r}") from e
        return cls(lrf_rows=rows, lrf_cols=cols, stride=stride, passes=passes)


@dataclass
class KernelSet:
    """Independent LRF kernels: ``weights[i]`` and ``biases[i]`` feed data slot ``i``."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise InvalidArgumentError(
                f"kernel shapes disagree: weights {self.weights.shape}, biases {self.biases.shape}"
            )

    @property
    def count(self) -> int:
        return int(self.weights.shape[0])

    @property
    def size(self) -> int:
        return int(self.weights.shape[1])

    @property
    def scalar_count(self) -> int:
        return self.count * (self.size + 1)

    def flatten(self) -> np.ndarray:
        """Per kernel: its weights followed by its bias."""
        return np.hstack([self.weights, self.biases[:, None]]).ravel()

    @classmethod
    def from_flat(cls, values: np.ndarray, count: int, size: int) -> "KernelSet":
        block = np.asarray(values, dtype=float).reshape(count, size + 1)
        return cls(weights=block[:, :size].copy(), biases=block[:, size].copy())

    @classmethod
    def initial(cls, count: int, size: int, rng: np.random.Generator) -> "KernelSet":
        """Weights uniform in [-0.1, 0.1], zero biases."""
        weights = rng.uniform(-KERNEL_INIT_SCALE, KERNEL_INIT_SCALE, size=(count, size))
        return cls(weights=weights, biases=np.zeros(count))


@dataclass(frozen=True)
class FeatureSelector:
    """Selected feature columns, either published names or a decision-stump ranking."""

    mode: Literal["named", "stump"]
    columns: tuple[str, ...]
    indices: tuple[int, ...]

    @classmethod
    def named(cls, wanted: tuple[str, ...] | list[str], columns: list[str]) -> "FeatureSelector":
        missing = [name for name in wanted if name not in columns]
        if missing:
            raise InvalidArgumentError(f"unknown feature columns: {missing}")
        return cls("named", tuple(wanted), tuple(columns.index(name) for name in wanted))

    @classmethod
    def identity(cls, columns: list[str]) -> "FeatureSelector":
        return cls("named", tuple(columns), tuple(range(len(columns))))

    def select(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=float)[..., list(self.indices)]


@dataclass
class Standardizer:
    """Column z-scoring with moments of the training split."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        features = np.asarray(features, dtype=float)
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        # zero-variance columns are centered and passed with unit scale
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=mean, scale=scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        result: np.ndarray = (np.asarray(features, dtype=float) - self.mean) / self.scale
        return result


def preprocess_simple(
    raw: np.ndarray, selector: FeatureSelector, standardizer: Standardizer
) -> np.ndarray:
    """Angles ``arctan(z)`` of the selected, standardized features.

    ``raw`` is one sample or a matrix of samples; ``standardizer`` must have been fitted on
    the selected columns of the training split.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] <= max(selector.indices):
        raise InvalidArgumentError(
            f"selector needs column {max(selector.indices)}, sample has {raw.shape[-1]}"
        )
    angles: np.ndarray = np.arctan(standardizer.transform(selector.select(raw)))
    return angles


def is_bit_matrix(features: np.ndarray) -> bool:
    """True when every value is exactly 0 or 1."""
    features = np.asarray(features, dtype=float)
    return features.size > 0 and bool(np.all((features == 0) | (features == 1)))


def bit_angles(bits: np.ndarray) -> np.ndarray:
    """``-pi/2`` for 0 and ``+pi/2`` for 1."""
    bits = np.asarray(bits, dtype=float)
    if not is_bit_matrix(bits):
        raise InvalidArgumentError("bit encoding needs features that are all 0 or 1")
    angles: np.ndarray = (2.0 * bits - 1.0) * BIT_ANGLE
    return angles


def stump_importance(dataset: LabeledDataset, k: int) -> FeatureSelector:
    """Top-``k`` features ranked by single-threshold (decision stump) training accuracy.

    Ties are broken by the lower column index.
    """
    n_features = dataset.features.shape[1]
    if not 1 <= k <= n_features:
        raise InvalidArgumentError(f"k must be in [1, {n_features}], got {k}")
    if np.unique(dataset.labels).size < 2:
        raise InvalidArgumentError("stump ranking needs at least two classes")
    scores = []
    for column in range(n_features):
        stump = DecisionTreeClassifier(max_depth=1, random_state=0)
        stump.fit(dataset.features[:, [column]], dataset.labels)
        scores.append(stump.score(dataset.features[:, [column]], dataset.labels))
    ranking = sorted(range(n_features), key=lambda j: (-scores[j], j))[:k]
    names = dataset.column_names()
    return FeatureSelector("stump", tuple(names[j] for j in ranking), tuple(ranking))


@dataclass(frozen=True)
class _TileIndex:
    grid_rows: int
    grid_cols: int
    gather: np.ndarray = field(repr=False)


def _tile_index(spec: ConvSpec) -> _TileIndex:
    rows, cols = spec.row_starts(), spec.col_starts()
    # placements running past the padded image read implicit zeros
    grid_rows = max(spec.padded_rows, rows[-1] + spec.lrf_rows)
    grid_cols = max(spec.padded_cols, cols[-1] + spec.lrf_cols)
    offsets = np.array(
        [r * grid_cols + c for r in range(spec.lrf_rows) for c in range(spec.lrf_cols)]
    )
    starts = np.array([r * grid_cols + c for r in rows for c in cols])
    return _TileIndex(grid_rows, grid_cols, starts[:, None] + offsets[None, :])


def tile_images(images: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """LRF patches of a stack of images: shape ``(n, placements * passes, kernel_size)``."""
    images = np.asarray(images, dtype=float)
    n_pixels = spec.image_rows * spec.image_cols
    if images.shape[-1] == n_pixels and images.ndim == 2:
        images = images.reshape(-1, spec.image_rows, spec.image_cols)
    if images.ndim != 3 or images.shape[1:] != (spec.image_rows, spec.image_cols):
        raise InvalidArgumentError(
            f"expected {spec.image_rows}x{spec.image_cols} images, got shape {images.shape}"
        )
    index = _tile_index(spec)
    grid = np.zeros((images.shape[0], index.grid_rows, index.grid_cols))
    grid[:, : spec.image_rows, : spec.image_cols] = images
    patches = grid.reshape(images.shape[0], -1)[:, index.gather]
    return np.tile(patches, (1, spec.passes, 1))


def pad_and_tile(image: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Patches of one image, row-major by (row start, col start), pass 1 then pass 2."""
    image = np.asarray(image, dtype=float)
    if image.shape != (spec.image_rows, spec.image_cols):
        raise InvalidArgumentError(
            f"expected a {spec.image_rows}x{spec.image_cols} image, got shape {image.shape}"
        )
    patches: np.ndarray = tile_images(image[None], spec)[0]
    return patches


def _check_kernels(spec: ConvSpec, kernels: KernelSet) -> None:
    if kernels.size != spec.kernel_size:
        raise InvalidArgumentError(
            f"kernel size {kernels.size} does not match LRF size {spec.kernel_size}"
        )
    if spec.passes_for(kernels.count) != spec.passes:
        raise InvalidArgumentError(
            f"{kernels.count} kernels do not fill {spec.passes} passes of "
            f"{spec.placements} placements"
        )


def conv_angles(patches: np.ndarray, kernels: KernelSet) -> np.ndarray:
    """Data-slot angles for a stack of tiled images: shape ``(n, kernels.count)``."""
    used = patches[:, : kernels.count, :]
    angles: np.ndarray = np.einsum("nkl,kl->nk", used, kernels.weights) + kernels.biases
    return angles


def conv_encode(image: np.ndarray, spec: ConvSpec, kernels: KernelSet) -> np.ndarray:
    """Angles ``theta_i = beta_i + dot(w_i, patch_i)`` in patch order."""
    _check_kernels(spec, kernels)
    return conv_angles(pad_and_tile(image, spec)[None], kernels)[0]


@dataclass(frozen=True, eq=False)
class EncodedData:
    """Circuit-ready inputs with signed binary labels.

    ``inputs`` holds feature angles ``(n, n_features)`` for tabular data or LRF patches
    ``(n, placements * passes, kernel_size)`` for images.
    """

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise InvalidArgumentError(
                f"{self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels"
            )

    @property
    def n_samples(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, indices: np.ndarray) -> "EncodedData":
        return EncodedData(self.inputs[indices], self.labels[indices])


def default_selector(dataset_name: str, train: LabeledDataset) -> FeatureSelector:
    """Published columns where known, all columns when there are few, else a stump ranking."""
    columns = train.column_names()
    if dataset_name in NAMED_SELECTIONS:
        return FeatureSelector.named(NAMED_SELECTIONS[dataset_name], columns)
    if train.n_features <= SIMPLE_FEATURE_COUNT:
        return FeatureSelector.identity(columns)
    return stump_importance(train, SIMPLE_FEATURE_COUNT)


@dataclass
class FeaturePipeline:
    """Raw features to circuit inputs.

    Tabular pipelines select columns and z-score them (the "normalized" space), then take
    ``arctan``. Bit pipelines select columns and take ``bit_angles``; their normalized space
    is the raw bits. Image pipelines keep pixel intensities as the normalized space and tile
    them into LRF patches.
    """

    selector: FeatureSelector | None = None
    standardizer: Standardizer | None = None
    conv_spec: ConvSpec | None = None
    bits: bool = False

    def __post_init__(self) -> None:
        if (self.conv_spec is None) == (self.selector is None):
            raise InvalidArgumentError("a pipeline needs either a selector or a conv spec")
        if self.selector is not None and not self.bits and self.standardizer is None:
            raise InvalidArgumentError("tabular pipelines need a fitted standardizer")

    @classmethod
    def fit_tabular(cls, train: LabeledDataset, selector: FeatureSelector) -> "FeaturePipeline":
        return cls(selector=selector, standardizer=Standardizer.fit(selector.select(train.features)))

    @classmethod
    def for_bits(cls, selector: FeatureSelector) -> "FeaturePipeline":
        return cls(selector=selector, bits=True)

    @classmethod
    def for_images(cls, spec: ConvSpec) -> "FeaturePipeline":
        return cls(conv_spec=spec)

    def normalize(self, dataset: LabeledDataset) -> LabeledDataset:
        if self.selector is None:
            return dataset
        if self.bits:
            return dataset.with_features(self.selector.select(dataset.features))
        assert self.standardizer is not None
        z = self.standardizer.transform(self.selector.select(dataset.features))
        return dataset.with_features(z)

    def inputs_from_normalized(self, features: np.ndarray) -> np.ndarray:
        if self.conv_spec is not None:
            return tile_images(features, self.conv_spec)
        if self.bits:
            return bit_angles(features)
        angles: np.ndarray = np.arctan(np.asarray(features, dtype=float))
        return angles

    def encode_normalized(self, dataset: LabeledDataset) -> EncodedData:
        """Encode a dataset that is already in normalized space; labels must be signed."""
        return EncodedData(self.inputs_from_normalized(dataset.features), dataset.labels)

    def encode(self, dataset: LabeledDataset) -> EncodedData:
        return self.encode_normalized(self.normalize(dataset))

    def describe(self) -> str:
        """Single-line summary stored in checkpoints."""
        if self.conv_spec is not None:
            return f"images; conv={self.conv_spec.describe()}"
        assert self.selector is not None
        columns = "|".join(self.selector.columns)
        if self.bits:
            return f"bits; columns={columns}"
        assert self.standardizer is not None
        mean = ",".join(repr(float(v)) for v in self.standardizer.mean)
        scale = ",".join(repr(float(v)) for v in self.standardizer.scale)
        return f"tabular; columns={columns}; mean={mean}; scale={scale}"

    @classmethod
    def parse(cls, text: str, columns: list[str], spec: ConvSpec | None = None) -> "FeaturePipeline":
        """Inverse of ``describe`` given the dataset's column names."""
        kind, _, rest = text.strip().partition("; ")
        if kind == "images":
            if spec is None:
                raise InvalidArgumentError("image preprocessing needs the template's conv spec")
            return cls.for_images(spec)
        if kind not in ("tabular", "bits"):
            raise InvalidArgumentError(f"unknown preprocessing kind {kind!r}")
        try:
            fields = dict(part.split("=", 1) for part in rest.split("; "))
            wanted = fields["columns"].split("|")
            if kind == "bits":
                return cls.for_bits(FeatureSelector.named(wanted, columns))
            mean = np.array([float(v) for v in fields["mean"].split(",")])
            scale = np.array([float(v) for v in fields["scale"].split(",")])
        except (KeyError, ValueError) as e:
            raise InvalidArgumentError(f"malformed preprocessing line {text!r}") from e
        return cls(
            selector=FeatureSelector.named(wanted, columns),
            standardizer=Standardizer(mean=mean, scale=scale),
        )


def make_pipeline(
    dataset_name: str,
    train: LabeledDataset,
    conv_spec: ConvSpec | None = None,
    stump_k: int | None = None,
) -> FeaturePipeline:
    """Pipeline fitted on a training split.

    Images when ``conv_spec`` is given, bits when the selected columns hold only 0 and 1,
    tabular otherwise.
    """
    if conv_spec is not None:
        return FeaturePipeline.for_images(conv_spec)
    if stump_k is not None:
        selector = stump_importance(train, stump_k)
    else:
        selector = default_selector(dataset_name, train)
    if is_bit_matrix(selector.select(train.features)):
        return FeaturePipeline.for_bits(selector)
    return FeaturePipeline.fit_tabular(train, selector)
