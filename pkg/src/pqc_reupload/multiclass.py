"""Binary decisions, one-vs-others ensembles, balancing and cross-validation.

A multiclass problem with ``k`` classes trains ``k`` binary classifiers on the same template,
each separating one class (+1) from all others (-1). Prediction takes the class whose
classifier returns the largest ``g``; ties go to the lowest class id.

Independent trainings (ensemble members, cross-validation splits) run on a thread pool bounded
by ``threads``. Every job derives its random streams from the master seed and its own name,
and results are assembled in job order, so outputs do not depend on the thread count.
"""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import TypeVar

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix

from pqc_reupload.circuits import CircuitTemplate
from pqc_reupload.datasets import LabeledDataset, split
from pqc_reupload.encoding import EncodedData, FeaturePipeline, make_pipeline
from pqc_reupload.errors import EnsembleMemberError, InvalidArgumentError, PQCError
from pqc_reupload.simulator import derive_int_seed, derive_rng
from pqc_reupload.training import (
    ModelParams,
    TrainConfig,
    TrainHistory,
    accuracy,
    binary_predict,
    predict_batch,
    train,
)

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 0.05

__all__ = [
    "ConfusionMatrix",
    "CrossValidation",
    "FitResult",
    "OneVsOthersEnsemble",
    "balance",
    "binary_predict",
    "confusion",
    "cross_validate",
    "ensemble_predict",
    "fit_and_evaluate",
    "train_ensemble",
]

T = TypeVar("T")


def run_jobs(jobs: list[Callable[[], T]], threads: int) -> list[T]:
    """Run independent jobs on at most ``threads`` workers; results keep job order."""
    if threads <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [future.result() for future in futures]


def balance(dataset: LabeledDataset, sigma: float, stream: np.random.Generator) -> LabeledDataset:
    """Upsample the smaller of two classes with Gaussian-perturbed copies.

    All original rows are kept in order; ``n_major - n_minor`` copies of minority rows, drawn
    with replacement, are appended with per-feature noise of standard deviation ``sigma``.
    """
    classes, counts = np.unique(dataset.labels, return_counts=True)
    if classes.size != 2:
        raise InvalidArgumentError(f"balancing needs exactly two classes, got {classes.size}")
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be >= 0, got {sigma}")
    minority = classes[np.argmin(counts)]
    extra = int(counts.max() - counts.min())
    if extra == 0:
        return dataset
    pool = np.flatnonzero(dataset.labels == minority)
    picks = stream.choice(pool, size=extra, replace=True)
    copies = dataset.features[picks] + stream.normal(0.0, sigma, size=(extra, dataset.n_features))
    return LabeledDataset(
        np.vstack([dataset.features, copies]),
        np.concatenate([dataset.labels, np.full(extra, minority)]),
        dataset.columns,
        dataset.name,
    )


@dataclass
class OneVsOthersEnsemble:
    """One binary model per class, all on the same template."""

    template: CircuitTemplate
    classes: list[int]
    models: list[ModelParams]

    def __post_init__(self) -> None:
        if not self.models or len(self.models) != len(self.classes):
            raise InvalidArgumentError(
                f"{len(self.models)} models for {len(self.classes)} classes"
            )

    def scores(self, inputs: np.ndarray) -> np.ndarray:
        """Per-class predictions, shape ``(n, k)``."""
        return np.column_stack([predict_batch(m, self.template, inputs) for m in self.models])

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return scores_to_classes(self.scores(inputs), self.classes)


def scores_to_classes(scores: np.ndarray, classes: list[int]) -> np.ndarray:
    """Argmax over per-class scores; the first (lowest) class wins ties."""
    return np.asarray(classes)[np.argmax(scores, axis=1)]


def ensemble_predict(ensemble: OneVsOthersEnsemble, sample: np.ndarray) -> int:
    """Class id for one encoded sample."""
    return int(ensemble.predict(np.asarray(sample, dtype=float)[None])[0])


@dataclass
class ConfusionMatrix:
    """Counts of (true, predicted) pairs; rows are true classes."""

    classes: list[int]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def percentages(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else 0.0

    def to_dataframe(self, percent: bool = False) -> pd.DataFrame:
        values = np.round(self.percentages, 2) if percent else self.counts
        frame = pd.DataFrame(values, columns=[f"pred_{c}" for c in self.classes])
        frame.insert(0, "true", self.classes)
        return frame


def confusion_from_labels(
    y_true: np.ndarray, y_pred: np.ndarray, classes: list[int]
) -> ConfusionMatrix:
    return ConfusionMatrix(classes, confusion_matrix(y_true, y_pred, labels=classes))


def confusion(ensemble: OneVsOthersEnsemble, test: EncodedData) -> ConfusionMatrix:
    """Confusion matrix of ``ensemble`` on a test set whose labels are class ids."""
    return confusion_from_labels(test.labels, ensemble.predict(test.inputs), ensemble.classes)


def _train_member(
    class_id: int,
    template: CircuitTemplate,
    pipeline: FeaturePipeline,
    train_set: LabeledDataset,
    test_set: LabeledDataset,
    config: TrainConfig,
    sigma: float,
    run_name: str,
) -> tuple[ModelParams, TrainHistory]:
    name = f"{run_name}/class-{class_id}"
    try:
        normalized = pipeline.normalize(train_set.one_vs_others(class_id))
        balanced = balance(normalized, sigma, derive_rng(config.master_seed, name, "balance"))
        return train(
            template,
            pipeline.encode_normalized(balanced),
            pipeline.encode(test_set.one_vs_others(class_id)),
            config,
            run_name=name,
        )
    except PQCError as e:
        raise EnsembleMemberError(class_id, e) from e


def train_ensemble(
    template: CircuitTemplate,
    pipeline: FeaturePipeline,
    train_set: LabeledDataset,
    test_set: LabeledDataset,
    config: TrainConfig,
    sigma: float = DEFAULT_SIGMA,
    threads: int = 1,
    run_name: str = "ensemble",
) -> tuple[OneVsOthersEnsemble, list[TrainHistory]]:
    """Train one balanced one-vs-others classifier per class of ``train_set``."""
    classes = [int(c) for c in train_set.classes()]
    if len(classes) < 2:
        raise InvalidArgumentError(f"one-vs-others needs >= 2 classes, got {len(classes)}")
    jobs = [
        partial(_train_member, c, template, pipeline, train_set, test_set, config, sigma, run_name)
        for c in classes
    ]
    results = run_jobs(jobs, threads)
    ensemble = OneVsOthersEnsemble(template, classes, [model for model, _ in results])
    return ensemble, [history for _, history in results]


@dataclass
class FitResult:
    """A trained binary model or ensemble with its test-split evaluation."""

    pipeline: FeaturePipeline
    models: list[ModelParams]
    histories: list[TrainHistory]
    test_accuracy: float
    classes: list[int] | None = None
    confusion: ConfusionMatrix | None = None
    member_accuracies: list[float] = field(default_factory=list)


def fit_and_evaluate(
    dataset_name: str,
    train_set: LabeledDataset,
    test_set: LabeledDataset,
    template: CircuitTemplate,
    config: TrainConfig,
    sigma: float = DEFAULT_SIGMA,
    threads: int = 1,
    stump_k: int | None = None,
    run_name: str = "train",
) -> FitResult:
    """Fit the feature pipeline on ``train_set``, train and evaluate on ``test_set``.

    Two-class datasets get a single binary model; more classes get a one-vs-others ensemble.
    """
    pipeline = make_pipeline(dataset_name, train_set, template.conv_spec, stump_k)
    if train_set.n_classes == 2 and test_set.n_classes <= 2:
        model, history = train(
            template,
            pipeline.encode(train_set.as_binary()),
            pipeline.encode(test_set.as_binary()),
            config,
            run_name=run_name,
        )
        return FitResult(pipeline, [model], [history], history.last.acc_test if len(history) else 0.0)

    ensemble, histories = train_ensemble(
        template, pipeline, train_set, test_set, config, sigma, threads, run_name
    )
    test = pipeline.encode(test_set)
    matrix = confusion(ensemble, test)
    member_scores = ensemble.scores(test.inputs)
    members = [
        accuracy(member_scores[:, i], np.where(test.labels == c, 1, -1))
        for i, c in enumerate(ensemble.classes)
    ]
    logger.info("%s: ensemble test accuracy %.3f", run_name, matrix.accuracy())
    return FitResult(
        pipeline,
        ensemble.models,
        histories,
        matrix.accuracy(),
        ensemble.classes,
        matrix,
        members,
    )


@dataclass
class CrossValidation:
    """Test accuracy per random split."""

    seeds: list[int]
    accuracies: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"split": range(len(self.seeds)), "seed": self.seeds, "accuracy": self.accuracies}
        )


def split_seed(master_seed: int, index: int) -> int:
    """Seed of the ``index``-th train/test split of a run."""
    return derive_int_seed(master_seed, "split", index)


def cross_validate(
    dataset_name: str,
    dataset: LabeledDataset,
    template: CircuitTemplate,
    config: TrainConfig,
    n_splits: int = 6,
    ratio: float = 2.0,
    sigma: float = DEFAULT_SIGMA,
    threads: int = 1,
    stump_k: int | None = None,
) -> CrossValidation:
    """Mean and spread of test accuracy over ``n_splits`` seed-derived stratified splits."""
    if n_splits < 1:
        raise InvalidArgumentError(f"n_splits must be >= 1, got {n_splits}")
    seeds = [split_seed(config.master_seed, i) for i in range(n_splits)]

    def run_split(index: int) -> float:
        train_set, test_set = split(dataset, ratio, seeds[index])
        result = fit_and_evaluate(
            dataset_name, train_set, test_set, template, config, sigma, 1, stump_k, f"split-{index}"
        )
        logger.info("split %d: test accuracy %.3f", index, result.test_accuracy)
        return result.test_accuracy

    jobs = [partial(run_split, i) for i in range(n_splits)]
    return CrossValidation(seeds, run_jobs(jobs, threads))
