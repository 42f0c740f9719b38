"""Cost, parameter-shift gradients and Nesterov mini-batch SGD.

The per-sample cost is::

    L = log2(1 + exp(-y * g * beta)) + gamma * |params|^2

with ``g`` the circuit prediction plus the output bias. Circuit-angle derivatives come from the
parameter-shift rule ``dg/dtheta_j = (g(theta_j + pi/2) - g(theta_j - pi/2)) / 2``; for image
models they are pushed through the convolution by the chain rule. All ``2m + 1`` circuits of
every sample in a mini-batch are simulated in one batched pass.

The trainable vector is laid out in checkpoint order: for image models every kernel's weights
followed by its bias, then the free circuit angles, then the output bias; for tabular models
just the 15 circuit angles.
"""

import logging
import math
import time
from collections.abc import Iterator
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
import pandas as pd

from pqc_reupload.circuits import CircuitTemplate, evaluate_batch, trainable_count
from pqc_reupload.encoding import EncodedData, KernelSet, conv_angles
from pqc_reupload.errors import DataError, InvalidArgumentError, NumericError
from pqc_reupload.simulator import Exact, MeasurementMode, Shots, derive_rng

logger = logging.getLogger(__name__)

SHIFT = math.pi / 2
LN2 = math.log(2.0)

CostKind = Literal["log", "quadratic"]


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and cost settings of one training run."""

    learning_rate: float = 0.5
    momentum: float = 0.9
    batch_size: int = 64
    cost_beta: float = 10.0
    cost_gamma: float = 0.0
    iterations: int = 20
    cost: CostKind = "log"
    shots: int = 0
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.cost_beta <= 0:
            raise InvalidArgumentError(f"cost_beta must be > 0, got {self.cost_beta}")
        if self.cost_gamma < 0:
            raise InvalidArgumentError(f"cost_gamma must be >= 0, got {self.cost_gamma}")
        if self.iterations < 0 or self.shots < 0:
            raise InvalidArgumentError("iterations and shots must be >= 0")
        if not 0 <= self.momentum < 1:
            raise InvalidArgumentError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.cost not in ("log", "quadratic"):
            raise InvalidArgumentError(f"unknown cost {self.cost!r}")

    def measurement(self, stream: np.random.Generator) -> MeasurementMode:
        """Exact when ``shots == 0``, otherwise shot sampling from ``stream``."""
        return Exact() if self.shots == 0 else Shots(self.shots, stream)


@dataclass
class ModelParams:
    """Trainable state: free circuit angles, optional kernels and the output bias."""

    theta: np.ndarray
    kernels: KernelSet | None = None
    output_bias: float = 0.0

    @classmethod
    def initial(cls, template: CircuitTemplate, rng: np.random.Generator) -> "ModelParams":
        """Zero circuit angles; kernels uniform in [-0.1, 0.1] with zero biases."""
        theta = np.zeros(template.n_free_weights)
        if template.conv_spec is None:
            return cls(theta)
        kernels = KernelSet.initial(template.n_data_slots, template.conv_spec.kernel_size, rng)
        return cls(theta, kernels, 0.0)

    def flatten(self) -> np.ndarray:
        if self.kernels is None:
            return np.asarray(self.theta, dtype=float).copy()
        return np.concatenate([self.kernels.flatten(), self.theta, [self.output_bias]])

    @classmethod
    def from_flat(cls, template: CircuitTemplate, values: np.ndarray) -> "ModelParams":
        values = np.asarray(values, dtype=float)
        expected = trainable_count(template)
        if values.shape != (expected,):
            raise InvalidArgumentError(
                f"{template.arch_id} has {expected} trainable parameters, got {values.shape}"
            )
        if template.conv_spec is None:
            return cls(values.copy())
        size = template.conv_spec.kernel_size
        n_kernel = template.n_data_slots * (size + 1)
        kernels = KernelSet.from_flat(values[:n_kernel], template.n_data_slots, size)
        return cls(values[n_kernel:-1].copy(), kernels, float(values[-1]))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    cost_train: float
    cost_test: float
    acc_train: float
    acc_test: float
    mean_g_positive: float
    mean_g_negative: float
    wall_time: float = field(compare=False)


@dataclass
class TrainHistory:
    """One record per completed iteration."""

    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def to_dataframe(self) -> pd.DataFrame:
        """Convergence table; wall time is left out so replays compare byte for byte."""
        columns = ["iteration", "cost_train", "cost_test", "acc_train", "acc_test"]
        return pd.DataFrame([asdict(r) for r in self.records], columns=columns)

    def scores_dataframe(self) -> pd.DataFrame:
        """Mean test-split prediction per true class and iteration."""
        columns = ["iteration", "mean_g_positive", "mean_g_negative"]
        return pd.DataFrame([asdict(r) for r in self.records], columns=columns)

    @property
    def last(self) -> IterationRecord:
        return self.records[-1]


def binary_predict(g: np.ndarray | float) -> np.ndarray:
    """+1 where g >= 0, -1 elsewhere."""
    return np.where(np.asarray(g) >= 0, 1, -1)


def circuit_inputs(
    model: ModelParams, template: CircuitTemplate, inputs: np.ndarray
) -> tuple[np.ndarray | None, np.ndarray]:
    """Feature angles and full circuit-angle rows for a stack of encoded inputs."""
    n = inputs.shape[0]
    if template.conv_spec is None:
        return inputs, np.broadcast_to(model.theta, (n, template.n_weights))
    assert model.kernels is not None
    data = conv_angles(inputs, model.kernels)
    free = np.broadcast_to(model.theta, (n, template.n_free_weights))
    return None, np.hstack([data, free])


def predict_batch(
    model: ModelParams,
    template: CircuitTemplate,
    inputs: np.ndarray,
    mode: MeasurementMode | None = None,
) -> np.ndarray:
    """Predictions ``g + beta0`` for a stack of encoded inputs."""
    features, theta = circuit_inputs(model, template, inputs)
    return evaluate_batch(template, features, theta, mode) + model.output_bias


def predict(
    model: ModelParams,
    template: CircuitTemplate,
    sample: np.ndarray,
    mode: MeasurementMode | None = None,
) -> float:
    """Prediction for one encoded sample (feature angles or LRF patches)."""
    return float(predict_batch(model, template, np.asarray(sample, dtype=float)[None], mode)[0])


def log_cost(g: np.ndarray, y: np.ndarray, beta: float) -> np.ndarray:
    """``log2(1 + exp(-y g beta))`` without overflow."""
    result: np.ndarray = np.logaddexp(0.0, -np.asarray(y) * np.asarray(g) * beta) / LN2
    return result


def quadratic_cost(g: np.ndarray | float, y: np.ndarray | float) -> np.ndarray:
    return (np.asarray(g, dtype=float) - np.asarray(y, dtype=float)) ** 2


def per_sample_cost(g: float, y: int, params: np.ndarray, beta: float, gamma: float) -> float:
    """Logarithmic cost of one prediction plus the L2 penalty on the trainable vector."""
    if y not in (-1, 1):
        raise InvalidArgumentError(f"labels must be -1 or +1, got {y}")
    penalty = gamma * float(np.dot(params, params))
    return float(log_cost(np.asarray(g), np.asarray(y), beta)) + penalty


def _sigmoid(z: np.ndarray) -> np.ndarray:
    result: np.ndarray = 0.5 * (1.0 + np.tanh(z / 2.0))
    return result


def cost_derivative(g: np.ndarray, y: np.ndarray, config: TrainConfig) -> np.ndarray:
    """dL/dg per sample, without the penalty."""
    if config.cost == "quadratic":
        return 2.0 * (g - y)
    beta = config.cost_beta
    result: np.ndarray = -y * beta / LN2 * _sigmoid(-y * g * beta)
    return result


def sample_costs(g: np.ndarray, y: np.ndarray, config: TrainConfig) -> np.ndarray:
    if config.cost == "quadratic":
        return quadratic_cost(g, y)
    return log_cost(g, y, config.cost_beta)


def shift_gradients(
    template: CircuitTemplate,
    features: np.ndarray | None,
    theta: np.ndarray,
    mode: MeasurementMode | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Unshifted ``g`` and ``dg/dtheta`` for every row via the parameter-shift rule.

    Returns arrays of shape ``(n,)`` and ``(n, n_weights)``.
    """
    n, m = theta.shape
    shifts = np.vstack([np.zeros((1, m)), SHIFT * np.eye(m), -SHIFT * np.eye(m)])
    rows = (theta[:, None, :] + shifts[None, :, :]).reshape(n * (2 * m + 1), m)
    feature_rows = None if features is None else np.repeat(features, 2 * m + 1, axis=0)
    values = evaluate_batch(template, feature_rows, rows, mode).reshape(n, 2 * m + 1)
    return values[:, 0], (values[:, 1 : m + 1] - values[:, m + 1 :]) / 2.0


def _data_gradients(
    model: ModelParams,
    template: CircuitTemplate,
    data: EncodedData,
    config: TrainConfig,
    mode: MeasurementMode | None,
) -> tuple[np.ndarray, np.ndarray]:
    features, theta = circuit_inputs(model, template, data.inputs)
    g_circuit, dg = shift_gradients(template, features, theta, mode)
    dl_dg = cost_derivative(g_circuit + model.output_bias, data.labels, config)
    return dl_dg[:, None] * dg, dl_dg


def grad_circuit_angles(
    model: ModelParams,
    template: CircuitTemplate,
    sample: np.ndarray,
    y: int,
    config: TrainConfig,
    mode: MeasurementMode | None = None,
) -> np.ndarray:
    """dL/dtheta over all circuit angles of one sample.

    Free angles include the ``2 gamma theta`` penalty term; data angles of image models carry
    the cost term only (their penalty lives on the kernels).
    """
    data = EncodedData(np.asarray(sample, dtype=float)[None], np.array([y]))
    angle_grads, _ = _data_gradients(model, template, data, config, mode)
    grads = angle_grads[0]
    grads[template.n_data_slots :] += 2.0 * config.cost_gamma * model.theta
    return grads


def grad_conv_weights(
    angle_grads: np.ndarray, patches: np.ndarray, dl_dg: np.ndarray
) -> tuple[KernelSet, float]:
    """Chain rule from data-angle gradients to kernel weights, biases and the output bias.

    ``angle_grads`` is ``(n, k)`` aligned with the first ``k`` patches of ``patches``
    ``(n, >=k, size)``; results are averaged over the ``n`` samples.
    """
    angle_grads = np.atleast_2d(angle_grads)
    if patches.ndim == 2:
        patches = patches[None]
    n, k = angle_grads.shape
    if patches.shape[0] != n or patches.shape[1] < k:
        raise InvalidArgumentError(
            f"{angle_grads.shape} angle gradients do not align with patches {patches.shape}"
        )
    weights = np.einsum("nk,nkl->kl", angle_grads, patches[:, :k, :]) / n
    biases = angle_grads.mean(axis=0)
    return KernelSet(weights, biases), float(np.mean(dl_dg))


def batch_gradient(
    model: ModelParams,
    template: CircuitTemplate,
    data: EncodedData,
    config: TrainConfig,
    mode: MeasurementMode | None = None,
) -> np.ndarray:
    """Mean cost gradient over ``data`` as a flat vector in checkpoint order."""
    angle_grads, dl_dg = _data_gradients(model, template, data, config, mode)
    penalty = 2.0 * config.cost_gamma * model.flatten()
    if template.conv_spec is None:
        return angle_grads.mean(axis=0) + penalty
    n_data = template.n_data_slots
    kernels, bias_grad = grad_conv_weights(angle_grads[:, :n_data], data.inputs, dl_dg)
    free = angle_grads[:, n_data:].mean(axis=0)
    return np.concatenate([kernels.flatten(), free, [bias_grad]]) + penalty


def dataset_cost(
    model: ModelParams, template: CircuitTemplate, data: EncodedData, config: TrainConfig
) -> tuple[float, np.ndarray]:
    """Mean exact cost over ``data`` and the predictions it was computed from."""
    g = predict_batch(model, template, data.inputs)
    params = model.flatten()
    cost = float(np.mean(sample_costs(g, data.labels, config))) + config.cost_gamma * float(
        np.dot(params, params)
    )
    return cost, g


def accuracy(g: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(binary_predict(g) == labels))


def lookahead(params: np.ndarray, velocity: np.ndarray, config: TrainConfig) -> np.ndarray:
    """Point at which Nesterov evaluates the gradient."""
    return params + config.momentum * velocity


def sgd_step(
    params: np.ndarray, grads: np.ndarray, velocity: np.ndarray, config: TrainConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Nesterov update given ``grads`` evaluated at ``lookahead(params, velocity)``."""
    if params.shape != grads.shape or params.shape != velocity.shape:
        raise InvalidArgumentError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, velocity {velocity.shape}"
        )
    velocity = config.momentum * velocity - config.learning_rate * grads
    return params + velocity, velocity


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Endless mini-batches: each epoch is a fresh permutation cut into chunks."""
    size = min(batch_size, n)
    while True:
        order = rng.permutation(n)
        for start in range(0, n - size + 1, size):
            yield order[start : start + size]


def _check_data(data: EncodedData, what: str) -> None:
    if data.n_samples == 0:
        raise DataError(f"{what} split is empty")
    if not set(np.unique(data.labels).tolist()) <= {-1, 1}:
        raise InvalidArgumentError(f"{what} labels must be -1 or +1")


def _class_means(g: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    pos, neg = g[labels == 1], g[labels == -1]
    return (
        float(pos.mean()) if pos.size else math.nan,
        float(neg.mean()) if neg.size else math.nan,
    )


def train(
    template: CircuitTemplate,
    train_data: EncodedData,
    test_data: EncodedData,
    config: TrainConfig,
    initial: ModelParams | None = None,
    run_name: str = "train",
) -> tuple[ModelParams, TrainHistory]:
    """Train a binary classifier and record cost and accuracy on both splits.

    All randomness (kernel initialization, batch order, shot sampling) is derived from
    ``config.master_seed`` and ``run_name``.
    """
    _check_data(train_data, "training")
    _check_data(test_data, "test")
    seed = config.master_seed
    model = initial or ModelParams.initial(template, derive_rng(seed, run_name, "init"))
    mode = config.measurement(derive_rng(seed, run_name, "shots"))
    batches = epoch_batches(train_data.n_samples, config.batch_size, derive_rng(seed, run_name, "batch"))

    params = model.flatten()
    velocity = np.zeros_like(params)
    history = TrainHistory()
    started = time.perf_counter()
    for iteration in range(1, config.iterations + 1):
        batch = train_data.subset(next(batches))
        ahead = ModelParams.from_flat(template, lookahead(params, velocity, config))
        grads = batch_gradient(ahead, template, batch, config, mode)
        if not np.all(np.isfinite(grads)):
            raise NumericError(f"{run_name}: non-finite gradient at iteration {iteration}")
        params, velocity = sgd_step(params, grads, velocity, config)

        model = ModelParams.from_flat(template, params)
        cost_train, g_train = dataset_cost(model, template, train_data, config)
        cost_test, g_test = dataset_cost(model, template, test_data, config)
        if not (math.isfinite(cost_train) and math.isfinite(cost_test)):
            raise NumericError(f"{run_name}: non-finite cost at iteration {iteration}")
        record = IterationRecord(
            iteration,
            cost_train,
            cost_test,
            accuracy(g_train, train_data.labels),
            accuracy(g_test, test_data.labels),
            *_class_means(g_test, test_data.labels),
            wall_time=time.perf_counter() - started,
        )
        history.records.append(record)
        logger.debug(
            "%s iter %d: cost %.4f/%.4f acc %.3f/%.3f",
            run_name,
            iteration,
            record.cost_train,
            record.cost_test,
            record.acc_train,
            record.acc_test,
        )

    model = ModelParams.from_flat(template, params)
    if history.records:
        logger.info(
            "%s: %d iterations, test accuracy %.3f",
            run_name,
            len(history),
            history.last.acc_test,
        )
    return model, history
