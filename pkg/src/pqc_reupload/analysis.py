"""Diagnostics around trained models and architectures.

- ``landscape_2d`` / ``slice_1d``: test cost on a plane (or line) through a trained
  parameter vector, spanned by seeded random orthonormal directions
- ``harmonic_scan``: sinusoid fit of ``g`` against one circuit angle
- ``robustness_sweep``: cross-validated accuracy with perturbed entangler angles
- ``arch_compare``: parameter count, layer count and accuracy per architecture
- ``hardware_time_estimate``: wall-clock arithmetic for running training on a device

Every result converts to a ``DataFrame`` for CSV output.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial

import numpy as np
import pandas as pd

from pqc_reupload.circuits import (
    CircuitTemplate,
    FSimParams,
    build_template,
    evaluate_batch,
    param_count,
    template_duration_ns,
    trainable_count,
)
from pqc_reupload.datasets import LabeledDataset
from pqc_reupload.encoding import ConvSpec, EncodedData
from pqc_reupload.errors import InvalidArgumentError
from pqc_reupload.multiclass import DEFAULT_SIGMA, cross_validate, run_jobs
from pqc_reupload.simulator import derive_rng
from pqc_reupload.training import ModelParams, TrainConfig, accuracy, dataset_cost

logger = logging.getLogger(__name__)

DEFAULT_HALF_RANGE = math.pi
DEFAULT_RESOLUTION = 41
DEFAULT_SCAN_POINTS = 32
SWEEP_THETAS = (0.2, 0.5, 0.8)
SWEEP_PHIS = (-0.5, 0.0, 0.5)

# configurations of the image architecture comparison
IMAGE_CONFIGURATIONS: tuple[tuple[str, str], ...] = (
    ("mnist-a", "2x2/1"),
    ("mnist-c", "2x2/2"),
    ("mnist-b", "2x2/2"),
    ("mnist-c", "3x3/2"),
    ("mnist-a", "3x3/1"),
)

US = Fraction(1, 10**6)


def orthonormal_directions(dim: int, stream: np.random.Generator) -> np.ndarray:
    """Two orthonormal directions by Gram-Schmidt on Gaussian draws; shape ``(2, dim)``."""
    if dim < 2:
        raise InvalidArgumentError(f"need at least two parameters, got {dim}")
    first, second = stream.standard_normal((2, dim))
    first /= np.linalg.norm(first)
    second -= np.dot(second, first) * first
    second /= np.linalg.norm(second)
    # second pass removes the rounding left by the first projection
    second -= np.dot(second, first) * first
    second /= np.linalg.norm(second)
    return np.vstack([first, second])


def _cost_at(
    template: CircuitTemplate, data: EncodedData, config: TrainConfig, params: np.ndarray
) -> tuple[float, float]:
    model = ModelParams.from_flat(template, params)
    cost, g = dataset_cost(model, template, data, config)
    return cost, accuracy(g, data.labels)


@dataclass
class LandscapeGrid:
    """Test cost on ``center + a * directions[0] + b * directions[1]``."""

    center: np.ndarray
    directions: np.ndarray
    offsets: np.ndarray
    costs: np.ndarray
    minima: list[tuple[int, int, float, float]] = field(default_factory=list)

    def local_minima(self) -> list[tuple[int, int]]:
        """Grid points strictly below all of their (up to 8) neighbours."""
        n = self.costs.shape[0]
        padded = np.pad(self.costs, 1, constant_values=np.inf)
        found = []
        for i in range(n):
            for j in range(n):
                window = padded[i : i + 3, j : j + 3].copy()
                window[1, 1] = np.inf
                if self.costs[i, j] < window.min():
                    found.append((i, j))
        return found

    def to_dataframe(self) -> pd.DataFrame:
        a, b = np.meshgrid(self.offsets, self.offsets, indexing="ij")
        return pd.DataFrame({"a": a.ravel(), "b": b.ravel(), "cost": self.costs.ravel()})

    def minima_dataframe(self) -> pd.DataFrame:
        rows = [
            {"a": self.offsets[i], "b": self.offsets[j], "cost": cost, "accuracy": acc}
            for i, j, cost, acc in self.minima
        ]
        return pd.DataFrame(rows, columns=["a", "b", "cost", "accuracy"])


def landscape_2d(
    model: ModelParams,
    template: CircuitTemplate,
    testset: EncodedData,
    config: TrainConfig,
    half_range: float = DEFAULT_HALF_RANGE,
    resolution: int = DEFAULT_RESOLUTION,
    seed: int = 0,
) -> LandscapeGrid:
    """Exact test cost over a square grid around the trained parameters.

    Local minima of the grid are annotated with their test accuracy.
    """
    if resolution < 3:
        raise InvalidArgumentError(f"resolution must be >= 3, got {resolution}")
    center = model.flatten()
    directions = orthonormal_directions(center.size, derive_rng(seed, "landscape-dirs"))
    offsets = np.linspace(-half_range, half_range, resolution)
    costs = np.empty((resolution, resolution))
    for i, a in enumerate(offsets):
        for j, b in enumerate(offsets):
            point = center + a * directions[0] + b * directions[1]
            costs[i, j] = _cost_at(template, testset, config, point)[0]
    grid = LandscapeGrid(center, directions, offsets, costs)
    for i, j in grid.local_minima():
        point = center + offsets[i] * directions[0] + offsets[j] * directions[1]
        cost, acc = _cost_at(template, testset, config, point)
        grid.minima.append((i, j, cost, acc))
    logger.info("Landscape: %d local minima on a %dx%d grid", len(grid.minima), resolution, resolution)
    return grid


def slice_1d(
    model: ModelParams,
    template: CircuitTemplate,
    testset: EncodedData,
    config: TrainConfig,
    direction: np.ndarray,
    half_range: float = DEFAULT_HALF_RANGE,
    resolution: int = DEFAULT_RESOLUTION,
) -> pd.DataFrame:
    """Exact test cost along one (normalized) direction through the trained parameters."""
    if resolution < 3:
        raise InvalidArgumentError(f"resolution must be >= 3, got {resolution}")
    center = model.flatten()
    direction = np.asarray(direction, dtype=float)
    if direction.shape != center.shape:
        raise InvalidArgumentError(
            f"direction has shape {direction.shape}, parameters {center.shape}"
        )
    direction = direction / np.linalg.norm(direction)
    offsets = np.linspace(-half_range, half_range, resolution)
    costs = [_cost_at(template, testset, config, center + t * direction)[0] for t in offsets]
    return pd.DataFrame({"t": offsets, "cost": costs})


@dataclass
class HarmonicFit:
    """Least-squares fit ``g ~= amplitude * cos(angle - phase) + offset``."""

    angles: np.ndarray
    values: np.ndarray
    amplitude: float
    phase: float
    offset: float
    residual: float

    def to_dataframe(self) -> pd.DataFrame:
        fitted = self.amplitude * np.cos(self.angles - self.phase) + self.offset
        return pd.DataFrame({"angle": self.angles, "g": self.values, "fit": fitted})


def fit_harmonic(angles: np.ndarray, values: np.ndarray) -> HarmonicFit:
    """Fit a single sinusoid with period 2 pi; ``residual`` is the largest absolute error."""
    angles = np.asarray(angles, dtype=float)
    values = np.asarray(values, dtype=float)
    design = np.column_stack([np.cos(angles), np.sin(angles), np.ones_like(angles)])
    (a, b, c), *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = float(np.max(np.abs(design @ np.array([a, b, c]) - values)))
    return HarmonicFit(angles, values, float(math.hypot(a, b)), float(math.atan2(b, a)), float(c), residual)


def harmonic_scan(
    template: CircuitTemplate, param_index: int, n_points: int = DEFAULT_SCAN_POINTS
) -> HarmonicFit:
    """Scan circuit angle ``param_index`` over [0, 2 pi) with all other inputs at zero."""
    if not 0 <= param_index < param_count(template):
        raise InvalidArgumentError(
            f"param_index must be in [0, {param_count(template)}), got {param_index}"
        )
    if n_points < 4:
        raise InvalidArgumentError(f"n_points must be >= 4, got {n_points}")
    angles = np.linspace(0.0, 2 * math.pi, n_points, endpoint=False)
    theta = np.zeros((n_points, template.n_weights))
    theta[:, param_index] = angles
    features = np.zeros(template.n_features) if template.n_features else None
    return fit_harmonic(angles, evaluate_batch(template, features, theta))


@dataclass
class RobustnessGrid:
    """Cross-validated accuracy per entangler setting."""

    thetas: list[float]
    phis: list[float]
    accuracy: np.ndarray
    accuracy_std: np.ndarray

    def to_dataframe(self) -> pd.DataFrame:
        rows = [
            {
                "theta_over_pi": t / math.pi,
                "phi_over_pi": p / math.pi,
                "accuracy": self.accuracy[i, j],
                "accuracy_std": self.accuracy_std[i, j],
            }
            for i, t in enumerate(self.thetas)
            for j, p in enumerate(self.phis)
        ]
        return pd.DataFrame(rows)


def robustness_sweep(
    dataset_name: str,
    dataset: LabeledDataset,
    arch_id: str,
    config: TrainConfig,
    thetas: list[float] | None = None,
    phis: list[float] | None = None,
    conv_spec: ConvSpec | None = None,
    n_splits: int = 6,
    ratio: float = 2.0,
    threads: int = 1,
) -> RobustnessGrid:
    """Retrain from scratch for every (theta, phi) cell with the same seed and splits."""
    thetas = list(thetas if thetas is not None else [t * math.pi for t in SWEEP_THETAS])
    phis = list(phis if phis is not None else [p * math.pi for p in SWEEP_PHIS])
    cells = [(t, p) for t in thetas for p in phis]

    def run_cell(theta: float, phi: float) -> tuple[float, float]:
        template = build_template(arch_id, conv_spec, FSimParams(theta, phi))
        result = cross_validate(
            dataset_name, dataset, template, config, n_splits, ratio, DEFAULT_SIGMA
        )
        logger.info(
            "Cell theta=%.2fpi phi=%.2fpi: accuracy %.3f",
            theta / math.pi,
            phi / math.pi,
            result.mean,
        )
        return result.mean, result.std

    results = run_jobs([partial(run_cell, t, p) for t, p in cells], threads)
    shape = (len(thetas), len(phis))
    means = np.array([r[0] for r in results]).reshape(shape)
    stds = np.array([r[1] for r in results]).reshape(shape)
    return RobustnessGrid(thetas, phis, means, stds)


def arch_compare(
    dataset_name: str,
    dataset: LabeledDataset | None,
    configurations: list[tuple[str, ConvSpec | None]],
    config: TrainConfig,
    n_splits: int = 1,
    ratio: float = 2.0,
    sigma: float = DEFAULT_SIGMA,
    threads: int = 1,
) -> pd.DataFrame:
    """Parameter count, layer count and cross-validated accuracy per architecture.

    With ``dataset=None`` only the counts are reported.
    """
    templates = [build_template(arch_id, spec) for arch_id, spec in configurations]

    def run(template: CircuitTemplate) -> float:
        if dataset is None:
            return math.nan
        return cross_validate(
            dataset_name, dataset, template, config, n_splits, ratio, sigma
        ).mean

    accuracies = run_jobs([partial(run, t) for t in templates], threads)
    rows = []
    for template, acc in zip(templates, accuracies, strict=True):
        spec = template.conv_spec
        rows.append(
            {
                "arch": template.arch_id,
                "lrf": f"{spec.lrf_rows}x{spec.lrf_cols}" if spec else "",
                "stride": spec.stride if spec else 0,
                "params": trainable_count(template),
                "layers": template.layer_count,
                "accuracy": acc,
            }
        )
    return pd.DataFrame(rows)


def _exact(value: Fraction | int | float | str) -> Fraction:
    # floats go through their shortest repr so 1.45 means 145/100
    return Fraction(str(value)) if isinstance(value, float) else Fraction(value)


@dataclass(frozen=True)
class TimingReport:
    """Device wall-clock estimate of gradient-based training (exact rationals, seconds)."""

    m: int
    shots: int
    t_rep: Fraction
    t_rewrite: Fraction
    batch_size: int
    iterations: int
    t_pqc_ns: int | None = None

    @property
    def t_grad(self) -> Fraction:
        return (2 * self.m + 1) * self.shots * self.t_rep

    @property
    def t_sample(self) -> Fraction:
        return self.t_grad + self.t_rewrite

    @property
    def t_iteration(self) -> Fraction:
        return self.batch_size * self.t_sample

    @property
    def t_total(self) -> Fraction:
        return self.iterations * self.t_iteration

    def to_dataframe(self) -> pd.DataFrame:
        rows: list[tuple[str, object, str]] = [
            ("m", self.m, "parameters"),
            ("shots", self.shots, "repetitions"),
            ("t_rep", float(self.t_rep / US), "us"),
            ("t_rewrite", float(self.t_rewrite), "s"),
            ("batch_size", self.batch_size, "samples"),
            ("iterations", self.iterations, "iterations"),
            ("t_grad", float(self.t_grad), "s"),
            ("t_sample", float(self.t_sample), "s"),
            ("t_iteration", float(self.t_iteration), "s"),
            ("t_total", float(self.t_total), "s"),
        ]
        if self.t_pqc_ns is not None:
            rows.append(("t_pqc", self.t_pqc_ns, "ns"))
        return pd.DataFrame(rows, columns=["quantity", "value", "unit"])


def hardware_time_estimate(
    m: int,
    shots: int = 1000,
    t_rep_us: Fraction | int | float | str = 50,
    t_rewrite_s: Fraction | int | float | str = Fraction(145, 100),
    b: int = 64,
    iterations: int = 100,
    template: CircuitTemplate | None = None,
) -> TimingReport:
    """Time to evaluate ``2m + 1`` shifted circuits per sample, ``b`` samples per iteration."""
    t_rep = _exact(t_rep_us) * US
    t_rewrite = _exact(t_rewrite_s)
    if min(m, shots, b, iterations) < 1 or t_rep <= 0 or t_rewrite < 0:
        raise InvalidArgumentError(
            "m, shots, b, iterations and t_rep must be positive and t_rewrite non-negative"
        )
    t_pqc = template_duration_ns(template) if template is not None else None
    return TimingReport(m, shots, t_rep, t_rewrite, b, iterations, t_pqc)
