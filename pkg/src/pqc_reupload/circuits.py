"""Parameterized circuit templates and their evaluation.

A template is a fixed 4-qubit gate layout whose rotation angles come from parameter slots:

- ``FeatureSlot(i)``: the i-th encoded feature angle
- ``WeightSlot(j)``: the j-th circuit angle
- ``MergedSlot(i, j)``: feature angle i plus circuit angle j (the first layer of the
  simple architectures)
- ``FixedAngle(value)``: a constant

Layouts are read from the packaged ``architectures.yaml`` catalog. Gates are grouped into
layers (time steps with at most one gate per qubit). The prediction ``g`` is the expectation
of Z on the readout qubit.

For image architectures the leading circuit angles are "data" angles: they are produced per
sample by the convolution kernels (see ``encoding.conv_angles``) and concatenated in front of
the free angles before evaluation. Circuit angles are numbered data first, then free angles
in order of appearance, then the three Euler angles.

Example:
    >>> template = build_template("simple-a")
    >>> param_count(template), template.layer_count
    (15, 12)
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml

from pqc_reupload.encoding import ConvSpec
from pqc_reupload.errors import InvalidArgumentError
from pqc_reupload.simulator import (
    Axis,
    Exact,
    MeasurementMode,
    apply_fsim_batch,
    apply_rotation_batch,
    expect_z_batch,
    ground_block,
    sample_expect_z_batch,
)

logger = logging.getLogger(__name__)

CATALOG_PATH = Path(__file__).parent / "architectures.yaml"
TEMPLATE_FORMAT = "pqc-template/1"
N_QUBITS = 4
READOUT_QUBIT = 0

LAYER_NS = 80
READOUT_NS = 500

ARCH_IDS = ("simple-a", "simple-b", "simple-c", "simple-d", "mnist-a", "mnist-b", "mnist-c")


@dataclass(frozen=True)
class FeatureSlot:
    index: int


@dataclass(frozen=True)
class WeightSlot:
    index: int


@dataclass(frozen=True)
class MergedSlot:
    feature: int
    weight: int


@dataclass(frozen=True)
class FixedAngle:
    value: float


ParamSlot = FeatureSlot | WeightSlot | MergedSlot | FixedAngle

GateKind = Literal["RX", "RY", "FSIM"]

_AXES: dict[str, Axis] = {"RX": "X", "RY": "Y"}


@dataclass(frozen=True)
class FSimParams:
    """Swap angle and conditional phase of the entangling gate."""

    theta: float = math.pi / 2
    phi: float = 0.1 * math.pi


@dataclass(frozen=True)
class TemplateGate:
    """One gate of a template; entanglers take their angles from ``CircuitTemplate.fsim``."""

    kind: GateKind
    qubits: tuple[int, ...]
    slot: ParamSlot | None = None


@dataclass(frozen=True)
class CircuitTemplate:
    """Immutable gate layout of one architecture."""

    arch_id: str
    layers: tuple[tuple[TemplateGate, ...], ...]
    fsim: FSimParams
    n_features: int
    n_weights: int
    n_data_slots: int = 0
    conv_spec: ConvSpec | None = None
    n_qubits: int = N_QUBITS
    readout_qubit: int = READOUT_QUBIT
    description: str = field(default="", compare=False)

    @property
    def gates(self) -> tuple[TemplateGate, ...]:
        return tuple(gate for layer in self.layers for gate in layer)

    @property
    def layer_count(self) -> int:
        return len(self.layers)

    @property
    def is_image(self) -> bool:
        return self.conv_spec is not None

    @property
    def n_free_weights(self) -> int:
        """Circuit angles that are trained directly (not produced by kernels)."""
        return self.n_weights - self.n_data_slots


# Token expansion. Each token maps to a list of layers; a layer is a list of
# (kind, qubits, role) where role numbers the slot later.
_Role = Literal["merged", "data", "free", "euler"] | None
_RawGate = tuple[GateKind, tuple[int, ...], _Role]

_ENTANGLER_LAYERS: dict[str, list[list[tuple[int, int]]]] = {
    "chain_down": [[(0, 1)], [(1, 2)], [(2, 3)]],
    "chain_up": [[(2, 3)], [(1, 2)], [(0, 1)]],
    "brick_even": [[(0, 1), (2, 3)]],
    "brick_odd": [[(1, 2)]],
}


def _expand_token(token: str) -> list[list[_RawGate]]:
    qubits = range(N_QUBITS)
    if token in _ENTANGLER_LAYERS:
        return [[("FSIM", pair, None) for pair in layer] for layer in _ENTANGLER_LAYERS[token]]
    if token == "encode":
        return [[("RX", (q,), "merged") for q in qubits]]
    rotations: dict[str, tuple[GateKind, _Role]] = {
        "free_x": ("RX", "free"),
        "free_y": ("RY", "free"),
        "data_x": ("RX", "data"),
        "data_y": ("RY", "data"),
    }
    if token in rotations:
        kind, role = rotations[token]
        return [[(kind, (q,), role) for q in qubits]]
    if token == "euler":
        return [[(kind, (READOUT_QUBIT,), "euler")] for kind in ("RY", "RX", "RY")]
    raise InvalidArgumentError(f"unknown layer token {token!r} in architecture catalog")


@lru_cache(maxsize=1)
def load_catalog() -> dict[str, Any]:
    """Parsed architecture catalog."""
    with open(CATALOG_PATH) as f:
        catalog: dict[str, Any] = yaml.safe_load(f)
    return catalog


def _recipe(arch_id: str, conv_spec: ConvSpec | None) -> tuple[list[str], str]:
    catalog = load_catalog()
    if arch_id not in catalog:
        raise InvalidArgumentError(f"unknown architecture {arch_id!r}; choose from {sorted(catalog)}")
    entry = catalog[arch_id]
    description = entry.get("description", "")
    if "layers" in entry:
        if conv_spec is not None:
            raise InvalidArgumentError(f"{arch_id} takes tabular features, not a convolution spec")
        return list(entry["layers"]), description
    if conv_spec is None:
        raise InvalidArgumentError(f"{arch_id} needs a convolution spec")
    variants = entry["variants"]
    if conv_spec.key not in variants:
        raise InvalidArgumentError(
            f"{arch_id} has no {conv_spec.key} variant; available: {sorted(variants)}"
        )
    return [token for group in variants[conv_spec.key] for token in group], description


def build_template(
    arch_id: str, conv_spec: ConvSpec | None = None, fsim: FSimParams | None = None
) -> CircuitTemplate:
    """Build the catalog template for ``arch_id``.

    For image architectures the returned template carries ``conv_spec`` with ``passes``
    set to the number of passes its data slots need.
    """
    fsim = fsim or FSimParams()
    tokens, description = _recipe(arch_id, conv_spec)
    raw_layers = [layer for token in tokens for layer in _expand_token(token)]
    raw_gates = [gate for layer in raw_layers for gate in layer]

    # data angles first, free angles next, Euler angles last
    counts = {role: sum(1 for *_, r in raw_gates if r == role) for role in ("merged", "data", "free")}
    next_index = {
        "merged": 0,
        "data": counts["merged"],
        "free": counts["merged"] + counts["data"],
        "euler": counts["merged"] + counts["data"] + counts["free"],
    }
    n_features = 0
    layers = []
    for raw_layer in raw_layers:
        layer = []
        for kind, qubits, role in raw_layer:
            slot: ParamSlot | None = None
            if role == "merged":
                slot = MergedSlot(feature=n_features, weight=next_index["merged"])
                n_features += 1
            elif role is not None:
                slot = WeightSlot(next_index[role])
            if role is not None:
                next_index[role] += 1
            layer.append(TemplateGate(kind, qubits, slot))
        layers.append(tuple(layer))

    n_weights = next_index["euler"]
    n_data = counts["data"]
    if conv_spec is not None:
        conv_spec = replace(conv_spec, passes=conv_spec.passes_for(n_data))
    template = CircuitTemplate(
        arch_id=arch_id,
        layers=tuple(layers),
        fsim=fsim,
        n_features=n_features,
        n_weights=n_weights,
        n_data_slots=n_data,
        conv_spec=conv_spec,
        description=description,
    )
    logger.debug(
        "Built %s: %d circuit angles, %d layers", arch_id, n_weights, template.layer_count
    )
    return template


def param_count(template: CircuitTemplate) -> int:
    """Number of distinct circuit angle slots."""
    return template.n_weights


def trainable_count(template: CircuitTemplate) -> int:
    """Full trainable dimension: kernels and biases, free circuit angles and the output bias.

    Simple templates train their circuit angles only.
    """
    if template.conv_spec is None:
        return template.n_weights
    per_kernel = template.conv_spec.kernel_size + 1
    return template.n_data_slots * per_kernel + template.n_free_weights + 1


def template_duration_ns(
    template: CircuitTemplate, layer_ns: int = LAYER_NS, readout_ns: int = READOUT_NS
) -> int:
    """Duration of one circuit run including readout."""
    return template.layer_count * layer_ns + readout_ns


def _as_rows(values: np.ndarray | None, width: int, what: str) -> np.ndarray | None:
    if values is None:
        if width:
            raise InvalidArgumentError(f"template needs {width} {what}, got none")
        return None
    array = np.asarray(values, dtype=float)
    if array.ndim == 1:
        array = array[None, :]
    if array.ndim != 2 or array.shape[1] != width:
        raise InvalidArgumentError(f"template needs {width} {what}, got shape {array.shape}")
    return array


def _slot_angles(
    slot: ParamSlot | None, features: np.ndarray | None, theta: np.ndarray
) -> np.ndarray | float:
    if isinstance(slot, WeightSlot):
        return theta[:, slot.index]
    if isinstance(slot, MergedSlot):
        assert features is not None
        return features[:, slot.feature] + theta[:, slot.weight]
    if isinstance(slot, FeatureSlot):
        assert features is not None
        return features[:, slot.index]
    if isinstance(slot, FixedAngle):
        return slot.value
    raise InvalidArgumentError(f"rotation without a parameter slot: {slot!r}")


def evaluate_batch(
    template: CircuitTemplate,
    features: np.ndarray | None,
    theta: np.ndarray,
    mode: MeasurementMode | None = None,
) -> np.ndarray:
    """Readout expectation for every row of ``theta`` (and of ``features``).

    ``theta`` has shape ``(batch, n_weights)`` and ``features`` ``(batch, n_features)``;
    a single row of either is broadcast against the other.
    """
    theta_rows = _as_rows(theta, template.n_weights, "circuit angles")
    feature_rows = _as_rows(features, template.n_features, "feature angles")
    assert theta_rows is not None
    batch = max(theta_rows.shape[0], 0 if feature_rows is None else feature_rows.shape[0])
    theta_rows = np.broadcast_to(theta_rows, (batch, template.n_weights))
    if feature_rows is not None:
        feature_rows = np.broadcast_to(feature_rows, (batch, template.n_features))

    n = template.n_qubits
    amps = ground_block(n, batch)
    for layer in template.layers:
        for gate in layer:
            if gate.kind == "FSIM":
                qa, qb = gate.qubits
                amps = apply_fsim_batch(amps, n, qa, qb, template.fsim.theta, template.fsim.phi)
            else:
                angles = _slot_angles(gate.slot, feature_rows, theta_rows)
                axis = _AXES[gate.kind]
                amps = apply_rotation_batch(amps, n, gate.qubits[0], axis, angles)
    expectations = expect_z_batch(amps, n, template.readout_qubit)
    if mode is None or isinstance(mode, Exact):
        return expectations
    return sample_expect_z_batch(expectations, mode.count, mode.stream)


def bind_and_run(
    template: CircuitTemplate,
    feature_angles: np.ndarray | list[float] | None,
    theta: np.ndarray | list[float],
    mode: MeasurementMode | None = None,
) -> float:
    """Prediction ``g`` for one input and one circuit angle vector."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (template.n_weights,):
        raise InvalidArgumentError(
            f"{template.arch_id} has {template.n_weights} circuit angles, got {theta.shape}"
        )
    if feature_angles is not None:
        feature_angles = np.asarray(feature_angles, dtype=float)
        if feature_angles.shape != (template.n_features,):
            raise InvalidArgumentError(
                f"{template.arch_id} takes {template.n_features} feature angles, "
                f"got {feature_angles.shape}"
            )
    return float(evaluate_batch(template, feature_angles, theta, mode)[0])


def describe_template(template: CircuitTemplate) -> str:
    """One-line versioned text form, embedded in checkpoints."""
    conv = template.conv_spec.describe() if template.conv_spec is not None else "none"
    return (
        f"{TEMPLATE_FORMAT} arch={template.arch_id} fsim_theta={template.fsim.theta!r} "
        f"fsim_phi={template.fsim.phi!r} conv={conv}"
    )


def parse_template_description(text: str) -> CircuitTemplate:
    """Rebuild a template from ``describe_template`` output."""
    head, *pairs = text.strip().split()
    if head != TEMPLATE_FORMAT:
        raise InvalidArgumentError(f"unsupported template format {head!r}, expected {TEMPLATE_FORMAT}")
    try:
        fields = dict(pair.split("=", 1) for pair in pairs)
        fsim = FSimParams(float(fields["fsim_theta"]), float(fields["fsim_phi"]))
        arch_id = fields["arch"]
        conv_text = fields["conv"]
    except (KeyError, ValueError) as e:
        raise InvalidArgumentError(f"malformed template description {text!r}") from e
    conv_spec = None if conv_text == "none" else ConvSpec.parse(conv_text)
    template = build_template(arch_id, conv_spec, fsim)
    if conv_spec is not None and template.conv_spec != conv_spec:
        raise InvalidArgumentError(
            f"template description {conv_text} disagrees with the {arch_id} layout"
        )
    return template
