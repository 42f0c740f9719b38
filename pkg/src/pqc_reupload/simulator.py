"""Ideal pure-state simulator for a small qubit register.

The register is a dense complex amplitude array with little-endian indexing: qubit ``q`` is
bit ``q`` of the basis index. Rotations follow ``R_P(theta) = exp(-i theta P / 2)`` and the
two-qubit interaction is the excitation-preserving f-Sim gate::

    f-Sim(theta, phi) = [[1, 0,              0,              0          ],
                         [0, cos theta,      -i sin theta,   0          ],
                         [0, -i sin theta,   cos theta,      0          ],
                         [0, 0,              0,              exp(-i phi)]]

All work is done on amplitude blocks of shape ``(batch, 2**n)`` so that many circuits that
share a gate layout (different samples, parameter shifts) run in one vectorized pass. The
single-state functions (``new_state``, ``apply_gate``, ``expect_z``, ``sample_expect_z``) are
wrappers over the batched kernels with a batch of one.

Example:
    >>> state = apply_gate(new_state(1), RX(0, math.pi / 2))
    >>> round(expect_z(state, 0), 12)
    0.0
"""

import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np

from pqc_reupload.errors import InvalidArgumentError

MAX_QUBITS = 12
NORM_TOLERANCE = 1e-10

# rows of random draws held in memory at once when sampling shots
_SHOT_BLOCK = 4_000_000

Axis = Literal["X", "Y"]


@dataclass(frozen=True)
class RX:
    """Rotation about X: exp(-i angle X / 2)."""

    qubit: int
    angle: float


@dataclass(frozen=True)
class RY:
    """Rotation about Y: exp(-i angle Y / 2)."""

    qubit: int
    angle: float


@dataclass(frozen=True)
class FSim:
    """f-Sim interaction between two distinct qubits."""

    qubit_a: int
    qubit_b: int
    theta: float
    phi: float


GateOp = RX | RY | FSim


@dataclass(frozen=True)
class Exact:
    """Exact expectation values."""


@dataclass(frozen=True, eq=False)
class Shots:
    """Expectation estimated from ``count`` projective measurements drawn from ``stream``."""

    count: int
    stream: np.random.Generator = field(repr=False)

    def __post_init__(self) -> None:
        if self.count < 1:
            raise InvalidArgumentError(f"shot count must be >= 1, got {self.count}")


MeasurementMode = Exact | Shots


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state of ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        _check_register(self.n_qubits)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise InvalidArgumentError(
                f"expected {2**self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )
        if abs(self.norm() - 1.0) > NORM_TOLERANCE:
            raise InvalidArgumentError(f"state is not normalized (norm={self.norm()!r})")

    def norm(self) -> float:
        """L2 norm of the amplitude vector."""
        return float(np.linalg.norm(self.amplitudes))


def _check_register(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise InvalidArgumentError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


def _check_qubit(qubit: int, n_qubits: int) -> None:
    if not 0 <= qubit < n_qubits:
        raise InvalidArgumentError(f"qubit index {qubit} out of range for {n_qubits} qubits")


def rx_matrix(angle: float) -> np.ndarray:
    """2x2 unitary of RX(angle)."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_matrix(angle: float) -> np.ndarray:
    """2x2 unitary of RY(angle)."""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def fsim_matrix(theta: float, phi: float) -> np.ndarray:
    """4x4 unitary of f-Sim(theta, phi) in the basis |00>, |01>, |10>, |11>."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, -1j * s, 0],
            [0, -1j * s, c, 0],
            [0, 0, 0, np.exp(-1j * phi)],
        ],
        dtype=complex,
    )


@lru_cache(maxsize=256)
def _pair_indices(
    n_qubits: int, qubit_a: int, qubit_b: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mask_a, mask_b = 1 << qubit_a, 1 << qubit_b
    index = np.arange(2**n_qubits)
    rest = index[(index & (mask_a | mask_b)) == 0]
    return rest | mask_b, rest | mask_a, rest | mask_a | mask_b


@lru_cache(maxsize=64)
def _z_signs(n_qubits: int, qubit: int) -> np.ndarray:
    bits = (np.arange(2**n_qubits) >> qubit) & 1
    return 1.0 - 2.0 * bits


def ground_block(n_qubits: int, batch: int) -> np.ndarray:
    """Amplitude block of ``batch`` copies of |0...0>."""
    _check_register(n_qubits)
    amps = np.zeros((batch, 2**n_qubits), dtype=complex)
    amps[:, 0] = 1.0
    return amps


def apply_rotation_batch(
    amps: np.ndarray, n_qubits: int, qubit: int, axis: Axis, angles: np.ndarray | float
) -> np.ndarray:
    """Apply a per-row X or Y rotation on ``qubit`` to an amplitude block."""
    _check_qubit(qubit, n_qubits)
    batch = amps.shape[0]
    view = amps.reshape(batch, 2 ** (n_qubits - 1 - qubit), 2, 2**qubit)
    half = np.broadcast_to(np.asarray(angles, dtype=float), (batch,)).reshape(batch, 1, 1) / 2
    c, s = np.cos(half), np.sin(half)
    a0, a1 = view[:, :, 0, :], view[:, :, 1, :]
    out = np.empty_like(view)
    if axis == "X":
        out[:, :, 0, :] = c * a0 - 1j * s * a1
        out[:, :, 1, :] = c * a1 - 1j * s * a0
    elif axis == "Y":
        out[:, :, 0, :] = c * a0 - s * a1
        out[:, :, 1, :] = s * a0 + c * a1
    else:
        raise InvalidArgumentError(f"unknown rotation axis {axis!r}")
    return out.reshape(batch, -1)


def apply_fsim_batch(
    amps: np.ndarray, n_qubits: int, qubit_a: int, qubit_b: int, theta: float, phi: float
) -> np.ndarray:
    """Apply the same f-Sim(theta, phi) to every row of an amplitude block."""
    _check_qubit(qubit_a, n_qubits)
    _check_qubit(qubit_b, n_qubits)
    if qubit_a == qubit_b:
        raise InvalidArgumentError(f"f-Sim needs two distinct qubits, got {qubit_a} twice")
    idx_01, idx_10, idx_11 = _pair_indices(n_qubits, qubit_a, qubit_b)
    c, s = np.cos(theta), np.sin(theta)
    a01, a10 = amps[:, idx_01], amps[:, idx_10]
    out = amps.copy()
    out[:, idx_01] = c * a01 - 1j * s * a10
    out[:, idx_10] = c * a10 - 1j * s * a01
    out[:, idx_11] = amps[:, idx_11] * np.exp(-1j * phi)
    return out


def expect_z_batch(amps: np.ndarray, n_qubits: int, qubit: int) -> np.ndarray:
    """Exact <Z_qubit> for every row of an amplitude block."""
    _check_qubit(qubit, n_qubits)
    probs = np.abs(amps) ** 2
    values: np.ndarray = np.clip(probs @ _z_signs(n_qubits, qubit), -1.0, 1.0)
    return values


def sample_expect_z_batch(
    expectations: np.ndarray, shots: int, stream: np.random.Generator
) -> np.ndarray:
    """Shot estimates of <Z> from exact expectations.

    Each row draws ``shots`` Bernoulli outcomes with p(+1) = (1 + g) / 2 and returns
    (n_plus - n_minus) / shots. Rows consume the stream in order.
    """
    if shots < 1:
        raise InvalidArgumentError(f"shots must be >= 1, got {shots}")
    p_plus = (1.0 + np.asarray(expectations, dtype=float)) / 2.0
    estimates = np.empty(p_plus.shape[0])
    rows = max(1, _SHOT_BLOCK // shots)
    for start in range(0, p_plus.shape[0], rows):
        chunk = p_plus[start : start + rows]
        draws = stream.random((chunk.shape[0], shots))
        n_plus = np.count_nonzero(draws < chunk[:, None], axis=1)
        estimates[start : start + rows] = (2 * n_plus - shots) / shots
    return estimates


def new_state(n_qubits: int) -> StateVector:
    """Ground state |0...0> of ``n_qubits`` qubits."""
    _check_register(n_qubits)
    return StateVector(n_qubits, ground_block(n_qubits, 1)[0])


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Return the state after applying ``gate``."""
    amps = state.amplitudes[None, :]
    n = state.n_qubits
    if isinstance(gate, RX):
        amps = apply_rotation_batch(amps, n, gate.qubit, "X", gate.angle)
    elif isinstance(gate, RY):
        amps = apply_rotation_batch(amps, n, gate.qubit, "Y", gate.angle)
    elif isinstance(gate, FSim):
        amps = apply_fsim_batch(amps, n, gate.qubit_a, gate.qubit_b, gate.theta, gate.phi)
    else:
        raise InvalidArgumentError(f"unsupported gate {gate!r}")
    return StateVector(n, amps[0])


def expect_z(state: StateVector, qubit: int) -> float:
    """Exact <Z> of ``qubit``."""
    return float(expect_z_batch(state.amplitudes[None, :], state.n_qubits, qubit)[0])


def sample_expect_z(
    state: StateVector, qubit: int, shots: int, stream: np.random.Generator
) -> float:
    """Shot-sampled <Z> of ``qubit``; deterministic for a given stream state."""
    exact = expect_z_batch(state.amplitudes[None, :], state.n_qubits, qubit)
    return float(sample_expect_z_batch(exact, shots, stream)[0])


def derive_seed(master_seed: int, *names: str | int) -> np.random.SeedSequence:
    """Seed sequence derived from the master seed and a path of names."""
    key = tuple(zlib.crc32(str(name).encode()) for name in names)
    return np.random.SeedSequence(entropy=master_seed, spawn_key=key)


def derive_rng(master_seed: int, *names: str | int) -> np.random.Generator:
    """Independent random stream for a named task, e.g. ``derive_rng(7, "split", 3)``."""
    return np.random.default_rng(derive_seed(master_seed, *names))


def derive_int_seed(master_seed: int, *names: str | int) -> int:
    """32-bit integer seed for libraries that take ``random_state``."""
    return int(derive_seed(master_seed, *names).generate_state(1)[0])
