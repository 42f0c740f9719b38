"""Tests for the statevector simulator."""

import math

import numpy as np
import pytest

from pqc_reupload.errors import InvalidArgumentError
from pqc_reupload.simulator import (
    RX,
    RY,
    FSim,
    Shots,
    apply_fsim_batch,
    apply_gate,
    apply_rotation_batch,
    derive_int_seed,
    derive_rng,
    expect_z,
    expect_z_batch,
    fsim_matrix,
    ground_block,
    new_state,
    sample_expect_z,
    sample_expect_z_batch,
)


def _random_block(n_qubits: int, batch: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal((batch, 2**n_qubits)) + 1j * rng.standard_normal((batch, 2**n_qubits))
    return amps / np.linalg.norm(amps, axis=1, keepdims=True)


class TestState:
    """Test register creation."""

    def test_ground_state(self):
        """Test a new register is |0...0>."""
        state = new_state(4)
        assert state.amplitudes[0] == 1.0
        assert np.count_nonzero(state.amplitudes) == 1
        assert expect_z(state, 3) == pytest.approx(1.0)

    @pytest.mark.parametrize("n_qubits", [0, 13])
    def test_register_size_out_of_range(self, n_qubits):
        """Test register sizes outside [1, 12] are rejected."""
        with pytest.raises(InvalidArgumentError):
            new_state(n_qubits)


class TestRotations:
    """Test single-qubit rotation kernels."""

    def test_rx_pi_flips_with_phase(self):
        """Test RX(pi) maps |0> to -i|1>."""
        state = apply_gate(new_state(1), RX(0, math.pi))
        assert state.amplitudes[1] == pytest.approx(-1j)
        assert expect_z(state, 0) == pytest.approx(-1.0)

    def test_little_endian_indexing(self):
        """Test qubit q is bit q of the basis index."""
        state = apply_gate(new_state(3), RX(2, math.pi))
        assert abs(state.amplitudes[4]) == pytest.approx(1.0)

    def test_ry_quarter_turn(self):
        """Test RY(pi/2) gives a real equal superposition."""
        state = apply_gate(new_state(1), RY(0, math.pi / 2))
        np.testing.assert_allclose(state.amplitudes, [1 / math.sqrt(2), 1 / math.sqrt(2)])
        assert expect_z(state, 0) == pytest.approx(0.0, abs=1e-12)

    def test_expectation_is_cosine(self):
        """Test <Z> after RX(a) equals cos(a) for a batch of angles."""
        angles = np.linspace(-math.pi, math.pi, 9)
        amps = apply_rotation_batch(ground_block(2, 9), 2, 1, "X", angles)
        np.testing.assert_allclose(expect_z_batch(amps, 2, 1), np.cos(angles), atol=1e-12)

    def test_bad_qubit(self):
        """Test a qubit index outside the register is rejected."""
        with pytest.raises(InvalidArgumentError):
            apply_gate(new_state(2), RX(2, 0.1))

    def test_bad_axis(self):
        """Test only X and Y rotations exist."""
        with pytest.raises(InvalidArgumentError):
            apply_rotation_batch(ground_block(1, 1), 1, 0, "Z", 0.3)  # type: ignore[arg-type]


class TestFSim:
    """Test the two-qubit f-Sim kernel."""

    @pytest.mark.parametrize("theta", np.linspace(0, 2 * math.pi, 5))
    @pytest.mark.parametrize("phi", np.linspace(-math.pi, math.pi, 5))
    def test_matrix_is_unitary(self, theta, phi):
        """Test f-Sim is unitary over a grid of angles."""
        matrix = fsim_matrix(theta, phi)
        np.testing.assert_allclose(matrix @ matrix.conj().T, np.eye(4), atol=1e-12)

    def test_full_swap(self):
        """Test f-Sim(pi/2, 0) swaps |01> and |10> with a -i phase."""
        state = apply_gate(apply_gate(new_state(2), RX(0, math.pi)), FSim(0, 1, math.pi / 2, 0.0))
        # -i|q0=1> becomes (-i)(-i)|q1=1>
        assert state.amplitudes[2] == pytest.approx(-1.0)
        assert abs(state.amplitudes[1]) == pytest.approx(0.0, abs=1e-12)

    def test_kernel_matches_dense_matrix(self):
        """Test the batched kernel agrees with the 4x4 matrix on random states."""
        amps = _random_block(2, 3, seed=1)
        out = apply_fsim_batch(amps, 2, 0, 1, 0.7, -0.4)
        # matrix basis |q0 q1> = 00, 01, 10, 11 in little-endian indices
        order = [0, 2, 1, 3]
        expected = amps[:, order] @ fsim_matrix(0.7, -0.4).T
        np.testing.assert_allclose(out[:, order], expected, atol=1e-12)

    def test_same_qubit_rejected(self):
        """Test f-Sim needs two distinct qubits."""
        with pytest.raises(InvalidArgumentError):
            apply_gate(new_state(2), FSim(1, 1, 0.1, 0.1))

    def test_ground_state_is_invariant(self):
        """Test f-Sim leaves |00> untouched."""
        state = apply_gate(new_state(2), FSim(0, 1, 1.3, 0.9))
        assert state.amplitudes[0] == pytest.approx(1.0)


class TestNormalization:
    """Test norm preservation."""

    def test_norm_drift_over_random_sequences(self):
        """Test 100 random gates keep the norm within 1e-10."""
        rng = np.random.default_rng(2024)
        for _ in range(5):
            state = new_state(4)
            for _ in range(100):
                kind = rng.integers(3)
                if kind == 0:
                    gate = RX(int(rng.integers(4)), float(rng.uniform(-7, 7)))
                elif kind == 1:
                    gate = RY(int(rng.integers(4)), float(rng.uniform(-7, 7)))
                else:
                    a, b = rng.choice(4, size=2, replace=False)
                    gate = FSim(int(a), int(b), float(rng.uniform(-7, 7)), float(rng.uniform(-7, 7)))
                state = apply_gate(state, gate)
            assert abs(state.norm() - 1.0) < 1e-10


class TestShots:
    """Test the shot-sampled estimator."""

    def test_deterministic_for_a_seed(self):
        """Test the same stream state gives the same estimate."""
        state = apply_gate(new_state(1), RX(0, 1.0))
        first = sample_expect_z(state, 0, 500, derive_rng(3, "shots"))
        second = sample_expect_z(state, 0, 500, derive_rng(3, "shots"))
        assert first == second

    def test_extreme_expectations_are_exact(self):
        """Test +-1 expectations are reproduced without noise."""
        estimates = sample_expect_z_batch(np.array([1.0, -1.0]), 50, derive_rng(0, "x"))
        np.testing.assert_array_equal(estimates, [1.0, -1.0])

    def test_unbiased(self):
        """Test the mean of many shots approaches the exact value."""
        estimate = sample_expect_z_batch(np.array([0.3]), 20000, derive_rng(1, "bias"))[0]
        assert estimate == pytest.approx(0.3, abs=0.03)

    def test_variance(self):
        """Test the spread of estimates matches (1 - g^2) / shots."""
        g, shots = 0.4, 100
        estimates = sample_expect_z_batch(np.full(400, g), shots, derive_rng(1, "variance"))
        assert estimates.var() == pytest.approx((1 - g**2) / shots, rel=0.35)

    def test_estimates_on_shot_grid(self):
        """Test estimates are multiples of 2 / shots."""
        estimates = sample_expect_z_batch(np.array([0.1, -0.6]), 10, derive_rng(4, "grid"))
        half_steps = estimates * 10 / 2
        np.testing.assert_allclose(half_steps, np.round(half_steps), atol=1e-9)

    def test_zero_shots_rejected(self):
        """Test a shot count below one is rejected."""
        with pytest.raises(InvalidArgumentError):
            Shots(0, derive_rng(0))


class TestSeeding:
    """Test named seed derivation."""

    def test_same_names_same_stream(self):
        """Test derivation is a pure function of seed and names."""
        assert derive_rng(7, "split", 3).random() == derive_rng(7, "split", 3).random()

    def test_names_separate_streams(self):
        """Test different names give independent streams."""
        assert derive_rng(7, "init").random() != derive_rng(7, "batch").random()
        assert derive_int_seed(7, "split", 0) != derive_int_seed(7, "split", 1)
