"""Tests for circuit templates."""

import math

import numpy as np
import pytest

from pqc_reupload.circuits import (
    ARCH_IDS,
    FSimParams,
    MergedSlot,
    WeightSlot,
    bind_and_run,
    build_template,
    describe_template,
    evaluate_batch,
    param_count,
    parse_template_description,
    template_duration_ns,
    trainable_count,
)
from pqc_reupload.encoding import ConvSpec
from pqc_reupload.errors import InvalidArgumentError


class TestSimpleTemplates:
    """Test the tabular architectures."""

    def test_simple_a_counts(self, simple_template):
        """Test simple-a has 15 circuit angles in 12 layers."""
        assert param_count(simple_template) == 15
        assert trainable_count(simple_template) == 15
        assert simple_template.layer_count == 12
        assert simple_template.n_features == 4

    @pytest.mark.parametrize("arch_id", [a for a in ARCH_IDS if a.startswith("simple-")])
    def test_all_simple_archs_share_the_parameter_layout(self, arch_id):
        """Test every tabular architecture has 4 merged, 8 free and 3 Euler angles."""
        template = build_template(arch_id)
        assert param_count(template) == 15
        assert template.n_features == 4

    def test_first_layer_merges_features(self, simple_template):
        """Test the first layer is RX(feature_i + theta_i) on every qubit."""
        first = simple_template.layers[0]
        assert [g.kind for g in first] == ["RX"] * 4
        assert [g.slot for g in first] == [MergedSlot(i, i) for i in range(4)]

    def test_layers_hold_one_gate_per_qubit(self):
        """Test no layer acts twice on a qubit."""
        specs = {"mnist-a": "3x3/1", "mnist-b": "2x2/2", "mnist-c": "3x3/2"}
        for arch_id in ARCH_IDS:
            spec = ConvSpec.parse(specs[arch_id]) if arch_id in specs else None
            for layer in build_template(arch_id, spec).layers:
                qubits = [q for gate in layer for q in gate.qubits]
                assert len(qubits) == len(set(qubits))

    def test_euler_angles_are_last(self, simple_template):
        """Test the readout Euler rotations use the last three circuit angles."""
        euler = [layer[0] for layer in simple_template.layers[-3:]]
        assert [g.kind for g in euler] == ["RY", "RX", "RY"]
        assert [g.slot for g in euler] == [WeightSlot(12), WeightSlot(13), WeightSlot(14)]

    def test_duration(self, simple_template):
        """Test 12 layers of 80 ns plus a 500 ns readout."""
        assert template_duration_ns(simple_template) == 1460


class TestImageTemplates:
    """Test the convolutional architectures."""

    def test_default_image_template(self, image_template):
        """Test mnist-c 3x3/2 has 24 kernels over two passes and 244 trainables."""
        assert image_template.n_data_slots == 24
        assert image_template.conv_spec.passes == 2
        assert param_count(image_template) == 27
        assert trainable_count(image_template) == 244
        assert image_template.layer_count == 15

    @pytest.mark.parametrize(
        "arch_id, spec, params, layers",
        [
            ("mnist-a", "2x2/1", 248, 27),
            ("mnist-c", "2x2/2", 92, 15),
            ("mnist-b", "2x2/2", 164, 17),
            ("mnist-c", "3x3/2", 244, 15),
            ("mnist-a", "3x3/1", 376, 27),
        ],
    )
    def test_architecture_table(self, arch_id, spec, params, layers):
        """Test parameter and layer counts of the compared image configurations."""
        template = build_template(arch_id, ConvSpec.parse(spec))
        assert trainable_count(template) == params
        assert template.layer_count == layers

    def test_missing_variant(self):
        """Test an LRF shape the catalog does not list is rejected."""
        with pytest.raises(InvalidArgumentError, match="no 3x3/2 variant"):
            build_template("mnist-b", ConvSpec())

    def test_image_arch_needs_conv_spec(self):
        """Test image architectures require a convolution spec."""
        with pytest.raises(InvalidArgumentError):
            build_template("mnist-c")

    def test_simple_arch_rejects_conv_spec(self):
        """Test tabular architectures refuse a convolution spec."""
        with pytest.raises(InvalidArgumentError):
            build_template("simple-a", ConvSpec())

    def test_unknown_arch(self):
        """Test unknown architecture ids are rejected."""
        with pytest.raises(InvalidArgumentError, match="unknown architecture"):
            build_template("simple-z")


class TestEvaluation:
    """Test binding and running templates."""

    def test_zero_angles_give_one(self, simple_template):
        """Test f-Sim keeps |0000> so all-zero angles read out +1."""
        assert bind_and_run(simple_template, np.zeros(4), np.zeros(15)) == pytest.approx(1.0)

    def test_identity_entanglers_give_cosine(self):
        """Test with f-Sim(0, 0) only the readout qubit's rotations matter."""
        template = build_template("simple-a", fsim=FSimParams(0.0, 0.0))
        features = np.array([0.7, 1.1, -0.4, 2.0])
        theta = np.zeros(15)
        theta[0] = 0.2
        g = bind_and_run(template, features, theta)
        assert g == pytest.approx(math.cos(0.9))

    def test_batch_matches_single_runs(self, simple_template):
        """Test batched evaluation equals one run per row."""
        rng = np.random.default_rng(0)
        features = rng.uniform(-1.5, 1.5, (5, 4))
        theta = rng.uniform(-math.pi, math.pi, (5, 15))
        batch = evaluate_batch(simple_template, features, theta)
        single = [bind_and_run(simple_template, f, t) for f, t in zip(features, theta, strict=True)]
        np.testing.assert_allclose(batch, single, atol=1e-12)

    def test_output_range(self, simple_template):
        """Test predictions stay in [-1, 1]."""
        rng = np.random.default_rng(1)
        g = evaluate_batch(
            simple_template, rng.uniform(-2, 2, (50, 4)), rng.uniform(-4, 4, (50, 15))
        )
        assert np.all(np.abs(g) <= 1.0)

    def test_wrong_lengths(self, simple_template):
        """Test angle vectors of the wrong length are rejected."""
        with pytest.raises(InvalidArgumentError):
            bind_and_run(simple_template, np.zeros(4), np.zeros(14))
        with pytest.raises(InvalidArgumentError):
            bind_and_run(simple_template, np.zeros(3), np.zeros(15))

    def test_image_template_takes_no_features(self, image_template):
        """Test image templates run on circuit angles alone."""
        assert bind_and_run(image_template, None, np.zeros(27)) == pytest.approx(1.0)


class TestDescription:
    """Test the one-line template description."""

    def test_round_trip(self, image_template):
        """Test parsing a description rebuilds an equal template."""
        text = describe_template(image_template)
        assert text.startswith("pqc-template/1 arch=mnist-c ")
        assert text.endswith("conv=3x3/2/2")
        assert parse_template_description(text) == image_template

    def test_round_trip_keeps_fsim(self):
        """Test non-default f-Sim angles survive the round trip exactly."""
        template = build_template("simple-b", fsim=FSimParams(0.2 * math.pi, -0.5 * math.pi))
        assert parse_template_description(describe_template(template)).fsim == template.fsim

    def test_bad_format(self):
        """Test unknown description versions are rejected."""
        with pytest.raises(InvalidArgumentError):
            parse_template_description("pqc-template/9 arch=simple-a")
