"""Tests for feature encoding."""

import math

import numpy as np
import pytest

from pqc_reupload.datasets import LabeledDataset
from pqc_reupload.encoding import (
    ConvSpec,
    FeaturePipeline,
    FeatureSelector,
    bit_angles,
    KernelSet,
    Standardizer,
    conv_encode,
    default_selector,
    is_bit_matrix,
    make_pipeline,
    pad_and_tile,
    preprocess_simple,
    stump_importance,
    tile_images,
)
from pqc_reupload.errors import InvalidArgumentError


class TestConvSpec:
    """Test receptive field geometry."""

    def test_default_geometry(self):
        """Test 3x3 fields with stride 2 on the padded 9x7 image."""
        spec = ConvSpec()
        assert (spec.padded_rows, spec.padded_cols) == (9, 7)
        assert spec.row_starts() == [0, 2, 4, 6]
        assert spec.col_starts() == [0, 2, 4]
        assert spec.placements == 12
        assert spec.passes_for(24) == 2

    def test_stride_one(self):
        """Test 2x2 fields with stride 1 cover 48 placements in one pass."""
        spec = ConvSpec.parse("2x2/1")
        assert spec.placements == 48
        assert spec.passes_for(40) == 1

    def test_describe_round_trip(self):
        """Test the text form parses back to the same spec."""
        spec = ConvSpec(2, 2, 2, passes=3)
        assert spec.describe() == "2x2/2/3"
        assert ConvSpec.parse(spec.describe()) == spec

    @pytest.mark.parametrize("text", ["3x3", "axb/2", "3x3/x"])
    def test_parse_errors(self, text):
        """Test malformed spec strings are rejected."""
        with pytest.raises(InvalidArgumentError):
            ConvSpec.parse(text)

    def test_field_larger_than_image(self):
        """Test a receptive field must fit the padded image."""
        with pytest.raises(InvalidArgumentError):
            ConvSpec(lrf_rows=10)


class TestKernels:
    """Test kernel parameter layout."""

    def test_flatten_order(self):
        """Test each kernel's weights are followed by its bias."""
        kernels = KernelSet(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([5.0, 6.0]))
        np.testing.assert_array_equal(kernels.flatten(), [1, 2, 5, 3, 4, 6])
        again = KernelSet.from_flat(kernels.flatten(), 2, 2)
        np.testing.assert_array_equal(again.weights, kernels.weights)
        np.testing.assert_array_equal(again.biases, kernels.biases)

    def test_initial_range(self):
        """Test initial weights lie in [-0.1, 0.1] with zero biases."""
        kernels = KernelSet.initial(24, 9, np.random.default_rng(0))
        assert kernels.scalar_count == 240
        assert np.all(np.abs(kernels.weights) <= 0.1)
        assert np.all(kernels.biases == 0)

    def test_mismatched_shapes(self):
        """Test one bias per kernel is required."""
        with pytest.raises(InvalidArgumentError):
            KernelSet(np.zeros((3, 4)), np.zeros(2))


class TestTiling:
    """Test LRF patch extraction."""

    def test_first_patch(self):
        """Test the first patch is the top-left 3x3 block."""
        image = np.arange(56, dtype=float).reshape(8, 7)
        patches = pad_and_tile(image, ConvSpec())
        assert patches.shape == (24, 9)
        np.testing.assert_array_equal(patches[0], image[:3, :3].ravel())

    def test_bottom_row_is_zero_padding(self):
        """Test the last row of placements reads the zero pad row."""
        image = np.ones((8, 7))
        patches = pad_and_tile(image, ConvSpec())
        # placement 9 starts at row 6, column 0
        np.testing.assert_array_equal(patches[9].reshape(3, 3)[2], [0.0, 0.0, 0.0])

    def test_second_pass_repeats_placements(self):
        """Test pass two sees the same patches as pass one."""
        image = np.random.default_rng(0).random((8, 7))
        patches = pad_and_tile(image, ConvSpec())
        np.testing.assert_array_equal(patches[:12], patches[12:])

    def test_stack_matches_single_images(self):
        """Test tiling a stack equals tiling each image."""
        images = np.random.default_rng(1).random((3, 56))
        stacked = tile_images(images, ConvSpec())
        for i in range(3):
            np.testing.assert_array_equal(stacked[i], pad_and_tile(images[i].reshape(8, 7), ConvSpec()))

    def test_wrong_image_shape(self):
        """Test images must be 8x7."""
        with pytest.raises(InvalidArgumentError):
            pad_and_tile(np.zeros((8, 8)), ConvSpec())


class TestConvEncode:
    """Test convolution angles."""

    def test_sum_kernels(self):
        """Test unit kernels sum the pixels of each patch."""
        spec = ConvSpec()
        kernels = KernelSet(np.ones((24, 9)), np.zeros(24))
        angles = conv_encode(np.ones((8, 7)), spec, kernels)
        assert angles.shape == (24,)
        assert angles[0] == 9.0
        assert angles[9] == 6.0
        assert angles[12] == 9.0

    def test_bias_is_added(self):
        """Test a zero image yields the kernel biases."""
        kernels = KernelSet(np.ones((24, 9)), np.arange(24, dtype=float))
        np.testing.assert_array_equal(
            conv_encode(np.zeros((8, 7)), ConvSpec(), kernels), np.arange(24)
        )

    def test_wrong_kernel_count(self):
        """Test the kernel count must fill the configured passes."""
        with pytest.raises(InvalidArgumentError):
            conv_encode(np.zeros((8, 7)), ConvSpec(), KernelSet(np.ones((30, 9)), np.zeros(30)))

    def test_wrong_kernel_size(self):
        """Test kernel size must match the receptive field."""
        with pytest.raises(InvalidArgumentError):
            conv_encode(np.zeros((8, 7)), ConvSpec(), KernelSet(np.ones((24, 4)), np.zeros(24)))


class TestTabular:
    """Test tabular preprocessing."""

    def test_standardizer_zero_variance(self):
        """Test constant columns are centered with unit scale."""
        standardizer = Standardizer.fit(np.array([[1.0, 3.0], [1.0, 5.0]]))
        np.testing.assert_array_equal(standardizer.scale, [1.0, 1.0])
        np.testing.assert_array_equal(standardizer.transform(np.array([[1.0, 4.0]])), [[0.0, 0.0]])

    def test_preprocess_simple_range(self):
        """Test angles lie in (-pi/2, pi/2) and are zero at the training mean."""
        rng = np.random.default_rng(0)
        raw = rng.normal(10.0, 3.0, (50, 6))
        selector = FeatureSelector.named(["c4", "c1", "c2", "c0"], [f"c{j}" for j in range(6)])
        standardizer = Standardizer.fit(selector.select(raw))
        angles = preprocess_simple(raw, selector, standardizer)
        assert angles.shape == (50, 4)
        assert np.all(np.abs(angles) < math.pi / 2)
        mean_row = raw.mean(axis=0)
        np.testing.assert_allclose(preprocess_simple(mean_row, selector, standardizer), 0.0, atol=1e-12)

    def test_unknown_columns(self):
        """Test naming a column the data lacks is rejected."""
        with pytest.raises(InvalidArgumentError, match="unknown feature columns"):
            FeatureSelector.named(["proline"], ["alcohol"])

    def test_stump_ranking(self):
        """Test the separating column ranks first and ties go to the lower index."""
        rng = np.random.default_rng(0)
        labels = np.repeat([0, 1], 20)
        separating = labels + 0.1 * rng.random(40)
        features = np.column_stack([rng.random(40), separating, rng.random(40), separating])
        selector = stump_importance(LabeledDataset(features, labels), 2)
        assert selector.indices == (1, 3)
        assert selector.columns == ("x1", "x3")

    def test_stump_k_out_of_range(self):
        """Test k must be between 1 and the number of features."""
        dataset = LabeledDataset(np.zeros((4, 2)), np.array([0, 1, 0, 1]))
        with pytest.raises(InvalidArgumentError):
            stump_importance(dataset, 3)

    def test_default_selectors(self, parity):
        """Test few-feature datasets keep all columns."""
        selector = default_selector("parity", parity)
        assert selector.columns == ("b0", "b1", "b2", "b3")


class TestBits:
    """Test the encoding of 0/1 features."""

    def test_angles(self):
        """Test 0 and 1 map to -pi/2 and +pi/2."""
        half = math.pi / 2
        np.testing.assert_allclose(bit_angles(np.array([[0, 1, 1, 0]])), [[-half, half, half, -half]])

    def test_non_bits_rejected(self):
        """Test values other than 0 and 1 are refused."""
        with pytest.raises(InvalidArgumentError, match="all 0 or 1"):
            bit_angles(np.array([[0.0, 0.5]]))

    @pytest.mark.parametrize(
        "features, expected",
        [
            (np.array([[0, 1], [1, 1]]), True),
            (np.array([[0.0, 2.0]]), False),
            (np.zeros((0, 4)), False),
        ],
    )
    def test_is_bit_matrix(self, features, expected):
        """Test detection of 0/1 matrices."""
        assert is_bit_matrix(features) is expected

    def test_parity_pipeline(self, parity):
        """Test parity columns are encoded as bits, not z-scores."""
        pipeline = make_pipeline("parity", parity)
        assert pipeline.describe() == "bits; columns=b0|b1|b2|b3"
        encoded = pipeline.encode(parity)
        np.testing.assert_allclose(np.abs(encoded.inputs), math.pi / 2)

    def test_describe_round_trip(self, parity):
        """Test the bit pipeline survives describe and parse."""
        pipeline = make_pipeline("parity", parity)
        parsed = FeaturePipeline.parse(pipeline.describe(), parity.column_names())
        assert parsed.bits
        np.testing.assert_array_equal(parsed.encode(parity).inputs, pipeline.encode(parity).inputs)

    def test_continuous_columns_stay_tabular(self, toy_multiclass):
        """Test real-valued features still get the arctan of z-scores."""
        pipeline = make_pipeline("toy", toy_multiclass)
        assert pipeline.describe().startswith("tabular; ")


class TestFeaturePipeline:
    """Test the fitted pipeline and its text form."""

    def test_describe_round_trip_with_spaces(self):
        """Test column names containing spaces survive describe and parse."""
        columns = ["worst radius", "mean texture", "other"]
        data = LabeledDataset(
            np.random.default_rng(0).random((10, 3)), np.repeat([0, 1], 5), tuple(columns)
        )
        selector = FeatureSelector.named(["mean texture", "worst radius"], columns)
        pipeline = FeaturePipeline.fit_tabular(data, selector)
        parsed = FeaturePipeline.parse(pipeline.describe(), columns)
        np.testing.assert_array_equal(parsed.encode(data).inputs, pipeline.encode(data).inputs)

    def test_image_pipeline(self, toy_images):
        """Test images are tiled, not standardized."""
        pipeline = make_pipeline("mnist", toy_images, ConvSpec())
        assert pipeline.describe() == "images; conv=3x3/2/2"
        encoded = pipeline.encode(toy_images)
        assert encoded.inputs.shape == (12, 24, 9)

    def test_needs_selector_or_spec(self):
        """Test a pipeline is either tabular or image."""
        with pytest.raises(InvalidArgumentError):
            FeaturePipeline()

    def test_parse_unknown_kind(self):
        """Test unknown preprocessing kinds are rejected."""
        with pytest.raises(InvalidArgumentError):
            FeaturePipeline.parse("audio; rate=8000", ["a"])
