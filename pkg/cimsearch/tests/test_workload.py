"""
Tests for workload expansion and histograms
"""
import numpy as np
import pytest

from cimsearch.exceptions import EmptyHistogram, InvalidGenome, PrecisionOutOfRange
from cimsearch.models.schemas import (
    ConvKind,
    DistributionKind,
    Histogram,
    LayerHistograms,
    ValueDistribution,
)
from cimsearch.services.space import design_from_document, reference_design
from cimsearch.services.streams import SYNTH_VALUES, stream
from cimsearch.services.workload import (
    activity_factor,
    build_histogram,
    build_layer_histograms,
    expand_model,
    layer_activity,
    make_divisible,
    synth_values,
    total_macs,
)


class TestExpandModel:
    """Test per-layer workloads of a genome"""

    def test_tiny_reference_layers(self, tiny_spec):
        """Test layer list of the tiny reference network"""
        design = reference_design(tiny_spec)
        layers = expand_model(tiny_spec, design.model, design.quant)
        assert [l.layer_id for l in layers] == [
            "stem",
            "s0.b0.expand", "s0.b0.dw", "s0.b0.project",
            "s0.b1.expand", "s0.b1.dw", "s0.b1.project",
            "last_conv", "classifier",
        ]

    def test_stem_shape(self, tiny_spec):
        """Test stem rows, columns and data sizes"""
        design = reference_design(tiny_spec)
        stem = expand_model(tiny_spec, design.model, design.quant)[0]
        assert (stem.rows, stem.cols, stem.positions) == (27, 16, 256)
        assert stem.macs == 27 * 16 * 256
        assert stem.input_bytes == 3 * 32 * 32
        assert stem.weight_bits == 8

    def test_depthwise_shape(self, tiny_spec):
        """Test depthwise layer matrix view and stride"""
        design = reference_design(tiny_spec)
        dw = expand_model(tiny_spec, design.model, design.quant)[2]
        assert dw.kind == ConvKind.DEPTHWISE
        assert (dw.rows, dw.cols) == (9, 96)
        assert dw.positions == 64
        assert dw.weight_count == 9 * 96
        assert dw.macs == 9 * 96 * 64

    def test_classifier_is_linear(self, tiny_spec):
        """Test classifier after global pooling"""
        design = reference_design(tiny_spec)
        classifier = expand_model(tiny_spec, design.model, design.quant)[-1]
        assert classifier.kind == ConvKind.LINEAR
        assert classifier.positions == 1
        assert (classifier.rows, classifier.cols) == (64, 10)

    def test_shallower_network_has_fewer_macs(self, tiny_spec):
        """Test that dropping a block removes its three layers"""
        deep = reference_design(tiny_spec)
        shallow = reference_design(tiny_spec).model.model_copy(update={"depths": (1,)})
        deep_layers = expand_model(tiny_spec, deep.model, deep.quant)
        shallow_layers = expand_model(tiny_spec, shallow, deep.quant)
        assert len(deep_layers) - len(shallow_layers) == 3
        assert total_macs(shallow_layers) < total_macs(deep_layers)

    def test_mobilenet_macs_by_hand(self, reference_spec):
        """Test total MACs at 224 with depth 2, k=3, e=4 in every stage"""
        design = design_from_document(reference_spec, {
            "model": {"depths": [2] * 6, "kernels": [[3, 3]] * 6, "expansions": [[4, 4]] * 6},
        })
        layers = expand_model(reference_spec, design.model, design.quant)
        head = 27 * 32 * 112**2 + 9 * 32 * 112**2 + 32 * 16 * 112**2
        stage0 = (16 * 64 * 112**2 + 9 * 64 * 56**2 + 64 * 24 * 56**2
                  + 24 * 96 * 56**2 + 9 * 96 * 56**2 + 96 * 24 * 56**2)
        stage1 = (24 * 96 * 56**2 + 9 * 96 * 28**2 + 96 * 32 * 28**2
                  + 32 * 128 * 28**2 + 9 * 128 * 28**2 + 128 * 32 * 28**2)
        stage2 = (32 * 128 * 28**2 + 9 * 128 * 14**2 + 128 * 64 * 14**2
                  + 64 * 256 * 14**2 + 9 * 256 * 14**2 + 256 * 64 * 14**2)
        stage3 = (64 * 256 * 14**2 + 9 * 256 * 14**2 + 256 * 96 * 14**2
                  + 96 * 384 * 14**2 + 9 * 384 * 14**2 + 384 * 96 * 14**2)
        stage4 = (96 * 384 * 14**2 + 9 * 384 * 7**2 + 384 * 160 * 7**2
                  + 160 * 640 * 7**2 + 9 * 640 * 7**2 + 640 * 160 * 7**2)
        stage5 = (160 * 640 * 7**2 + 9 * 640 * 7**2 + 640 * 320 * 7**2
                  + 320 * 1280 * 7**2 + 9 * 1280 * 7**2 + 1280 * 320 * 7**2)
        tail = 320 * 1280 * 7**2 + 1280 * 1000
        expected = head + stage0 + stage1 + stage2 + stage3 + stage4 + stage5 + tail
        assert expected == 208_776_576
        assert total_macs(layers) == expected
        assert len(layers) == 3 + 6 * 2 * 3 + 2

    def test_doubled_expansion(self, tiny_spec):
        """Test that e=3 -> 6 doubles expand columns and project rows"""
        wide = reference_design(tiny_spec)
        narrow = wide.model.model_copy(update={"expansions": ((3.0, 3.0),)})
        wide_layers = {l.layer_id: l for l in expand_model(tiny_spec, wide.model, wide.quant)}
        narrow_layers = {l.layer_id: l for l in expand_model(tiny_spec, narrow, wide.quant)}
        for block in ("s0.b0", "s0.b1"):
            assert wide_layers[f"{block}.expand"].cols == 2 * narrow_layers[f"{block}.expand"].cols
            assert wide_layers[f"{block}.project"].rows == 2 * narrow_layers[f"{block}.project"].rows
            assert wide_layers[f"{block}.expand"].rows == narrow_layers[f"{block}.expand"].rows
            assert wide_layers[f"{block}.project"].cols == narrow_layers[f"{block}.project"].cols

    def test_resolution_must_divide(self, tiny_spec):
        """Test that a resolution not divisible by the stride is rejected"""
        design = reference_design(tiny_spec)
        with pytest.raises(InvalidGenome, match="cumulative stride 4"):
            expand_model(tiny_spec, design.model, design.quant, input_resolution=30)

    def test_kernel_outside_choices(self, tiny_spec):
        """Test genome value validation"""
        design = reference_design(tiny_spec)
        model = design.model.model_copy(update={"kernels": ((7, 3),)})
        with pytest.raises(InvalidGenome):
            expand_model(tiny_spec, model, design.quant)

    def test_resnet_bottleneck(self, resnet_spec):
        """Test reduce / conv / restore triplet with width scaling"""
        design = reference_design(resnet_spec)
        layers = {l.layer_id: l for l in expand_model(resnet_spec, design.model, design.quant)}
        assert layers["s0.b0.reduce"].cols == 88
        assert layers["s0.b0.conv"].kind == ConvKind.STANDARD
        assert layers["s0.b0.conv"].rows == 88 * 9
        assert layers["s0.b0.restore"].cols == 256
        assert layers["s0.b0.reduce"].positions == 56 * 56

    def test_make_divisible(self):
        """Test channel rounding"""
        assert make_divisible(37.5) == 40
        assert make_divisible(3) == 8
        assert make_divisible(256 * 0.35) == 88


class TestHistograms:
    """Test synthetic values, histograms and activity factors"""

    def test_build_histogram(self):
        """Test binning onto quantization levels"""
        h = build_histogram([0.0, 1.0, 0.5], 1)
        assert h.bins.tolist() == [1, 2]
        assert h.total == 3
        assert activity_factor(h) == pytest.approx(2 / 3)

    def test_signed_values_fold(self):
        """Test that negative values count by magnitude"""
        h = build_histogram([-0.5, 0.5], 2)
        assert h.bins.tolist() == [0, 0, 2, 0]

    @pytest.mark.parametrize("precision", [0, 17])
    def test_precision_range(self, precision):
        """Test rejected precisions"""
        with pytest.raises(PrecisionOutOfRange):
            build_histogram([0.1], precision)

    def test_empty_histogram(self):
        """Test activity of an empty histogram"""
        with pytest.raises(EmptyHistogram):
            activity_factor(Histogram(precision=4, bins=np.zeros(16, dtype=np.int64), total=0))

    def test_constant_extremes(self):
        """Test activity of all-zero and all-one tensors"""
        rng = stream(0, SYNTH_VALUES)
        ones = synth_values(ValueDistribution(kind=DistributionKind.CONSTANT, value=1.0), 50, rng)
        zeros = synth_values(ValueDistribution(kind=DistributionKind.CONSTANT, value=0.0), 50, rng)
        assert activity_factor(build_histogram(ones, 8)) == pytest.approx(1.0)
        assert activity_factor(build_histogram(zeros, 8)) == 0.0

    def test_layer_activity_is_product(self):
        """Test that layer activity multiplies input and weight activity"""
        full = build_histogram(np.ones(10), 4)
        half = build_histogram(np.full(10, 0.2), 4)
        pair = LayerHistograms(inputs=full, weights=half)
        assert layer_activity(pair) == pytest.approx(activity_factor(half))

    def test_uniform_mean(self):
        """Test that the uniform distribution averages 0.5 at n = 10^6"""
        values = synth_values(ValueDistribution(kind=DistributionKind.UNIFORM_NONNEG), 1_000_000,
                              stream(6, SYNTH_VALUES))
        assert abs(values.mean() - 0.5) < 0.002

    @pytest.mark.parametrize("precision", [1, 2, 4, 8])
    def test_activity_is_monotone(self, precision):
        """Test that larger magnitudes never lower the activity factor"""
        rng = stream(8, SYNTH_VALUES)
        values = rng.random(2000)
        previous = 0.0
        for gain in (0.0, 0.1, 0.25, 0.5, 0.75, 1.0):
            current = activity_factor(build_histogram(values * gain, precision))
            assert current >= previous
            previous = current
        levels = [activity_factor(build_histogram(np.full(50, v), precision)) for v in np.linspace(0, 1, 21)]
        assert all(b >= a for a, b in zip(levels, levels[1:]))

    def test_values_in_unit_interval(self):
        """Test that every distribution stays within [0, 1]"""
        rng = stream(1, SYNTH_VALUES)
        for kind in DistributionKind:
            values = synth_values(ValueDistribution(kind=kind, value=0.5, scale=2.0), 1000, rng)
            assert values.min() >= 0.0
            assert values.max() <= 1.0

    def test_layer_histograms_seeded(self, tiny_spec):
        """Test that histograms depend only on seed, layer and tensor"""
        design = reference_design(tiny_spec)
        layers = expand_model(tiny_spec, design.model, design.quant)
        inputs = ValueDistribution(kind=DistributionKind.HALF_GAUSSIAN, scale=0.3)
        weights = ValueDistribution(kind=DistributionKind.UNIFORM_NONNEG)
        a = build_layer_histograms(layers, inputs, weights, seed=4, sample_cap=128)
        b = build_layer_histograms(layers[:3], inputs, weights, seed=4, sample_cap=128)
        for layer_id in b:
            assert np.array_equal(a[layer_id].inputs.bins, b[layer_id].inputs.bins)
            assert np.array_equal(a[layer_id].weights.bins, b[layer_id].weights.bins)

    def test_sample_cap(self, tiny_spec):
        """Test that sample counts are min(cap, tensor size)"""
        design = reference_design(tiny_spec)
        layers = expand_model(tiny_spec, design.model, design.quant)
        histograms = build_layer_histograms(
            layers, ValueDistribution(), ValueDistribution(), seed=0, sample_cap=100
        )
        classifier = layers[-1]
        assert histograms["stem"].weights.total == 100
        assert histograms["classifier"].inputs.total == min(100, classifier.in_channels)
