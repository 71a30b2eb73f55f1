"""
Tests for the search space service
"""
import numpy as np
import pytest
from scipy.stats import chisquare

from cimsearch.exceptions import (
    EmptyChoiceList,
    IndexOutOfRange,
    InvalidChoiceList,
    InvalidGenome,
    MissingKey,
    SearchSpaceTooLarge,
    SpecError,
    UnknownTemplate,
)
from cimsearch.models.schemas import ConvKind, GeneGroup
from cimsearch.services.space import (
    canonical,
    cardinality,
    decode,
    encode,
    enumerate_designs,
    format_cardinality,
    gene_slices,
    load_design,
    load_spec,
    median_hardware,
    reference_design,
    sample_uniform,
)
from cimsearch.services.streams import SAMPLING, stream
from cimsearch.tests.conftest import with_hardware

TINY_HARDWARE = (0, 1, 0, 0, 0, 0, 0, 2, 0)


class TestLoadSpec:
    """Test spec parsing and validation"""

    def test_tiny_spec_layout(self, tiny_spec):
        """Test gene layout of the tiny space"""
        assert len(tiny_spec.genes) == 23
        slices = gene_slices(tiny_spec)
        assert slices[GeneGroup.MODEL] == slice(0, 6)
        assert slices[GeneGroup.QUANT] == slice(6, 14)
        assert slices[GeneGroup.HARDWARE] == slice(14, 23)
        assert tiny_spec.genes[3].name == "kernel[0][1]"
        assert tiny_spec.genes[3].can_be_inactive
        assert not tiny_spec.genes[1].can_be_inactive

    def test_flat_depths_broadcast_to_stages(self, reference_spec):
        """Test that one depth list applies to every stage"""
        assert reference_spec.depth_choices == ((2, 3, 4),) * 6

    def test_missing_key(self, tiny_document):
        """Test that a missing key is named"""
        del tiny_document["stage_count"]
        with pytest.raises(MissingKey) as exc:
            load_spec(tiny_document)
        assert exc.value.key == "stage_count"

    def test_empty_choice_list(self, tiny_document):
        """Test empty kernel list"""
        tiny_document["kernel_choices"] = []
        with pytest.raises(EmptyChoiceList) as exc:
            load_spec(tiny_document)
        assert exc.value.key == "kernel_choices"

    def test_unsorted_choice_list(self, tiny_document):
        """Test that duplicated or unsorted values are rejected"""
        tiny_document["hardware_gene_choices"]["Xbar_rows"] = [256, 128]
        with pytest.raises(InvalidChoiceList) as exc:
            load_spec(tiny_document)
        assert exc.value.key == "hardware_gene_choices.Xbar_rows"

    def test_unknown_template(self, tiny_document):
        """Test unknown model template"""
        tiny_document["model_template"] = "vgg16"
        with pytest.raises(UnknownTemplate):
            load_spec(tiny_document)

    def test_missing_conv_kind(self, tiny_document):
        """Test that every conv kind of the template needs precisions"""
        del tiny_document["weight_bits_choices"]["depthwise"]
        with pytest.raises(MissingKey) as exc:
            load_spec(tiny_document)
        assert exc.value.key == "weight_bits_choices.depthwise"

    def test_yaml_text(self):
        """Test that malformed YAML text is reported"""
        with pytest.raises(SpecError, match="cannot parse"):
            load_spec("model_template: [unclosed")


class TestCardinality:
    """Test search space counting"""

    def test_tiny_counts(self, tiny_spec):
        """Test tiny space subspace counts"""
        counts = cardinality(tiny_spec)
        assert (counts.model, counts.quant, counts.hardware) == (20, 4, 6)
        assert counts.total == 480

    def test_counts_match_enumeration(self, tiny_spec):
        """Test that enumeration yields each counted encoding once"""
        designs = list(enumerate_designs(tiny_spec))
        assert len(designs) == cardinality(tiny_spec).total
        assert len({d.encoding for d in designs}) == len(designs)
        assert len({canonical(tiny_spec, d.encoding) for d in designs}) == 72 * 6

    def test_reference_counts_multiply(self, reference_spec):
        """Test big-integer identity on the reference space"""
        counts = cardinality(reference_spec)
        assert counts.model == 7371 ** 6
        assert counts.quant == 3 ** 96
        assert counts.hardware == 3 * 6 * 4 ** 7
        assert counts.total == counts.model * counts.quant * counts.hardware

    def test_enumeration_limit(self, reference_spec):
        """Test that large spaces refuse enumeration"""
        with pytest.raises(SearchSpaceTooLarge):
            next(enumerate_designs(reference_spec))

    def test_subspace_orders_multiply(self):
        """Test that the three subspace orders multiply to ~9.9e85"""
        total = 5.9e38 * 1.2e40 * 1.4e7
        assert total == pytest.approx(9.9e85, rel=0.01)

    def test_format(self):
        """Test human-readable counts"""
        assert format_cardinality(999999) == "999999"
        assert format_cardinality(1234567) == "1234567 (~1.2x10^6)"


class TestEncoding:
    """Test decode, encode and canonical forms"""

    def test_decode_values(self, tiny_spec):
        """Test that indices map onto the choice lists"""
        design = decode(tiny_spec, (1, 1, 0, 0, 1, 0) + (0, 0, 0, 0) * 2 + TINY_HARDWARE)
        assert design.model.depths == (2,)
        assert design.model.kernels == ((5, 3),)
        assert design.model.expansions == ((3.0, 6.0),)
        assert design.quant.weight_bits[ConvKind.POINTWISE] == ((4, 4),)
        assert design.hardware.bits_cell == 4
        assert design.hardware.xbar_rows == 256
        assert design.hardware.g_per_chip == 8

    def test_out_of_range_index(self, tiny_spec):
        """Test that an out-of-range hardware index names the gene"""
        encoding = list((0,) * 14 + TINY_HARDWARE)
        encoding[17] = 1
        with pytest.raises(IndexOutOfRange) as exc:
            decode(tiny_spec, encoding)
        assert exc.value.gene == "Xbar_rows"

    def test_wrong_length(self, tiny_spec):
        """Test that encodings of the wrong length are rejected"""
        with pytest.raises(InvalidGenome):
            decode(tiny_spec, (0, 0, 0))

    def test_encode_inverts_decode(self, tiny_spec):
        """Test encode of a decoded sample"""
        design = sample_uniform(tiny_spec, stream(3, SAMPLING))
        assert encode(tiny_spec, design) == design.encoding

    def test_decode_encode_identity(self, reference_spec):
        """Test decode(encode(d)) == d over random reference designs"""
        rng = stream(11, SAMPLING)
        for _ in range(1000):
            design = sample_uniform(reference_spec, rng)
            assert decode(reference_spec, encode(reference_spec, design)) == design

    def test_canonical_zeroes_padded_blocks(self, tiny_spec):
        """Test that genes of blocks beyond the depth are reset"""
        encoding = (0, 1, 1, 1, 1, 0) + (0, 0, 1, 0) + (0, 0, 1, 0) + TINY_HARDWARE
        assert canonical(tiny_spec, encoding) == (0, 1, 1, 0, 0, 0) + (0, 0, 1, 0) + (0, 0, 0, 0) + TINY_HARDWARE

    def test_sampling_is_seeded(self, tiny_spec):
        """Test that equal seeds give equal samples"""
        a = sample_uniform(tiny_spec, stream(5, SAMPLING)).encoding
        b = sample_uniform(tiny_spec, stream(5, SAMPLING)).encoding
        assert a == b
        assert all(0 <= i < n for i, n in zip(a, tiny_spec.gene_sizes))


class TestSampling:
    """Test uniform sampling over the choice lists"""

    def test_samples_inside_choice_lists(self, reference_spec):
        """Test that every decoded value comes from its list"""
        spec = reference_spec
        rng = stream(2, SAMPLING)
        for _ in range(300):
            design = sample_uniform(spec, rng)
            for s, depth in enumerate(design.model.depths):
                assert depth in spec.depth_choices[s]
                for b in range(spec.max_depths[s]):
                    assert design.model.kernels[s][b] in spec.kernel_choices
                    assert design.model.expansions[s][b] in spec.expansion_choices
                    for kind in spec.conv_kinds:
                        assert design.quant.weight_bits[kind][s][b] in spec.weight_bits_choices[kind]
                        assert design.quant.input_bits[kind][s][b] in spec.input_bits_choices[kind]
            for gene, values in spec.hardware_gene_choices.items():
                assert design.hardware.gene_value(gene) in values

    @pytest.mark.slow
    def test_gene_frequencies_are_uniform(self, tiny_spec):
        """Test per-gene frequencies and chi-square over 10^5 draws"""
        n = 100_000
        rng = stream(9, SAMPLING)
        draws = np.array([sample_uniform(tiny_spec, rng).encoding for _ in range(n)])
        for i, gene in enumerate(tiny_spec.genes):
            counts = np.bincount(draws[:, i], minlength=gene.size)
            assert len(counts) == gene.size
            assert np.abs(counts / n - 1.0 / gene.size).max() < 0.01
            if gene.size > 1:
                assert chisquare(counts).pvalue > 1e-6


class TestReferencePoints:
    """Test median hardware and reference network"""

    def test_reference_median_hardware(self, reference_spec, median_hw):
        """Test the Baseline 1 hardware of the reference space"""
        hw = median_hardware(reference_spec)
        assert hw == median_hw
        assert hw.total_macros == 2048

    def test_reference_network(self, tiny_spec):
        """Test full depth, smallest kernel, largest expansion, 8 bits"""
        design = reference_design(tiny_spec)
        assert design.model.depths == (2,)
        assert design.model.kernels == ((3, 3),)
        assert design.model.expansions == ((6.0, 6.0),)
        assert design.quant.weight_bits[ConvKind.POINTWISE] == ((8, 8),)


class TestDesignFiles:
    """Test loading explicit designs"""

    def test_hardware_override(self, tiny_spec, tmp_path):
        """Test that listed genes override the median"""
        path = tmp_path / "design.yaml"
        path.write_text("model: reference\nhardware: {G_per_chip: 8, Bits_cell: 2}\n")
        design = load_design(tiny_spec, path)
        assert design.hardware.g_per_chip == 8
        assert design.hardware.bits_cell == 2
        assert design.hardware.xbar_rows == 256

    def test_padded_model(self, tiny_spec, tmp_path):
        """Test that blocks beyond the depth may be omitted"""
        path = tmp_path / "design.yaml"
        path.write_text(
            "model: {depths: [1], kernels: [[5]], expansions: [[3]]}\n"
            "quant:\n"
            "  weight_bits: {depthwise: [[8]], pointwise: [[4]]}\n"
            "  input_bits: {depthwise: [[8]], pointwise: [[8]]}\n"
        )
        design = load_design(tiny_spec, path)
        assert design.model.depths == (1,)
        assert design.model.kernels[0][0] == 5
        assert design.quant.weight_bits[ConvKind.POINTWISE][0][0] == 4

    def test_value_outside_choices(self, tiny_spec, tmp_path):
        """Test that a kernel outside the choices is rejected"""
        path = tmp_path / "design.yaml"
        path.write_text("model: {depths: [1], kernels: [[4]], expansions: [[3]]}\n")
        with pytest.raises(InvalidGenome):
            load_design(tiny_spec, path)

    def test_encoding_document(self, tiny_spec, tmp_path):
        """Test design given as an index list"""
        encoding = (1, 0, 0, 0, 0, 0) + (0, 0, 1, 0) * 2 + TINY_HARDWARE
        path = tmp_path / "design.yaml"
        path.write_text(f"encoding: {list(encoding)}\n")
        assert load_design(tiny_spec, path).encoding == encoding

    def test_singleton_hardware_space(self, tiny_document):
        """Test a spec whose hardware lists each hold one value"""
        doc = with_hardware(tiny_document, Bits_cell=[4], Xbar_rows=[256], G_per_chip=[4])
        spec = load_spec(doc)
        assert cardinality(spec).hardware == 1
        assert np.all(spec.gene_sizes[gene_slices(spec)[GeneGroup.HARDWARE]] == 1)
