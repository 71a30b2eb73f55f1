"""
Workload service

Expands a (model genome, quantization policy) pair into per-layer matrix workloads
using a template table shipped as data, and builds the value histograms that make
crossbar energy depend on the data.
"""

import logging
from functools import lru_cache
from math import ceil
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ValidationError

from cimsearch.config import read_yaml, resolve_path, settings
from cimsearch.exceptions import (
    CimSearchError,
    EmptyHistogram,
    InvalidGenome,
    PrecisionOutOfRange,
    SpecError,
)
from cimsearch.models.schemas import (
    ConvKind,
    DistributionKind,
    Histogram,
    LayerHistograms,
    LayerWorkload,
    ModelGenome,
    ModelTemplate,
    QuantPolicy,
    SearchSpaceSpec,
    ValueDistribution,
)
from cimsearch.services.streams import SYNTH_VALUES, stream

logger = logging.getLogger(__name__)

DEFAULT_TABLES = {
    ModelTemplate.MOBILENET_V2: "templates/mobilenetv2.yaml",
    ModelTemplate.RESNET50: "templates/resnet50.yaml",
}

MAX_PRECISION = 16


# ============================================
# Template tables
# ============================================

class TemplateRow(BaseModel):
    """One fixed or searched row of a template table"""
    role: Literal["stem", "fixed_block", "pool", "stage", "last_conv", "classifier"]
    kind: Optional[ConvKind] = None
    channels: int = 0
    stride: int = 1
    kernel: int = 1
    expansion: float = 1.0


class TemplateTable(BaseModel):
    name: str
    rows: List[TemplateRow]

    @property
    def stage_rows(self) -> List[TemplateRow]:
        return [r for r in self.rows if r.role == "stage"]


@lru_cache(maxsize=16)
def _load_table(path: str) -> TemplateTable:
    data = read_yaml(path, "template table")
    try:
        return TemplateTable(**data)
    except ValidationError as e:
        first = e.errors()[0]
        raise SpecError(first["msg"], key=".".join(str(p) for p in first["loc"])) from e


def load_template(spec: SearchSpaceSpec) -> TemplateTable:
    """Template table of the spec: its own table path or the shipped default"""
    relative = spec.template_table or DEFAULT_TABLES[spec.model_template]
    table = _load_table(str(resolve_path(relative)))
    if len(table.stage_rows) < spec.stage_count:
        raise SpecError(
            f"template '{table.name}' has {len(table.stage_rows)} searched stages, "
            f"spec asks for {spec.stage_count}",
            key="stage_count",
        )
    return table


def make_divisible(value: float, divisor: int = 8) -> int:
    """Round a channel count to a multiple of divisor without losing more than 10%"""
    rounded = max(divisor, int(value + divisor / 2) // divisor * divisor)
    if rounded < 0.9 * value:
        rounded += divisor
    return rounded


# ============================================
# Model expansion
# ============================================

def _layer(
    layer_id: str,
    kind: ConvKind,
    c_in: int,
    c_out: int,
    kernel: int,
    stride: int,
    size_in: int,
    w_bits: int,
    in_bits: int,
    searched: bool,
) -> LayerWorkload:
    size_out = size_in // stride
    positions = size_out * size_out
    if kind == ConvKind.DEPTHWISE:
        rows, cols = kernel * kernel, c_in
        weight_count = kernel * kernel * c_in
    else:
        rows, cols = c_in * kernel * kernel, c_out
        weight_count = rows * cols
    return LayerWorkload(
        layer_id=layer_id,
        kind=kind,
        rows=rows,
        cols=cols,
        positions=positions,
        macs=weight_count * positions,
        weight_bits=w_bits,
        input_bits=in_bits,
        weight_count=weight_count,
        input_bytes=ceil(c_in * size_in * size_in * in_bits / 8),
        output_bytes=ceil(cols * positions * in_bits / 8),
        kernel=kernel,
        in_channels=c_in,
        stride=stride,
        searched=searched,
    )


def _check_genome(spec: SearchSpaceSpec, model: ModelGenome, quant: QuantPolicy) -> None:
    if len(model.depths) != spec.stage_count:
        raise InvalidGenome(f"genome has {len(model.depths)} stages, spec expects {spec.stage_count}")
    if model.width_mult not in spec.width_mult_choices:
        raise InvalidGenome(f"width_mult {model.width_mult} not in {list(spec.width_mult_choices)}")
    for s, depth in enumerate(model.depths):
        if depth not in spec.depth_choices[s]:
            raise InvalidGenome(f"depth[{s}]={depth} not in {list(spec.depth_choices[s])}")
        if len(model.kernels[s]) < depth or len(model.expansions[s]) < depth:
            raise InvalidGenome(f"stage {s} lists fewer blocks than its depth {depth}")
        for b in range(depth):
            if model.kernels[s][b] not in spec.kernel_choices:
                raise InvalidGenome(f"kernel[{s}][{b}]={model.kernels[s][b]} not in choices")
            if model.expansions[s][b] not in spec.expansion_choices:
                raise InvalidGenome(f"expansion[{s}][{b}]={model.expansions[s][b]} not in choices")
            for kind in spec.conv_kinds:
                try:
                    w = quant.weight_bits[kind][s][b]
                    x = quant.input_bits[kind][s][b]
                except (KeyError, IndexError):
                    raise InvalidGenome(f"policy lacks {kind.value} bits for stage {s} block {b}")
                if w not in spec.weight_bits_choices[kind] or x not in spec.input_bits_choices[kind]:
                    raise InvalidGenome(f"{kind.value} bits ({w}, {x}) at [{s}][{b}] not in choices")


def _cumulative_stride(table: TemplateTable, stage_count: int) -> int:
    stride = 1
    stages = 0
    for row in table.rows:
        if row.role == "stage":
            stages += 1
            if stages > stage_count:
                continue
        stride *= row.stride
    return stride


def expand_model(
    spec: SearchSpaceSpec,
    model: ModelGenome,
    quant: QuantPolicy,
    input_resolution: Optional[int] = None,
) -> List[LayerWorkload]:
    """
    Layer list for one genome.

    MobileNet stages emit expand-pointwise, depthwise k x k and project-pointwise
    per active block; ResNet stages emit pointwise, standard k x k, pointwise
    triplets scaled by the width multiplier. Fixed rows run at 8 bits.
    """
    _check_genome(spec, model, quant)
    table = load_template(spec)
    resolution = input_resolution or spec.input_resolution
    total_stride = _cumulative_stride(table, spec.stage_count)
    if resolution % total_stride != 0:
        raise InvalidGenome(f"resolution {resolution} not divisible by cumulative stride {total_stride}")

    fixed = quant.fixed_bits
    resnet = spec.model_template == ModelTemplate.RESNET50
    layers: List[LayerWorkload] = []
    size = resolution
    channels = 3
    stage = 0

    for row in table.rows:
        if row.role == "stem":
            layers.append(_layer("stem", row.kind or ConvKind.STANDARD, channels, row.channels,
                                 row.kernel, row.stride, size, fixed, fixed, False))
            size //= row.stride
            channels = row.channels
        elif row.role == "pool":
            size //= row.stride
        elif row.role == "fixed_block":
            mid = int(round(channels * row.expansion))
            if row.expansion != 1:
                layers.append(_layer("fixed.expand", ConvKind.POINTWISE, channels, mid, 1, 1,
                                     size, fixed, fixed, False))
            layers.append(_layer("fixed.dw", ConvKind.DEPTHWISE, mid, mid, row.kernel, row.stride,
                                 size, fixed, fixed, False))
            size //= row.stride
            layers.append(_layer("fixed.project", ConvKind.POINTWISE, mid, row.channels, 1, 1,
                                 size, fixed, fixed, False))
            channels = row.channels
        elif row.role == "stage":
            if stage >= spec.stage_count:
                continue
            s = stage
            stage += 1
            out = make_divisible(row.channels * model.width_mult) if resnet else row.channels
            for b in range(model.depths[s]):
                stride = row.stride if b == 0 else 1
                k = model.kernels[s][b]
                e = model.expansions[s][b]
                prefix = f"s{s}.b{b}"
                if resnet:
                    mid = make_divisible(out * e)
                    wq = {kind: quant.weight_bits[kind][s][b] for kind in spec.conv_kinds}
                    xq = {kind: quant.input_bits[kind][s][b] for kind in spec.conv_kinds}
                    pw, std = ConvKind.POINTWISE, ConvKind.STANDARD
                    layers.append(_layer(f"{prefix}.reduce", pw, channels, mid, 1, 1, size, wq[pw], xq[pw], True))
                    layers.append(_layer(f"{prefix}.conv", std, mid, mid, k, stride, size, wq[std], xq[std], True))
                    size //= stride
                    layers.append(_layer(f"{prefix}.restore", pw, mid, out, 1, 1, size, wq[pw], xq[pw], True))
                else:
                    mid = max(1, int(round(channels * e)))
                    wq = {kind: quant.weight_bits[kind][s][b] for kind in spec.conv_kinds}
                    xq = {kind: quant.input_bits[kind][s][b] for kind in spec.conv_kinds}
                    pw, dw = ConvKind.POINTWISE, ConvKind.DEPTHWISE
                    layers.append(_layer(f"{prefix}.expand", pw, channels, mid, 1, 1, size, wq[pw], xq[pw], True))
                    layers.append(_layer(f"{prefix}.dw", dw, mid, mid, k, stride, size, wq[dw], xq[dw], True))
                    size //= stride
                    layers.append(_layer(f"{prefix}.project", pw, mid, out, 1, 1, size, wq[pw], xq[pw], True))
                channels = out
        elif row.role == "last_conv":
            layers.append(_layer("last_conv", row.kind or ConvKind.POINTWISE, channels, row.channels,
                                 row.kernel, row.stride, size, fixed, fixed, False))
            size //= row.stride
            channels = row.channels
        elif row.role == "classifier":
            # Global pooling first
            layers.append(_layer("classifier", ConvKind.LINEAR, channels, row.channels, 1, 1, 1,
                                 fixed, fixed, False))
            channels = row.channels

    return layers


def total_macs(layers: Sequence[LayerWorkload]) -> int:
    return sum(layer.macs for layer in layers)


# ============================================
# Synthetic values and histograms
# ============================================

def synth_values(distribution: ValueDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n values in [0, 1] drawn from a documented distribution"""
    if n < 1:
        raise CimSearchError(f"need at least one value, got n={n}")
    if distribution.kind == DistributionKind.CONSTANT:
        return np.full(n, distribution.value, dtype=np.float64)
    if distribution.kind == DistributionKind.HALF_GAUSSIAN:
        values = np.abs(rng.normal(0.0, distribution.scale, n))
    else:
        values = rng.random(n)
    return np.clip(values, 0.0, 1.0)


def build_histogram(values, precision: int) -> Histogram:
    """Bin values onto 2^precision levels; signed values fold to magnitude"""
    if not isinstance(precision, (int, np.integer)) or not 1 <= precision <= MAX_PRECISION:
        raise PrecisionOutOfRange(f"precision must be 1..{MAX_PRECISION}, got {precision}")
    levels = (1 << int(precision)) - 1
    magnitudes = np.clip(np.abs(np.asarray(values, dtype=np.float64)), 0.0, 1.0)
    index = np.floor(magnitudes * levels + 0.5).astype(np.int64)
    bins = np.bincount(index, minlength=levels + 1)
    return Histogram(precision=int(precision), bins=bins, total=int(magnitudes.size))


def activity_factor(histogram: Histogram) -> float:
    """Mean normalized quantization level, in [0, 1]"""
    if histogram.total <= 0:
        raise EmptyHistogram("histogram holds no samples")
    levels = (1 << histogram.precision) - 1
    weighted = float(np.dot(np.arange(levels + 1, dtype=np.float64), histogram.bins))
    return weighted / (levels * histogram.total)


def layer_activity(histograms: LayerHistograms) -> float:
    """Input drive times weight conductance level"""
    return activity_factor(histograms.inputs) * activity_factor(histograms.weights)


@lru_cache(maxsize=65536)
def _tensor_histogram(
    seed: int,
    layer_id: str,
    tensor: str,
    distribution: ValueDistribution,
    n: int,
    precision: int,
) -> Histogram:
    values = synth_values(distribution, n, stream(seed, SYNTH_VALUES, layer_id, tensor))
    return build_histogram(values, precision)


def build_layer_histograms(
    workloads: Sequence[LayerWorkload],
    inputs: ValueDistribution,
    weights: ValueDistribution,
    seed: int = 0,
    sample_cap: Optional[int] = None,
) -> Dict[str, LayerHistograms]:
    """
    Input and weight histograms per layer at the layer's precisions.

    Values for a layer depend only on (seed, layer id, tensor), so two designs
    sharing a layer see the same data and differ only in how it is quantized.
    """
    cap = sample_cap or settings.HISTOGRAM_SAMPLES
    histograms = {}
    for layer in workloads:
        n_inputs = min(cap, max(1, layer.input_bytes * 8 // layer.input_bits))
        n_weights = min(cap, layer.weight_count)
        histograms[layer.layer_id] = LayerHistograms(
            inputs=_tensor_histogram(seed, layer.layer_id, "inputs", inputs, n_inputs, layer.input_bits),
            weights=_tensor_histogram(seed, layer.layer_id, "weights", weights, n_weights, layer.weight_bits),
        )
    return histograms
