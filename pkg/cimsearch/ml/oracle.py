"""
Synthetic accuracy oracle

Closed-form stand-in for fine-tuned top-1 accuracy: a saturating capacity term
plus a per-block penalty for precisions below a knee, with small seeded noise.
"""

import logging
from math import exp
from typing import Sequence

import numpy as np

from cimsearch.models.schemas import (
    DesignPoint,
    ModelGenome,
    ModelTemplate,
    OracleParams,
    QuantPolicy,
)
from cimsearch.services.streams import ORACLE_NOISE, stream

logger = logging.getLogger(__name__)

MIN_ACCURACY = 1.0


def capacity(model: ModelGenome, template: ModelTemplate = ModelTemplate.MOBILENET_V2) -> float:
    """Sum of kernel^2 * expansion over active blocks"""
    total = 0.0
    for s, depth in enumerate(model.depths):
        for b in range(depth):
            total += model.kernels[s][b] ** 2 * model.expansions[s][b]
    if template == ModelTemplate.RESNET50:
        total *= model.width_mult ** 2
    return total


def precision_deficit(model: ModelGenome, quant: QuantPolicy, knee_bits: int) -> float:
    """Bits missing below the knee, summed over active blocks and conv kinds"""
    deficit = 0
    for s, depth in enumerate(model.depths):
        for b in range(depth):
            for kind in quant.weight_bits:
                bits = min(quant.weight_bits[kind][s][b], quant.input_bits[kind][s][b])
                deficit += max(0, knee_bits - bits)
    return float(deficit)


def _network_key(model: ModelGenome, quant: QuantPolicy) -> str:
    # Only active blocks, so padded genes never move the noise
    parts = [f"w{model.width_mult}"]
    for s, depth in enumerate(model.depths):
        for b in range(depth):
            bits = ",".join(
                f"{quant.weight_bits[k][s][b]}/{quant.input_bits[k][s][b]}" for k in sorted(quant.weight_bits)
            )
            parts.append(f"{s}.{b}:{model.kernels[s][b]}x{model.expansions[s][b]}[{bits}]")
    return "|".join(parts)


def oracle_accuracy(
    params: OracleParams,
    model: ModelGenome,
    quant: QuantPolicy,
    template: ModelTemplate = ModelTemplate.MOBILENET_V2,
) -> float:
    """Accuracy in percent, clamped to [1, ceiling]"""
    acc = (
        params.ceiling
        - params.capacity_gain * exp(-capacity(model, template) / params.kappa)
        - params.gamma * precision_deficit(model, quant, params.knee_bits)
    )
    if params.noise > 0:
        rng = stream(params.seed, ORACLE_NOISE, _network_key(model, quant))
        acc += rng.uniform(-params.noise, params.noise)
    return float(min(params.ceiling, max(MIN_ACCURACY, acc)))


class AccuracyOracle:
    """Oracle bound to a template, usable wherever a predictor is expected"""

    name = "oracle"

    def __init__(self, params: OracleParams, template: ModelTemplate = ModelTemplate.MOBILENET_V2):
        self.params = params
        self.template = template

    def accuracy(self, design: DesignPoint) -> float:
        return oracle_accuracy(self.params, design.model, design.quant, self.template)

    def predict_designs(self, designs: Sequence[DesignPoint]) -> np.ndarray:
        return np.array([self.accuracy(d) for d in designs], dtype=np.float64)
