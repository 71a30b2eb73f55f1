"""
Reference baselines

Baseline 1: the reference network on median hardware.
Baseline 2: the same network averaged over random hardware configurations
that hold it; every column, EDAP included, is a mean of per-sample values.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from cimsearch.exceptions import ExhaustedSampling
from cimsearch.models.schemas import (
    DesignPoint,
    GeneGroup,
    HardwareMetrics,
    SearchSpaceSpec,
)
from cimsearch.services.evaluator import DesignEvaluator
from cimsearch.services.space import decode, gene_slices, reference_design, reference_indices
from cimsearch.services.streams import BASELINE, stream

logger = logging.getLogger(__name__)

ATTEMPTS_PER_SAMPLE = 1000


@dataclass
class BaselineResult:
    name: str
    metrics: HardwareMetrics
    accuracy: float
    samples: int = 1
    design: Optional[DesignPoint] = None


def mean_metrics(metrics: List[HardwareMetrics]) -> HardwareMetrics:
    """Per-column mean of per-sample metrics"""
    def avg(name):
        return float(np.mean([getattr(m, name) for m in metrics]))

    return HardwareMetrics(
        energy_mj=avg("energy_mj"),
        delay_us=avg("delay_us"),
        area_mm2=avg("area_mm2"),
        edap=avg("edap"),
        tops_per_w=avg("tops_per_w"),
        tops_per_mm2=avg("tops_per_mm2"),
        utilization=min(1.0, avg("utilization")),
        feasible=all(m.feasible for m in metrics),
        macros_required=int(round(avg("macros_required"))),
        macros_available=int(round(avg("macros_available"))),
    )


def baseline_median(spec: SearchSpaceSpec, evaluator: DesignEvaluator, predictor) -> BaselineResult:
    design = reference_design(spec)
    metrics = evaluator.metrics(design)
    accuracy = float(predictor.predict_designs([design])[0])
    logger.info(
        f"Baseline 1: E={metrics.energy_mj:.4g} mJ, D={metrics.delay_us:.4g} us, "
        f"A={metrics.area_mm2:.4g} mm2, EDAP={metrics.edap:.4g}"
    )
    return BaselineResult(name="baseline1", metrics=metrics, accuracy=accuracy, design=design)


def baseline_random(
    spec: SearchSpaceSpec,
    evaluator: DesignEvaluator,
    predictor,
    samples: int = 1000,
    seed: int = 0,
) -> BaselineResult:
    """Mean over random hardware that fits the reference network; no area constraint"""
    rng = stream(seed, BASELINE)
    hardware = gene_slices(spec)[GeneGroup.HARDWARE]
    sizes = spec.gene_sizes[hardware]
    prefix = reference_indices(spec)[: hardware.start]

    collected: List[HardwareMetrics] = []
    attempts = 0
    cap = samples * ATTEMPTS_PER_SAMPLE
    while len(collected) < samples and attempts < cap:
        attempts += 1
        design = decode(spec, prefix + tuple(int(i) for i in rng.integers(0, sizes)))
        if not evaluator.fits_memory(design):
            continue
        collected.append(evaluator.metrics(design))

    if not collected:
        raise ExhaustedSampling(
            f"no random hardware holds the reference network after {attempts} draws",
            attempts=attempts,
        )
    if len(collected) < samples:
        logger.warning(f"⚠ Baseline 2 stopped at {len(collected)}/{samples} samples after {attempts} draws")

    metrics = mean_metrics(collected)
    accuracy = float(predictor.predict_designs([reference_design(spec)])[0])
    logger.info(f"Baseline 2: mean EDAP={metrics.edap:.4g} over {len(collected)} configurations")
    return BaselineResult(name="baseline2", metrics=metrics, accuracy=accuracy, samples=len(collected))


def baselines(
    spec: SearchSpaceSpec,
    evaluator: DesignEvaluator,
    predictor,
    samples: int = 1000,
    seed: int = 0,
) -> dict:
    return {
        "baseline1": baseline_median(spec, evaluator, predictor),
        "baseline2": baseline_random(spec, evaluator, predictor, samples=samples, seed=seed),
    }
