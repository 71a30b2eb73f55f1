"""
Method comparison

Runs the joint search, both staged comparators and the two baselines on the same
seed and budget, and tabulates them with the baseline EDAP ratios.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import pandas as pd

from cimsearch.models.schemas import HardwareMetrics, ObjectiveMode, ObjectiveSpec, SearchConfig
from cimsearch.search.archive import diversity, select_top_k
from cimsearch.search.baselines import BaselineResult, baselines
from cimsearch.search.comparators import run_two_stage, run_xpert_like
from cimsearch.search.evolve import SearchResult, run_search
from cimsearch.search.objective import score
from cimsearch.services.context import RunContext

logger = logging.getLogger(__name__)

COMPARE_COLUMNS = [
    "method", "energy_mj", "delay_us", "area_mm2", "edap", "accuracy", "acc_delta", "score",
    "tops_per_w", "tops_per_mm2", "utilization", "diversity", "edap_ratio_b1", "edap_ratio_b2",
]

SEARCHERS = {
    "joint": run_search,
    "two_stage": run_two_stage,
    "xpert_like": run_xpert_like,
}


@dataclass
class Comparison:
    frame: pd.DataFrame
    results: Dict[str, SearchResult] = field(default_factory=dict)
    baselines: Dict[str, BaselineResult] = field(default_factory=dict)


def _row(method: str, metrics: HardwareMetrics, accuracy: float, value: float, div: float) -> dict:
    return {
        "method": method,
        "energy_mj": metrics.energy_mj,
        "delay_us": metrics.delay_us,
        "area_mm2": metrics.area_mm2,
        "edap": metrics.edap,
        "accuracy": accuracy,
        "score": value,
        "tops_per_w": metrics.tops_per_w,
        "tops_per_mm2": metrics.tops_per_mm2,
        "utilization": metrics.utilization,
        "diversity": div,
    }


def ranking_objective(config: SearchConfig, joint: SearchResult) -> ObjectiveSpec:
    """The configured objective, anchored on the joint run in priority mode"""
    objective = config.objective
    if objective.mode == ObjectiveMode.PRIORITY and objective.anchor is None:
        objective = objective.model_copy(update={"anchor": joint.anchor})
    return objective


def compare_results(
    results: Dict[str, SearchResult],
    base: Dict[str, BaselineResult],
    objective: ObjectiveSpec,
    top_k: int,
) -> pd.DataFrame:
    rows = []
    for name in ("baseline1", "baseline2"):
        b = base[name]
        rows.append(_row(name, b.metrics, b.accuracy, score(b.metrics, b.accuracy, objective), 0.0))
    for name, result in results.items():
        top = select_top_k(result.archive.entries, objective, top_k)
        if not top.entries:
            logger.warning(f"⚠ {name}: no feasible design archived")
            continue
        best = top.entries[0]
        div = diversity([e.design.encoding for e in top.entries])
        rows.append(_row(name, best.metrics, best.accuracy, top.scores[0], div))

    frame = pd.DataFrame(rows)
    b1 = base["baseline1"]
    frame["acc_delta"] = frame["accuracy"] - b1.accuracy
    frame["edap_ratio_b1"] = b1.metrics.edap / frame["edap"]
    frame["edap_ratio_b2"] = base["baseline2"].metrics.edap / frame["edap"]
    return frame[COMPARE_COLUMNS]


def run_comparison(context: RunContext, config: Optional[SearchConfig] = None) -> Comparison:
    config = config or context.config.search
    results: Dict[str, SearchResult] = {}
    for name, searcher in SEARCHERS.items():
        logger.info(f"Running {name} search")
        results[name] = searcher(context.spec, config, context.evaluator, context.predictor)

    base = baselines(
        context.spec, context.evaluator, context.predictor,
        samples=config.baseline_samples, seed=config.seed,
    )
    objective = ranking_objective(config, results["joint"])
    frame = compare_results(results, base, objective, config.top_k)
    return Comparison(frame=frame, results=results, baselines=base)


def baseline_frame(base: Dict[str, BaselineResult], objective: ObjectiveSpec) -> pd.DataFrame:
    """Baselines alone, same columns as the comparison table"""
    return compare_results({}, base, objective, top_k=1)
