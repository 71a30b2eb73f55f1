"""
Staged comparison searches

Two-stage: accuracy-first search of model and quantization genes on median
hardware, then hardware search for that fixed network.
XPert-like: model and hardware first on latency/area terms at full precision,
then quantization for accuracy (and energy where the objective has it).
Both reuse EvolutionarySearch with half the generation budget per stage.
"""

import logging
from math import prod

from cimsearch.exceptions import ExhaustedSampling
from cimsearch.models.schemas import (
    GeneGroup,
    ObjectiveMode,
    ObjectiveSpec,
    SearchConfig,
    SearchSpaceSpec,
)
from cimsearch.search.evolve import EvolutionarySearch, SearchResult
from cimsearch.search.objective import accuracy_terms, describe, hardware_terms
from cimsearch.services.evaluator import DesignEvaluator
from cimsearch.services.space import reference_indices

logger = logging.getLogger(__name__)


def _space_size(spec: SearchSpaceSpec, groups) -> int:
    return prod(g.size for g in spec.genes if g.group in groups)


def _split(generations: int):
    first = generations // 2
    return first, generations - first


def run_two_stage(
    spec: SearchSpaceSpec,
    config: SearchConfig,
    evaluator: DesignEvaluator,
    predictor,
) -> SearchResult:
    first_gens, second_gens = _split(config.generations)

    logger.info(f"Two-stage: stage 1 (accuracy, model+quant) for {first_gens} generations")
    stage1 = EvolutionarySearch(
        spec, config, evaluator, predictor,
        active_groups=(GeneGroup.MODEL, GeneGroup.QUANT),
        base=reference_indices(spec),
        objective=ObjectiveSpec(mode=ObjectiveMode.ACCURACY),
        enforce_feasibility=False,
        generations=first_gens,
        tag="two-stage/software",
    ).run()
    winner = stage1.archive.best(feasible_only=False)
    logger.info(f"✓ Stage 1 winner: accuracy {winner.accuracy:.2f}%")

    if _space_size(spec, (GeneGroup.HARDWARE,)) == 1:
        logger.info("Hardware space is a single point, stage 2 skipped")
        stage1.stages = [stage1]
        return stage1

    logger.info(f"Two-stage: stage 2 (hardware, {describe(config.objective)}) for {second_gens} generations")
    try:
        stage2 = EvolutionarySearch(
            spec, config, evaluator, predictor,
            active_groups=(GeneGroup.HARDWARE,),
            base=winner.design.encoding,
            objective=config.objective,
            enforce_feasibility=True,
            generations=second_gens,
            tag="two-stage/hardware",
        ).run()
    except ExhaustedSampling as e:
        raise ExhaustedSampling(
            f"two-stage: no hardware fits the stage-1 network under "
            f"A_constr={config.area_constraint} mm2 ({e})",
            attempts=e.attempts,
            accepted=e.accepted,
        ) from e
    stage2.stages = [stage1, stage2]
    return stage2


def run_xpert_like(
    spec: SearchSpaceSpec,
    config: SearchConfig,
    evaluator: DesignEvaluator,
    predictor,
) -> SearchResult:
    first_gens, second_gens = _split(config.generations)
    first_objective = hardware_terms(config.objective)

    logger.info(f"XPert-like: stage 1 ({describe(first_objective)}, model+hardware) for {first_gens} generations")
    stage1 = EvolutionarySearch(
        spec, config, evaluator, predictor,
        active_groups=(GeneGroup.MODEL, GeneGroup.HARDWARE),
        base=reference_indices(spec),
        objective=first_objective,
        enforce_feasibility=True,
        generations=first_gens,
        tag="xpert/hardware",
    ).run()
    winner = stage1.best

    if _space_size(spec, (GeneGroup.QUANT,)) == 1:
        logger.info("Quantization space is a single point, stage 2 skipped")
        stage1.stages = [stage1]
        return stage1

    second_objective = accuracy_terms(config.objective)
    logger.info(f"XPert-like: stage 2 ({describe(second_objective)}, quant) for {second_gens} generations")
    stage2 = EvolutionarySearch(
        spec, config, evaluator, predictor,
        active_groups=(GeneGroup.QUANT,),
        base=winner.design.encoding,
        objective=second_objective,
        enforce_feasibility=True,
        generations=second_gens,
        tag="xpert/quant",
    ).run()
    stage2.stages = [stage1, stage2]
    return stage2
