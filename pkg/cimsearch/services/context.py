"""
Run context: everything a command needs, built once from a RunConfig
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from cimsearch.config import RunConfig, file_sha256, settings
from cimsearch.exceptions import SpecError
from cimsearch.ml.encoding import FeatureEncoder
from cimsearch.ml.oracle import AccuracyOracle
from cimsearch.ml.predictor import MLPPredictor, TablePredictor, load_checkpoint
from cimsearch.models.schemas import SearchSpaceSpec, TechnologyProfile
from cimsearch.services.cim_cost import load_profile
from cimsearch.services.evaluator import DesignEvaluator
from cimsearch.services.space import load_spec

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    config: RunConfig
    spec: SearchSpaceSpec
    tech: TechnologyProfile
    evaluator: DesignEvaluator
    predictor: object
    spec_sha256: str
    profile_sha256: str


def build_predictor(config: RunConfig, spec: SearchSpaceSpec):
    """Oracle, trained perceptron or accuracy table, per [predictor].kind"""
    section = config.predictor
    if section.kind == "mlp":
        if not section.checkpoint:
            raise SpecError("mlp predictor needs a checkpoint path", key="predictor.checkpoint")
        model = load_checkpoint(config.resolve(section.checkpoint))
        return MLPPredictor(model, FeatureEncoder(spec))
    if section.kind == "table":
        if not section.table:
            raise SpecError("table predictor needs a table path", key="predictor.table")
        return TablePredictor.from_csv(spec, config.resolve(section.table))
    return AccuracyOracle(config.oracle, spec.model_template)


def build_context(
    config: RunConfig,
    spec_path: Optional[Path] = None,
    profile_path: Optional[Path] = None,
) -> RunContext:
    spec_path = Path(spec_path) if spec_path else config.spec_path
    profile_path = Path(profile_path) if profile_path else config.profile_path
    spec = load_spec(spec_path)
    tech = load_profile(profile_path)
    evaluator = DesignEvaluator(
        spec,
        tech,
        inputs=config.workload.inputs,
        weights=config.workload.weights,
        seed=config.workload.seed,
        sample_cap=config.workload.histogram_samples or settings.HISTOGRAM_SAMPLES,
    )
    logger.debug(f"Context: spec={spec_path} profile={profile_path} predictor={config.predictor.kind}")
    return RunContext(
        config=config,
        spec=spec,
        tech=tech,
        evaluator=evaluator,
        predictor=build_predictor(config, spec),
        spec_sha256=file_sha256(spec_path),
        profile_sha256=file_sha256(profile_path),
    )
