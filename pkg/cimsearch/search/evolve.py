"""
Evolutionary Search

Feasibility-filtered initial sampling followed by generations of
evaluate -> sort -> keep elite half -> SBX + polynomial mutation.
Candidates are evaluated in a joblib worker pool; results are merged in
candidate order, so archives do not depend on the worker count.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from cimsearch.exceptions import EvaluationFailed, ExhaustedSampling
from cimsearch.models.schemas import (
    ArchiveEntry,
    ConvergenceRecord,
    DesignPoint,
    GeneGroup,
    HardwareMetrics,
    ObjectiveAnchor,
    ObjectiveSpec,
    SearchConfig,
    SearchSpaceSpec,
)
from cimsearch.search.archive import Archive
from cimsearch.search.objective import needs_anchor, score, with_anchor
from cimsearch.search.operators import polynomial_mutation, sbx_crossover
from cimsearch.services.evaluator import DesignEvaluator
from cimsearch.services.space import canonical, decode, reference_indices
from cimsearch.services.streams import CROSSOVER, MUTATION, SAMPLING, stream

logger = logging.getLogger(__name__)

ALL_GROUPS = (GeneGroup.MODEL, GeneGroup.QUANT, GeneGroup.HARDWARE)


@dataclass
class SearchResult:
    """Archive plus run statistics; stages holds sub-results of staged searches"""
    archive: Archive
    objective: ObjectiveSpec
    convergence: List[ConvergenceRecord] = field(default_factory=list)
    rejections: int = 0
    cache_hits: int = 0
    anchor: Optional[ObjectiveAnchor] = None
    stages: List["SearchResult"] = field(default_factory=list)

    @property
    def best(self) -> Optional[ArchiveEntry]:
        return self.archive.best(feasible_only=True)


def _safe_metrics(evaluator: DesignEvaluator, design: DesignPoint):
    try:
        return True, evaluator.metrics(design)
    except Exception as e:
        return False, e


class EvolutionarySearch:
    """
    One search over the active gene groups.

    Genes outside active_groups keep the values of base (default: the reference
    network on median hardware). With enforce_feasibility off, designs that miss
    the memory or area test still compete.
    """

    def __init__(
        self,
        spec: SearchSpaceSpec,
        config: SearchConfig,
        evaluator: DesignEvaluator,
        predictor,
        active_groups: Sequence[GeneGroup] = ALL_GROUPS,
        base: Optional[Sequence[int]] = None,
        objective: Optional[ObjectiveSpec] = None,
        enforce_feasibility: bool = True,
        generations: Optional[int] = None,
        tag: str = "joint",
    ):
        self.spec = spec
        self.config = config
        self.evaluator = evaluator
        self.predictor = predictor
        self.objective = objective or config.objective
        self.enforce = enforce_feasibility
        self.generations = config.generations if generations is None else generations
        self.tag = tag

        self.base = np.array(base if base is not None else reference_indices(spec), dtype=np.int64)
        groups = set(active_groups)
        self.active = np.array([i for i, g in enumerate(spec.genes) if g.group in groups], dtype=np.int64)
        self.upper = spec.gene_sizes[self.active] - 1

        self.sampling_rng = stream(config.seed, SAMPLING, tag)
        self.crossover_rng = stream(config.seed, CROSSOVER, tag)
        self.mutation_rng = stream(config.seed, MUTATION, tag)

        self.archive = Archive(spec)
        self.rejections = 0
        self.anchor: Optional[ObjectiveAnchor] = None
        self.convergence: List[ConvergenceRecord] = []

    # ============================================
    # Helpers
    # ============================================

    def _full(self, active_values) -> Tuple[int, ...]:
        full = self.base.copy()
        full[self.active] = active_values
        return canonical(self.spec, full.tolist())

    def _acceptable(self, encoding: Tuple[int, ...], generation: int, candidate: int) -> bool:
        if not self.enforce:
            return True
        try:
            design = decode(self.spec, encoding)
            return self.evaluator.cheap_check(design, self.config.area_constraint)
        except Exception as e:
            raise EvaluationFailed(generation, candidate, e) from e

    def _failing_position(self, designs: List[DesignPoint]) -> int:
        """First design the predictor rejects on its own; 0 when only the batch fails"""
        for position, design in enumerate(designs):
            try:
                self.predictor.predict_designs([design])
            except Exception:
                return position
        return 0

    def _feasible(self, metrics: HardwareMetrics) -> bool:
        return metrics.feasible and metrics.area_mm2 <= self.config.area_constraint

    def _parallel(self, designs: List[DesignPoint]) -> list:
        if self.config.workers > 1 and len(designs) > 1:
            return Parallel(n_jobs=self.config.workers)(
                delayed(_safe_metrics)(self.evaluator, d) for d in designs
            )
        return [_safe_metrics(self.evaluator, d) for d in designs]

    # ============================================
    # Evaluation
    # ============================================

    def evaluate(self, encodings: List[Tuple[int, ...]], generation: int) -> Tuple[List[ArchiveEntry], int]:
        """Archive entries for encodings; new ones are evaluated, others come from the archive"""
        fresh: List[Tuple[int, ...]] = []
        seen = set()
        hits = 0
        for encoding in encodings:
            if encoding in self.archive:
                self.archive.lookup(encoding)
                hits += 1
            elif encoding not in seen:
                seen.add(encoding)
                fresh.append(encoding)
            else:
                hits += 1

        designs = [decode(self.spec, e) for e in fresh]
        results = self._parallel(designs)
        for position, (ok, value) in enumerate(results):
            if not ok:
                raise EvaluationFailed(generation, encodings.index(fresh[position]), value)

        metrics = [value for _, value in results]
        try:
            accuracies = self.predictor.predict_designs(designs) if designs else []
        except Exception as e:
            position = self._failing_position(designs)
            raise EvaluationFailed(generation, encodings.index(fresh[position]), e) from e

        if needs_anchor(self.objective):
            for m, acc in zip(metrics, accuracies):
                if self._feasible(m) or not self.enforce:
                    self.objective = with_anchor(self.objective, m, float(acc))
                    self.anchor = self.objective.anchor
                    logger.info(
                        f"Priority anchor: E={m.energy_mj:.4g} mJ, D={m.delay_us:.4g} us, "
                        f"A={m.area_mm2:.4g} mm2, Acc={float(acc):.2f}%"
                    )
                    break

        for position, (design, m, acc) in enumerate(zip(designs, metrics, accuracies)):
            try:
                value = score(m, float(acc), self.objective)
            except Exception as e:
                raise EvaluationFailed(generation, encodings.index(fresh[position]), e) from e
            self.archive.add(design, m, float(acc), value, generation, self._feasible(m))

        if hits:
            logger.debug(f"[{self.tag}] generation {generation}: {hits} cache hits")
        return [self.archive.get(e) for e in encodings], hits

    # ============================================
    # Algorithm
    # ============================================

    def init_population(self) -> List[Tuple[int, ...]]:
        """Rejection-sample P acceptable designs"""
        population = []
        attempts = 0
        sizes = self.spec.gene_sizes[self.active]
        while len(population) < self.config.population:
            if attempts >= self.config.max_init_attempts:
                raise ExhaustedSampling(
                    f"[{self.tag}] only {len(population)} of {self.config.population} designs "
                    f"passed the memory/area test after {attempts} attempts "
                    f"(A_constr={self.config.area_constraint} mm2)",
                    attempts=attempts,
                    accepted=len(population),
                )
            attempts += 1
            encoding = self._full(self.sampling_rng.integers(0, sizes))
            if self._acceptable(encoding, 0, len(population)):
                population.append(encoding)
            else:
                self.rejections += 1
        logger.debug(f"[{self.tag}] initial population after {attempts} draws, {self.rejections} rejected")
        return population

    def _child(
        self,
        active_values: np.ndarray,
        parents: Tuple[ArchiveEntry, ArchiveEntry],
        generation: int,
        candidate: int,
    ) -> Tuple[Tuple[int, ...], bool]:
        encoding = self._full(active_values)
        if self._acceptable(encoding, generation, candidate):
            return encoding, True
        self.rejections += 1
        for _ in range(self.config.max_repair_attempts):
            parent = parents[int(self.mutation_rng.integers(0, 2))]
            genes = np.asarray(parent.design.encoding)[self.active]
            repaired = polynomial_mutation(genes, self.config.eta_m, self.config.mutation_prob,
                                           self.mutation_rng, self.upper)
            encoding = self._full(repaired)
            if self._acceptable(encoding, generation, candidate):
                return encoding, False
            self.rejections += 1
        return parents[0].design.encoding, False

    def _offspring(
        self, elite: List[ArchiveEntry], count: int, generation: int
    ) -> Tuple[List[Tuple[int, ...]], float]:
        children = []
        first_try = 0
        attempts = 0
        while len(children) < count:
            i, j = self.crossover_rng.integers(0, len(elite), size=2)
            parents = (elite[int(i)], elite[int(j)])
            genes_a = np.asarray(parents[0].design.encoding)[self.active]
            genes_b = np.asarray(parents[1].design.encoding)[self.active]
            child_a, child_b = sbx_crossover(genes_a, genes_b, self.config.eta_c,
                                             self.config.crossover_prob, self.crossover_rng, self.upper)
            for child in (child_a, child_b):
                if len(children) >= count:
                    break
                mutated = polynomial_mutation(child, self.config.eta_m, self.config.mutation_prob,
                                              self.mutation_rng, self.upper)
                encoding, ok = self._child(mutated, parents, generation, len(children))
                children.append(encoding)
                attempts += 1
                first_try += int(ok)
        return children, (first_try / attempts if attempts else 1.0)

    @staticmethod
    def _rank(entries: List[ArchiveEntry]) -> List[ArchiveEntry]:
        return sorted(entries, key=lambda e: (e.score, e.generation, e.index))

    def _record(self, generation: int, population: List[ArchiveEntry], feasible_fraction: float, hits: int) -> None:
        best = self.archive.best(feasible_only=self.enforce)
        scores = [e.score for e in population]
        record = ConvergenceRecord(
            generation=generation,
            best_score=best.score if best else float("nan"),
            mean_score=float(np.mean(scores)),
            feasible_fraction=feasible_fraction,
            evaluated=len(self.archive),
            cache_hits=hits,
        )
        self.convergence.append(record)
        logger.info(
            f"[{self.tag}] gen {generation:3d} | best {record.best_score:.6g} | "
            f"mean {record.mean_score:.6g} | feasible {feasible_fraction:.2f} | archive {len(self.archive)}"
        )

    def run(self) -> SearchResult:
        population_codes = self.init_population()
        population, hits = self.evaluate(population_codes, generation=0)
        total_hits = hits
        self._record(0, population, 1.0, hits)

        elite_size = max(2, self.config.population // 2)
        for generation in range(1, self.generations + 1):
            ranked = self._rank(population)
            elite = ranked[:elite_size]
            children, fraction = self._offspring(elite, self.config.population - len(elite), generation)
            offspring, hits = self.evaluate(children, generation)
            total_hits += hits
            population = elite + offspring
            self._record(generation, population, fraction, hits)

        return SearchResult(
            archive=self.archive,
            objective=self.objective,
            convergence=self.convergence,
            rejections=self.rejections,
            cache_hits=total_hits,
            anchor=self.anchor,
        )


def run_search(
    spec: SearchSpaceSpec,
    config: SearchConfig,
    evaluator: DesignEvaluator,
    predictor,
    **options,
) -> SearchResult:
    """Joint search over every gene group unless options narrow it"""
    return EvolutionarySearch(spec, config, evaluator, predictor, **options).run()
