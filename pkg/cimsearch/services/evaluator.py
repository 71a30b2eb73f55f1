"""
Design evaluator

Binds a spec, a technology profile and the synthetic workload settings into one
object that turns design points into hardware metrics. Instances are pickled
into joblib workers, so they hold no open resources.
"""

import logging
from typing import Dict, List, Optional, Tuple

from cimsearch.models.schemas import (
    DesignPoint,
    GeneGroup,
    HardwareMetrics,
    LayerCost,
    LayerHistograms,
    LayerWorkload,
    SearchSpaceSpec,
    TechnologyProfile,
    ValueDistribution,
)
from cimsearch.services import cim_cost
from cimsearch.services.space import canonical, gene_slices
from cimsearch.services.workload import build_layer_histograms, expand_model

logger = logging.getLogger(__name__)

CACHE_LIMIT = 4096


class DesignEvaluator:
    """Workload expansion, histograms and cost model for one search space"""

    def __init__(
        self,
        spec: SearchSpaceSpec,
        tech: TechnologyProfile,
        inputs: Optional[ValueDistribution] = None,
        weights: Optional[ValueDistribution] = None,
        seed: int = 0,
        sample_cap: Optional[int] = None,
    ):
        self.spec = spec
        self.tech = tech
        self.inputs = inputs or ValueDistribution(kind="half_gaussian", scale=0.3)
        self.weights = weights or ValueDistribution(kind="uniform_nonneg")
        self.seed = seed
        self.sample_cap = sample_cap
        self._hw_start = gene_slices(spec)[GeneGroup.HARDWARE].start
        self._cache: Dict[Tuple[int, ...], Tuple[List[LayerWorkload], Dict[str, LayerHistograms]]] = {}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state

    def network(self, design: DesignPoint) -> Tuple[List[LayerWorkload], Dict[str, LayerHistograms]]:
        """Layer workloads and histograms; shared by designs with the same network"""
        key = canonical(self.spec, design.encoding)[: self._hw_start]
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        workloads = expand_model(self.spec, design.model, design.quant)
        histograms = build_layer_histograms(
            workloads, self.inputs, self.weights, seed=self.seed, sample_cap=self.sample_cap
        )
        if len(self._cache) >= CACHE_LIMIT:
            self._cache.clear()
        self._cache[key] = (workloads, histograms)
        return workloads, histograms

    def metrics(self, design: DesignPoint) -> HardwareMetrics:
        workloads, histograms = self.network(design)
        return cim_cost.evaluate(design, workloads, histograms, self.tech)

    def layer_costs(self, design: DesignPoint) -> List[LayerCost]:
        workloads, histograms = self.network(design)
        mapping = cim_cost.map_network(workloads, design.hardware)
        return cim_cost.layer_costs(mapping, workloads, histograms, design.hardware, self.tech)

    def area(self, design: DesignPoint) -> float:
        return cim_cost.compute_area(design.hardware, self.tech)

    def fits_memory(self, design: DesignPoint) -> bool:
        """Capacity test only, no energy or delay"""
        workloads, _ = self.network(design)
        mapping = cim_cost.map_network(workloads, design.hardware)
        return cim_cost.check_feasibility(mapping, design.hardware)

    def cheap_check(self, design: DesignPoint, area_constraint: Optional[float]) -> bool:
        """Memory fit plus the area constraint, used while sampling"""
        if area_constraint is not None and self.area(design) > area_constraint:
            return False
        return self.fits_memory(design)
