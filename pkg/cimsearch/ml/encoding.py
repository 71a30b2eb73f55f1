"""
One-hot encoding of model and quantization genes

Padded blocks (deeper than the stage's chosen depth) get a dedicated inactive
slot, so two genomes that build the same network encode identically.
"""

from typing import Iterable, Sequence, Tuple

import numpy as np
from sklearn.preprocessing import OneHotEncoder

from cimsearch.exceptions import InvalidGenome
from cimsearch.models.schemas import (
    DesignPoint,
    GeneGroup,
    HardwareConfig,
    ModelGenome,
    QuantPolicy,
    SearchSpaceSpec,
)
from cimsearch.services.space import encode_parts, median_hardware

INACTIVE = -1


class FeatureEncoder:
    """Maps encodings of a spec onto fixed-length one-hot vectors"""

    def __init__(
        self,
        spec: SearchSpaceSpec,
        groups: Tuple[GeneGroup, ...] = (GeneGroup.MODEL, GeneGroup.QUANT),
    ):
        self.spec = spec
        self.groups = tuple(groups)
        self._columns = [i for i, g in enumerate(spec.genes) if g.group in self.groups]
        self._genes = [spec.genes[i] for i in self._columns]

        categories = []
        for gene in self._genes:
            values = list(range(gene.size))
            if gene.can_be_inactive:
                values = [INACTIVE] + values
            categories.append(np.array(values, dtype=np.int64))

        self._encoder = OneHotEncoder(categories=categories, sparse_output=False, dtype=np.float64)
        self._encoder.fit(np.zeros((1, len(self._genes)), dtype=np.int64))

    @property
    def length(self) -> int:
        return int(sum(len(c) for c in self._encoder.categories_))

    def slot_names(self) -> list:
        return [
            f"{gene.name}={'off' if c == INACTIVE else c}"
            for gene, cats in zip(self._genes, self._encoder.categories_)
            for c in cats
        ]

    def transform(self, encodings: Iterable[Sequence[int]]) -> np.ndarray:
        """(n, genes) index encodings -> (n, length) one-hot matrix"""
        full = np.atleast_2d(np.asarray(list(encodings), dtype=np.int64))
        if full.shape[1] != len(self.spec.genes):
            raise InvalidGenome(
                f"encoding has {full.shape[1]} genes, spec expects {len(self.spec.genes)}"
            )
        stages = self.spec.stage_count
        depths = np.stack(
            [np.asarray(self.spec.depth_choices[s])[full[:, s]] for s in range(stages)], axis=1
        )
        picked = full[:, self._columns].copy()
        for j, gene in enumerate(self._genes):
            if gene.block >= 0:
                picked[depths[:, gene.stage] <= gene.block, j] = INACTIVE
        return self._encoder.transform(picked)

    def transform_designs(self, designs: Sequence[DesignPoint]) -> np.ndarray:
        return self.transform([d.encoding for d in designs])


def one_hot_encode(
    spec: SearchSpaceSpec,
    model: ModelGenome,
    quant: QuantPolicy,
    hardware: HardwareConfig = None,
) -> np.ndarray:
    """One-hot vector of a single (model, quant) pair"""
    hw = hardware or median_hardware(spec)
    encoding = encode_parts(spec, model, quant, hw)
    return FeatureEncoder(spec).transform([encoding])[0]
