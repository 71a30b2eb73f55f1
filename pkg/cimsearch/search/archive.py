"""
Archive of evaluated designs

Every evaluated design is stored once, keyed by its canonical encoding.
Repeat visits are served from the archive and counted as hits.
"""

import logging
from collections import Counter
from typing import Iterator, List, NamedTuple, Optional, Sequence

import numpy as np

from cimsearch.models.schemas import (
    ArchiveEntry,
    DesignPoint,
    HardwareMetrics,
    ObjectiveSpec,
    SearchSpaceSpec,
)
from cimsearch.search.objective import score
from cimsearch.search.operators import hamming_distance
from cimsearch.services.space import canonical

logger = logging.getLogger(__name__)


class Archive:
    """Insertion-ordered store of ArchiveEntry objects"""

    def __init__(self, spec: SearchSpaceSpec):
        self.spec = spec
        self.entries: List[ArchiveEntry] = []
        self._index = {}
        self.hits: Counter = Counter()

    def key(self, encoding: Sequence[int]) -> tuple:
        return canonical(self.spec, encoding)

    def get(self, encoding: Sequence[int]) -> Optional[ArchiveEntry]:
        position = self._index.get(self.key(encoding))
        return None if position is None else self.entries[position]

    def lookup(self, encoding: Sequence[int]) -> Optional[ArchiveEntry]:
        """get() that counts a cache hit"""
        entry = self.get(encoding)
        if entry is not None:
            self.hits[entry.index] += 1
        return entry

    def __contains__(self, encoding) -> bool:
        return self.key(encoding) in self._index

    def add(
        self,
        design: DesignPoint,
        metrics: HardwareMetrics,
        accuracy: float,
        score_value: float,
        generation: int,
        feasible: bool,
    ) -> ArchiveEntry:
        key = self.key(design.encoding)
        if key in self._index:
            return self.entries[self._index[key]]
        entry = ArchiveEntry(
            index=len(self.entries),
            generation=generation,
            design=design,
            metrics=metrics,
            accuracy=accuracy,
            score=score_value,
            feasible=feasible,
        )
        self._index[key] = entry.index
        self.entries.append(entry)
        return entry

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ArchiveEntry]:
        return iter(self.entries)

    @property
    def total_hits(self) -> int:
        return sum(self.hits.values())

    def best(self, feasible_only: bool = True) -> Optional[ArchiveEntry]:
        pool = [e for e in self.entries if e.feasible or not feasible_only]
        if not pool:
            return None
        return min(pool, key=lambda e: (e.score, e.generation, e.index))


class TopK(NamedTuple):
    entries: List[ArchiveEntry]
    scores: List[float]
    truncated: bool


def select_top_k(entries: Sequence[ArchiveEntry], objective: Optional[ObjectiveSpec], k: int) -> TopK:
    """
    Best k feasible entries over all generations.

    With an objective the entries are rescored; ties break by generation,
    then insertion order. truncated is set when fewer than k entries qualify.
    """
    feasible = [e for e in entries if e.feasible]
    if objective is None:
        scored = [(e.score, e) for e in feasible]
    else:
        scored = [(score(e.metrics, e.accuracy, objective), e) for e in feasible]
    scored.sort(key=lambda pair: (pair[0], pair[1].generation, pair[1].index))
    truncated = len(scored) < k
    if truncated:
        logger.warning(f"⚠ Only {len(scored)} feasible designs archived, {k} requested")
    chosen = scored[:k]
    return TopK(entries=[e for _, e in chosen], scores=[s for s, _ in chosen], truncated=truncated)


def diversity(encodings: Sequence[Sequence[int]]) -> float:
    """Mean pairwise normalized Hamming distance, in [0, 1]"""
    if len(encodings) < 2:
        logger.warning("⚠ Diversity needs at least two designs, reporting 0")
        return 0.0
    distances = [
        hamming_distance(encodings[i], encodings[j])
        for i in range(len(encodings))
        for j in range(i + 1, len(encodings))
    ]
    return float(np.mean(distances))
