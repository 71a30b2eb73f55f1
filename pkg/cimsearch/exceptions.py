"""
Exception hierarchy

Every error raised on purpose by the engine derives from CimSearchError,
which is a ValueError so callers that only know about bad input still catch it.
"""

from typing import Optional


class CimSearchError(ValueError):
    """Base class for all engine errors"""


# ============================================
# Spec / config errors
# ============================================

class SpecError(CimSearchError):
    """A spec, template, profile or run config could not be loaded"""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class SpecNotFound(SpecError):
    """Referenced file does not exist"""


class MissingKey(SpecError):
    """A required key is absent"""


class EmptyChoiceList(SpecError):
    """A choice list has no values"""


class UnknownTemplate(SpecError):
    """Model template is not one of the supported families"""


class InvalidChoiceList(SpecError):
    """Choice list is unsorted, duplicated or otherwise malformed"""


class SearchSpaceTooLarge(CimSearchError):
    """Exhaustive enumeration requested above the allowed limit"""


# ============================================
# Genome / workload errors
# ============================================

class IndexOutOfRange(CimSearchError):
    """Encoding index outside its choice list"""

    def __init__(self, gene: str, index: int, size: int):
        self.gene = gene
        super().__init__(f"{gene}: index {index} outside 0..{size - 1}")


class InvalidGenome(CimSearchError):
    """Genome or policy value not in the spec's choice lists"""


class PrecisionOutOfRange(CimSearchError):
    """Histogram precision outside 1..16 bits"""


class EmptyHistogram(CimSearchError):
    """Histogram holds no samples"""


class MissingHistogram(CimSearchError):
    """Energy requested for a layer without histograms"""


class InfeasibleDesign(CimSearchError):
    """Design does not fit the hardware or violates the area constraint"""


# ============================================
# Predictor errors
# ============================================

class InconsistentEncodingLength(CimSearchError):
    """Training samples with different encoding lengths"""


class ShapeMismatch(CimSearchError):
    """Encoding length does not match the model input layer"""


class CheckpointError(CimSearchError):
    """Checkpoint file missing or unreadable"""


class SchemaVersionMismatch(CimSearchError):
    """File written by an incompatible schema version"""


# ============================================
# Search errors
# ============================================

class ZeroAccuracy(CimSearchError):
    """Score requested for a non-positive accuracy"""


class UnsetAnchor(CimSearchError):
    """Priority objective used before its normalization anchor was set"""


class LengthMismatch(CimSearchError):
    """Crossover parents of different lengths"""


class SearchError(CimSearchError):
    """Search could not complete"""


class ExhaustedSampling(SearchError):
    """Rejection sampling hit its attempt cap"""

    def __init__(self, message: str, attempts: int = 0, accepted: int = 0):
        self.attempts = attempts
        self.accepted = accepted
        super().__init__(message)


class EvaluationFailed(SearchError):
    """Candidate evaluation raised; carries generation and candidate index"""

    def __init__(self, generation: int, candidate: int, cause: Exception):
        self.generation = generation
        self.candidate = candidate
        super().__init__(
            f"evaluation failed at generation {generation}, candidate {candidate}: {cause}"
        )
