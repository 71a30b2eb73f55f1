"""
Variation operators on index genomes

Simulated binary crossover and polynomial mutation work in continuous index
space; results are rounded to the nearest index and clamped to each gene's range.
"""

from typing import Tuple

import numpy as np

from cimsearch.exceptions import LengthMismatch


def _round(values: np.ndarray) -> np.ndarray:
    # Half rounds up
    return np.floor(values + 0.5)


def sbx_beta(u, eta: float):
    """Spread factor for uniform draw(s) u"""
    u = np.asarray(u, dtype=np.float64)
    low = (2.0 * u) ** (1.0 / (eta + 1.0))
    with np.errstate(divide="ignore"):
        high = (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0))
    return np.where(u <= 0.5, low, high)


def mutation_delta(u, eta: float):
    u = np.asarray(u, dtype=np.float64)
    low = (2.0 * u) ** (1.0 / (eta + 1.0)) - 1.0
    high = 1.0 - (2.0 * (1.0 - u)) ** (1.0 / (eta + 1.0))
    return np.where(u < 0.5, low, high)


def sbx_crossover(
    parent_a,
    parent_b,
    eta: float,
    prob: float,
    rng,
    upper,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Two children from two parents.

    Each gene pair crosses with probability prob; otherwise children copy the
    parents. upper holds the largest valid index per gene.
    """
    a = np.asarray(parent_a, dtype=np.float64)
    b = np.asarray(parent_b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"parents have {a.size} and {b.size} genes")
    n = a.size
    cross = rng.random(n) < prob
    beta = sbx_beta(rng.random(n), eta)

    # 0.5[(1+beta)a + (1-beta)b] in midpoint form; equal genes give zero spread
    mid = 0.5 * (a + b)
    diff = b - a
    with np.errstate(invalid="ignore"):
        spread = np.where(diff == 0, 0.0, 0.5 * beta * diff)
    child_a = np.where(cross, mid - spread, a)
    child_b = np.where(cross, mid + spread, b)

    high = np.asarray(upper, dtype=np.float64)
    child_a = np.clip(_round(child_a), 0, high).astype(np.int64)
    child_b = np.clip(_round(child_b), 0, high).astype(np.int64)
    return child_a, child_b


def polynomial_mutation(genome, eta: float, prob: float, rng, upper) -> np.ndarray:
    """Perturb each gene with probability prob by delta * (index range)"""
    x = np.asarray(genome, dtype=np.float64)
    high = np.asarray(upper, dtype=np.float64)
    n = x.size
    mutate = rng.random(n) < prob
    delta = mutation_delta(rng.random(n), eta)
    mutated = np.where(mutate, x + delta * high, x)
    return np.clip(_round(mutated), 0, high).astype(np.int64)


def hamming_distance(a, b) -> float:
    """Fraction of genes that differ"""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise LengthMismatch(f"genomes have {a.size} and {b.size} genes")
    if a.size == 0:
        return 0.0
    return float(np.mean(a != b))
