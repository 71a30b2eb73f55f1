"""
Benchmark Script: Design Evaluation Throughput

Measures how many designs per second the cost model evaluates on a search space,
with cold network caches, warm caches, and a joblib worker pool.
"""

import logging
import sys
import time
from pathlib import Path
from typing import List, Tuple

import numpy as np
from joblib import Parallel, delayed

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from cimsearch.config import PACKAGE_DATA_DIR
from cimsearch.services.cim_cost import load_profile
from cimsearch.services.evaluator import DesignEvaluator
from cimsearch.services.space import load_spec, sample_uniform
from cimsearch.services.streams import SAMPLING, stream

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _metrics_batch(evaluator: DesignEvaluator, designs: List) -> int:
    for design in designs:
        evaluator.metrics(design)
    return len(designs)


def benchmark_serial(evaluator: DesignEvaluator, designs: List, repeats: int = 3) -> Tuple[float, float]:
    """Designs per second with a cold cache, then with every network cached"""
    cold = []
    for _ in range(repeats):
        evaluator._cache.clear()
        start = time.perf_counter()
        _metrics_batch(evaluator, designs)
        cold.append(len(designs) / (time.perf_counter() - start))

    start = time.perf_counter()
    _metrics_batch(evaluator, designs)
    warm = len(designs) / (time.perf_counter() - start)
    return float(np.median(cold)), warm


def benchmark_pool(evaluator: DesignEvaluator, designs: List, workers: int) -> float:
    """Designs per second across a worker pool (cold caches per worker)"""
    chunks = [designs[i::workers] for i in range(workers)]
    start = time.perf_counter()
    Parallel(n_jobs=workers)(delayed(_metrics_batch)(evaluator, chunk) for chunk in chunks)
    return len(designs) / (time.perf_counter() - start)


def run_benchmark(spec_name: str = "mobilenet_reference", count: int = 200, workers: int = 4):
    logger.info("=" * 80)
    logger.info(f"EVALUATION THROUGHPUT BENCHMARK ({spec_name})")
    logger.info("=" * 80)

    spec = load_spec(PACKAGE_DATA_DIR / "specs" / f"{spec_name}.yaml")
    tech = load_profile(PACKAGE_DATA_DIR / "profiles" / "rram_32nm.yaml")
    evaluator = DesignEvaluator(spec, tech, sample_cap=2048)

    rng = stream(0, SAMPLING, "benchmark")
    designs = [sample_uniform(spec, rng) for _ in range(count)]
    logger.info(f"Sampled {len(designs)} designs ({len(spec.genes)} genes each)")

    cold, warm = benchmark_serial(evaluator, designs)
    pooled = benchmark_pool(evaluator, designs, workers)

    logger.info(f"Serial, cold cache:   {cold:10.1f} designs/s")
    logger.info(f"Serial, warm cache:   {warm:10.1f} designs/s")
    logger.info(f"Pool of {workers}, cold:     {pooled:10.1f} designs/s")
    logger.info(f"✓ Warm/cold speedup: {warm / cold:.1f}x | pool speedup: {pooled / cold:.1f}x")


if __name__ == "__main__":
    run_benchmark(*sys.argv[1:2])
