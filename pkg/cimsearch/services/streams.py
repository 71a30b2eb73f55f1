"""
Named random streams

Every random decision draws from a stream derived from (root seed, name, extra keys),
so adding a draw in one place never shifts the numbers seen elsewhere.
"""

import zlib
from typing import Union

import numpy as np

SAMPLING = "sampling"
CROSSOVER = "crossover"
MUTATION = "mutation"
SYNTH_VALUES = "synth-values"
ORACLE_NOISE = "oracle-noise"
BASELINE = "baseline"
PREDICTOR = "predictor"

Part = Union[int, str]


def _key(part: Part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, name: str, *parts: Part) -> np.random.Generator:
    """Generator for stream `name`, optionally split further by `parts`"""
    sequence = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(_key(name),) + tuple(_key(p) for p in parts),
    )
    return np.random.default_rng(sequence)
