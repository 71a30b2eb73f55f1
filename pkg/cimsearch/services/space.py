"""
Search space service

Loads search-space specs, counts them, and maps between index encodings and
typed design points. The flat gene layout lives on SearchSpaceSpec.genes.
"""

import logging
from itertools import product
from math import prod
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import ValidationError

from cimsearch.config import read_yaml
from cimsearch.exceptions import (
    EmptyChoiceList,
    IndexOutOfRange,
    InvalidChoiceList,
    InvalidGenome,
    MissingKey,
    SearchSpaceTooLarge,
    SpecError,
    UnknownTemplate,
)
from cimsearch.models.schemas import (
    HARDWARE_FIELDS,
    HARDWARE_GENES,
    TEMPLATE_CONV_KINDS,
    DesignPoint,
    GeneGroup,
    HardwareConfig,
    ModelGenome,
    ModelTemplate,
    QuantPolicy,
    SearchSpaceSpec,
)

logger = logging.getLogger(__name__)

REQUIRED_KEYS = (
    "model_template",
    "stage_count",
    "depth_choices",
    "kernel_choices",
    "expansion_choices",
    "weight_bits_choices",
    "input_bits_choices",
    "hardware_gene_choices",
)


class Cardinality(NamedTuple):
    model: int
    quant: int
    hardware: int

    @property
    def total(self) -> int:
        return self.model * self.quant * self.hardware


# ============================================
# Loading
# ============================================

def _check_list(key: str, values) -> None:
    if not isinstance(values, (list, tuple)):
        raise InvalidChoiceList("expected a list", key=key)
    if len(values) == 0:
        raise EmptyChoiceList("choice list is empty", key=key)
    if any(isinstance(v, (list, tuple, dict)) for v in values):
        raise InvalidChoiceList("expected scalar values", key=key)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InvalidChoiceList("values must be strictly increasing", key=key)


def _check_document(doc: dict) -> None:
    for key in REQUIRED_KEYS:
        if key not in doc:
            raise MissingKey("required key missing", key=key)

    try:
        template = ModelTemplate(doc["model_template"])
    except ValueError:
        known = ", ".join(t.value for t in ModelTemplate)
        raise UnknownTemplate(f"'{doc['model_template']}' (known: {known})", key="model_template")

    depths = doc["depth_choices"]
    if isinstance(depths, (list, tuple)) and depths and isinstance(depths[0], (list, tuple)):
        for s, stage_depths in enumerate(depths):
            _check_list(f"depth_choices[{s}]", stage_depths)
    else:
        _check_list("depth_choices", depths)

    _check_list("kernel_choices", doc["kernel_choices"])
    _check_list("expansion_choices", doc["expansion_choices"])
    if "width_mult_choices" in doc:
        _check_list("width_mult_choices", doc["width_mult_choices"])

    for table_key in ("weight_bits_choices", "input_bits_choices"):
        table = doc[table_key]
        if not isinstance(table, dict):
            raise InvalidChoiceList("expected a mapping of conv kind to list", key=table_key)
        for kind in TEMPLATE_CONV_KINDS[template]:
            if kind.value not in table:
                raise MissingKey("required key missing", key=f"{table_key}.{kind.value}")
            _check_list(f"{table_key}.{kind.value}", table[kind.value])

    hardware = doc["hardware_gene_choices"]
    if not isinstance(hardware, dict):
        raise InvalidChoiceList("expected a mapping of gene to list", key="hardware_gene_choices")
    for gene in HARDWARE_GENES:
        if gene not in hardware:
            raise MissingKey("required key missing", key=f"hardware_gene_choices.{gene}")
        _check_list(f"hardware_gene_choices.{gene}", hardware[gene])
    unknown = set(hardware) - set(HARDWARE_GENES)
    if unknown:
        raise InvalidChoiceList(f"unknown genes {sorted(unknown)}", key="hardware_gene_choices")


def load_spec(document: Union[str, Path, dict]) -> SearchSpaceSpec:
    """
    Parse and validate a search-space spec.

    Accepts a path to a YAML file, YAML text, or an already-parsed mapping.
    Raises SpecError subclasses naming the offending key.
    """
    if isinstance(document, Path):
        doc = read_yaml(document, "search space spec")
    elif isinstance(document, str):
        try:
            doc = yaml.safe_load(document)
        except yaml.YAMLError as e:
            raise SpecError(f"cannot parse spec: {e}") from e
        if not isinstance(doc, dict):
            raise SpecError("spec must be a mapping")
    else:
        doc = dict(document)

    _check_document(doc)

    # Hardware genes in canonical order
    doc["hardware_gene_choices"] = {
        gene: doc["hardware_gene_choices"][gene] for gene in HARDWARE_GENES
    }
    try:
        spec = SearchSpaceSpec(**doc)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(p) for p in first["loc"]) or None
        raise InvalidChoiceList(first["msg"], key=key) from e

    logger.debug(f"Loaded spec '{spec.name}' with {len(spec.genes)} genes")
    return spec


# ============================================
# Counting
# ============================================

def cardinality(spec: SearchSpaceSpec) -> Cardinality:
    """Distinct designs per gene family; padded blocks do not count"""
    per_block = len(spec.kernel_choices) * len(spec.expansion_choices)
    model = len(spec.width_mult_choices)
    for depths in spec.depth_choices:
        model *= sum(per_block ** d for d in depths)
    quant = prod(g.size for g in spec.genes if g.group == GeneGroup.QUANT)
    hardware = prod(len(v) for v in spec.hardware_gene_choices.values())
    return Cardinality(model=model, quant=quant, hardware=hardware)


def format_cardinality(n: int) -> str:
    """Exact count, with a rounded power-of-ten form once it gets long"""
    if n < 10 ** 6:
        return str(n)
    exponent = len(str(n)) - 1
    return f"{n} (~{n / 10 ** exponent:.1f}x10^{exponent})"


# ============================================
# Encoding
# ============================================

def gene_slices(spec: SearchSpaceSpec) -> Dict[GeneGroup, slice]:
    """Contiguous index ranges of each gene family"""
    slices = {}
    start = 0
    for group in GeneGroup:
        count = sum(1 for g in spec.genes if g.group == group)
        slices[group] = slice(start, start + count)
        start += count
    return slices


def _check_indices(spec: SearchSpaceSpec, indices: Sequence[int]) -> List[int]:
    genes = spec.genes
    if len(indices) != len(genes):
        raise InvalidGenome(f"encoding has {len(indices)} genes, spec expects {len(genes)}")
    checked = []
    for gene, index in zip(genes, indices):
        i = int(index)
        if not 0 <= i < gene.size:
            raise IndexOutOfRange(gene.name, i, gene.size)
        checked.append(i)
    return checked


def decode(spec: SearchSpaceSpec, indices: Sequence[int]) -> DesignPoint:
    """Index encoding -> design point"""
    idx = _check_indices(spec, indices)
    genes = spec.genes
    values = [g.choices[i] for g, i in zip(genes, idx)]

    pos = 0
    depths = []
    for _ in range(spec.stage_count):
        depths.append(int(values[pos]))
        pos += 1
    kernels, expansions = [], []
    for max_depth in spec.max_depths:
        ks, es = [], []
        for _ in range(max_depth):
            ks.append(int(values[pos]))
            es.append(float(values[pos + 1]))
            pos += 2
        kernels.append(tuple(ks))
        expansions.append(tuple(es))
    width = float(values[pos])
    pos += 1

    kinds = spec.conv_kinds
    w_bits = {k: [] for k in kinds}
    in_bits = {k: [] for k in kinds}
    for max_depth in spec.max_depths:
        stage_w = {k: [] for k in kinds}
        stage_in = {k: [] for k in kinds}
        for _ in range(max_depth):
            for kind in kinds:
                stage_w[kind].append(int(values[pos]))
                stage_in[kind].append(int(values[pos + 1]))
                pos += 2
        for kind in kinds:
            w_bits[kind].append(tuple(stage_w[kind]))
            in_bits[kind].append(tuple(stage_in[kind]))

    hardware = HardwareConfig(
        **{gene: values[pos + j] for j, gene in enumerate(HARDWARE_GENES)},
        execution_mode=spec.execution_mode,
    )

    model = ModelGenome.model_construct(
        depths=tuple(depths), kernels=tuple(kernels), expansions=tuple(expansions), width_mult=width
    )
    quant = QuantPolicy.model_construct(
        weight_bits={k: tuple(v) for k, v in w_bits.items()},
        input_bits={k: tuple(v) for k, v in in_bits.items()},
        fixed_bits=8,
    )
    return DesignPoint.model_construct(model=model, quant=quant, hardware=hardware, encoding=tuple(idx))


def _index_of(gene_name: str, choices: tuple, value) -> int:
    for i, choice in enumerate(choices):
        if choice == value:
            return i
    raise InvalidGenome(f"{gene_name}: value {value} not in {list(choices)}")


def encode_parts(
    spec: SearchSpaceSpec,
    model: ModelGenome,
    quant: QuantPolicy,
    hardware: HardwareConfig,
) -> tuple:
    """Typed genome parts -> index encoding; rejects values outside the choice lists"""
    if len(model.depths) != spec.stage_count:
        raise InvalidGenome(f"genome has {len(model.depths)} stages, spec expects {spec.stage_count}")
    values = list(model.depths)
    for s, max_depth in enumerate(spec.max_depths):
        if len(model.kernels[s]) != max_depth or len(model.expansions[s]) != max_depth:
            raise InvalidGenome(f"stage {s} must list {max_depth} blocks (padded)")
        for b in range(max_depth):
            values.extend((model.kernels[s][b], model.expansions[s][b]))
    values.append(model.width_mult)
    for s, max_depth in enumerate(spec.max_depths):
        for b in range(max_depth):
            for kind in spec.conv_kinds:
                try:
                    values.append(quant.weight_bits[kind][s][b])
                    values.append(quant.input_bits[kind][s][b])
                except (KeyError, IndexError):
                    raise InvalidGenome(f"policy lacks {kind.value} bits for stage {s} block {b}")
    values.extend(hardware.gene_value(gene) for gene in HARDWARE_GENES)
    return tuple(_index_of(g.name, g.choices, v) for g, v in zip(spec.genes, values))


def encode(spec: SearchSpaceSpec, design: DesignPoint) -> tuple:
    """Design point -> index encoding, recomputed from its typed parts"""
    return encode_parts(spec, design.model, design.quant, design.hardware)


def make_design(
    spec: SearchSpaceSpec,
    model: ModelGenome,
    quant: QuantPolicy,
    hardware: HardwareConfig,
) -> DesignPoint:
    """Validate typed parts against the spec and attach their encoding"""
    return decode(spec, encode_parts(spec, model, quant, hardware))


def canonical(spec: SearchSpaceSpec, indices: Sequence[int]) -> tuple:
    """Encoding with inactive blocks reset to index 0"""
    idx = list(indices)
    genes = spec.genes
    depths = [genes[s].choices[idx[s]] for s in range(spec.stage_count)]
    for pos, gene in enumerate(genes):
        if gene.block >= 0 and gene.block >= depths[gene.stage]:
            idx[pos] = 0
    return tuple(idx)


# ============================================
# Sampling and enumeration
# ============================================

def sample_uniform(spec: SearchSpaceSpec, rng: np.random.Generator) -> DesignPoint:
    """Independent uniform draw for every gene"""
    return decode(spec, sample_indices(spec, rng))


def sample_indices(spec: SearchSpaceSpec, rng: np.random.Generator) -> tuple:
    return tuple(int(i) for i in rng.integers(0, spec.gene_sizes))


def enumerate_designs(spec: SearchSpaceSpec, limit: int = 1_000_000) -> Iterator[DesignPoint]:
    """
    Every distinct design, once.

    Inactive model blocks stay at index 0 so each architecture appears once;
    quantization genes are enumerated in full, matching cardinality().
    """
    total = cardinality(spec).total
    if total > limit:
        raise SearchSpaceTooLarge(f"space has {format_cardinality(total)} designs, limit is {limit:,}")

    genes = spec.genes
    depth_ranges = [range(genes[s].size) for s in range(spec.stage_count)]
    for depth_idx in product(*depth_ranges):
        depths = [genes[s].choices[i] for s, i in enumerate(depth_idx)]
        ranges = [range(i, i + 1) for i in depth_idx]
        for gene in genes[spec.stage_count:]:
            padded = gene.group == GeneGroup.MODEL and gene.block >= 0 and gene.block >= depths[gene.stage]
            ranges.append(range(1) if padded else range(gene.size))
        for idx in product(*ranges):
            yield decode(spec, idx)


# ============================================
# Reference points
# ============================================

def median_index(size: int) -> int:
    return size // 2


def median_indices(spec: SearchSpaceSpec) -> tuple:
    return tuple(median_index(len(spec.hardware_gene_choices[g])) for g in HARDWARE_GENES)


def median_hardware(spec: SearchSpaceSpec) -> HardwareConfig:
    """Median value of every hardware gene"""
    return HardwareConfig(
        **{g: spec.hardware_gene_choices[g][i] for g, i in zip(HARDWARE_GENES, median_indices(spec))},
        execution_mode=spec.execution_mode,
    )


def reference_indices(spec: SearchSpaceSpec, hardware_indices: Optional[Sequence[int]] = None) -> tuple:
    """
    Reference network: max depth, smallest kernel, largest expansion,
    width closest to 1.0, highest precision everywhere.
    """
    width_idx = int(np.argmin([abs(w - 1.0) for w in spec.width_mult_choices]))
    idx = []
    for gene in spec.genes:
        if gene.group == GeneGroup.HARDWARE:
            continue
        if gene.name.startswith("depth"):
            idx.append(gene.size - 1)
        elif gene.name.startswith("kernel"):
            idx.append(0)
        elif gene.name == "width_mult":
            idx.append(width_idx)
        else:
            idx.append(gene.size - 1)
    hw = tuple(hardware_indices) if hardware_indices is not None else median_indices(spec)
    return tuple(idx) + hw


def reference_design(spec: SearchSpaceSpec, hardware_indices: Optional[Sequence[int]] = None) -> DesignPoint:
    return decode(spec, reference_indices(spec, hardware_indices))


def hardware_from_mapping(spec: SearchSpaceSpec, mapping: dict) -> HardwareConfig:
    """Hardware from a {gene or field name: value} mapping, median for missing genes"""
    base = median_hardware(spec)
    values = {g: base.gene_value(g) for g in HARDWARE_GENES}
    by_field = {f: g for g, f in HARDWARE_FIELDS.items()}
    for key, value in mapping.items():
        gene = key if key in HARDWARE_GENES else by_field.get(key)
        if gene is None:
            raise InvalidGenome(f"unknown hardware gene '{key}'")
        values[gene] = value
    return HardwareConfig(**values, execution_mode=spec.execution_mode)



# ============================================
# Design files
# ============================================

def _pad(values: Sequence, length: int, filler) -> tuple:
    values = tuple(values)
    return values + (filler,) * (length - len(values))


def design_from_document(spec: SearchSpaceSpec, doc: dict) -> DesignPoint:
    """
    Design from a parsed design file.

    Either `encoding: [indices...]`, or any of
    `model: reference | {depths, kernels, expansions, width_mult}`,
    `quant: reference | {weight_bits: {kind: [[...]]}, input_bits: {...}}`,
    `hardware: median | {gene: value}`. Blocks beyond a stage's depth may be left out.
    """
    try:
        return _design_from_document(spec, doc)
    except ValidationError as e:
        first = e.errors()[0]
        raise InvalidGenome(f"{'.'.join(str(p) for p in first['loc'])}: {first['msg']}") from e


def _design_from_document(spec: SearchSpaceSpec, doc: dict) -> DesignPoint:
    if not isinstance(doc, dict):
        raise SpecError("design file must contain a mapping")
    if "encoding" in doc:
        return decode(spec, doc["encoding"])

    reference = reference_design(spec)
    model = reference.model
    quant = reference.quant
    hardware = reference.hardware

    model_doc = doc.get("model", "reference")
    if isinstance(model_doc, dict):
        try:
            depths = tuple(int(d) for d in model_doc["depths"])
            kernels = tuple(
                _pad(model_doc["kernels"][s], spec.max_depths[s], spec.kernel_choices[0])
                for s in range(spec.stage_count)
            )
            expansions = tuple(
                _pad(model_doc["expansions"][s], spec.max_depths[s], spec.expansion_choices[0])
                for s in range(spec.stage_count)
            )
        except (KeyError, IndexError, TypeError) as e:
            raise InvalidGenome(f"model section incomplete: {e}") from e
        model = ModelGenome(
            depths=depths,
            kernels=kernels,
            expansions=expansions,
            width_mult=model_doc.get("width_mult", spec.width_mult_choices[0]),
        )
    elif model_doc != "reference":
        raise SpecError(f"unknown model preset '{model_doc}'", key="model")

    quant_doc = doc.get("quant", "reference")
    if isinstance(quant_doc, dict):
        tables = {}
        for section, choices in (("weight_bits", spec.weight_bits_choices), ("input_bits", spec.input_bits_choices)):
            table = {}
            for kind in spec.conv_kinds:
                try:
                    rows = quant_doc[section][kind.value]
                    table[kind] = tuple(
                        _pad(rows[s], spec.max_depths[s], choices[kind][-1]) for s in range(spec.stage_count)
                    )
                except (KeyError, IndexError, TypeError) as e:
                    raise InvalidGenome(f"quant.{section}.{kind.value} incomplete: {e}") from e
            tables[section] = table
        quant = QuantPolicy(weight_bits=tables["weight_bits"], input_bits=tables["input_bits"])
    elif quant_doc != "reference":
        raise SpecError(f"unknown quant preset '{quant_doc}'", key="quant")

    hardware_doc = doc.get("hardware", "median")
    if isinstance(hardware_doc, dict):
        hardware = hardware_from_mapping(spec, hardware_doc)
    elif hardware_doc != "median":
        raise SpecError(f"unknown hardware preset '{hardware_doc}'", key="hardware")

    return make_design(spec, model, quant, hardware)


def load_design(spec: SearchSpaceSpec, path: Path) -> DesignPoint:
    return design_from_document(spec, read_yaml(Path(path), "design file"))
