"""
Domain Schemas

Search space, genomes, workloads, hardware metrics, objectives and run records.
Config-like types are pydantic models; numeric containers are dataclasses.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

if TYPE_CHECKING:
    from sklearn.neural_network import MLPRegressor

# ============================================
# Enumerations
# ============================================

class ModelTemplate(str, Enum):
    """Supported network families"""
    MOBILENET_V2 = "mobilenetv2"
    RESNET50 = "resnet50"


class ConvKind(str, Enum):
    """Layer kinds as seen by the crossbar mapper"""
    POINTWISE = "pointwise"
    DEPTHWISE = "depthwise"
    STANDARD = "standard"
    LINEAR = "linear"


class ExecutionMode(str, Enum):
    """How weights live on chip"""
    WEIGHT_STATIONARY = "weight_stationary"
    WEIGHT_SWAPPING = "weight_swapping"


class GeneGroup(str, Enum):
    """Gene families of the joint space"""
    MODEL = "model"
    QUANT = "quant"
    HARDWARE = "hardware"


class DistributionKind(str, Enum):
    """Synthetic tensor value distributions"""
    UNIFORM_NONNEG = "uniform_nonneg"
    HALF_GAUSSIAN = "half_gaussian"
    CONSTANT = "constant"


class ObjectiveMode(str, Enum):
    """Score functions (lower is better)"""
    EDAP_ACC = "edap_acc"
    DELAY_ACC = "delay_acc"
    ENERGY_AREA_ACC = "energy_area_acc"
    PRIORITY = "priority"
    MONOMIAL = "monomial"
    ACCURACY = "accuracy"


# Canonical hardware gene order; encodings depend on it
HARDWARE_GENES: Tuple[str, ...] = (
    "V_op", "Bits_cell", "T_cycle", "Xbar_rows", "Xbar_cols",
    "C_per_tile", "T_per_router", "G_per_chip", "GLB",
)

HARDWARE_FIELDS: Dict[str, str] = {
    "V_op": "v_op",
    "Bits_cell": "bits_cell",
    "T_cycle": "t_cycle",
    "Xbar_rows": "xbar_rows",
    "Xbar_cols": "xbar_cols",
    "C_per_tile": "c_per_tile",
    "T_per_router": "t_per_router",
    "G_per_chip": "g_per_chip",
    "GLB": "glb_mb",
}

TEMPLATE_CONV_KINDS: Dict[ModelTemplate, Tuple[ConvKind, ...]] = {
    ModelTemplate.MOBILENET_V2: (ConvKind.DEPTHWISE, ConvKind.POINTWISE),
    ModelTemplate.RESNET50: (ConvKind.STANDARD, ConvKind.POINTWISE),
}

FIXED_LAYER_BITS = 8


# ============================================
# Search space
# ============================================

@dataclass(frozen=True)
class Gene:
    """One position of the flat encoding"""
    name: str
    group: GeneGroup
    choices: tuple
    stage: int = -1
    block: int = -1
    can_be_inactive: bool = False

    @property
    def size(self) -> int:
        return len(self.choices)


def _check_choice_list(name: str, values) -> None:
    if len(values) == 0:
        raise ValueError(f"{name} is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly increasing without duplicates")


class SearchSpaceSpec(BaseModel):
    """Declarative value sets for model, quantization and hardware genes"""
    model_config = ConfigDict(frozen=True, protected_namespaces=())

    name: str = "custom"
    model_template: ModelTemplate
    stage_count: int = Field(..., ge=1)
    depth_choices: Tuple[Tuple[int, ...], ...]
    kernel_choices: Tuple[int, ...]
    expansion_choices: Tuple[float, ...]
    width_mult_choices: Tuple[float, ...] = (1.0,)
    weight_bits_choices: Dict[ConvKind, Tuple[int, ...]]
    input_bits_choices: Dict[ConvKind, Tuple[int, ...]]
    hardware_gene_choices: Dict[str, Tuple[float, ...]]
    execution_mode: ExecutionMode = ExecutionMode.WEIGHT_STATIONARY
    input_resolution: int = Field(224, ge=1)
    template_table: Optional[str] = None

    @field_validator("depth_choices", mode="before")
    @classmethod
    def _broadcast_depths(cls, value, info):
        # A flat list applies to every stage
        if isinstance(value, (list, tuple)) and value and not isinstance(value[0], (list, tuple)):
            stages = info.data.get("stage_count") or 1
            return [list(value) for _ in range(stages)]
        return value

    @model_validator(mode="after")
    def _check_invariants(self) -> "SearchSpaceSpec":
        if len(self.depth_choices) != self.stage_count:
            raise ValueError("depth_choices must have one list per stage")
        for s, depths in enumerate(self.depth_choices):
            _check_choice_list(f"depth_choices[{s}]", depths)
            if depths[0] < 1:
                raise ValueError(f"depth_choices[{s}] must be >= 1")
        _check_choice_list("kernel_choices", self.kernel_choices)
        _check_choice_list("expansion_choices", self.expansion_choices)
        _check_choice_list("width_mult_choices", self.width_mult_choices)
        if self.model_template == ModelTemplate.MOBILENET_V2 and self.width_mult_choices != (1.0,):
            raise ValueError("width_mult_choices is only searched for the resnet50 template")
        kinds = TEMPLATE_CONV_KINDS[self.model_template]
        for label, table in (("weight_bits_choices", self.weight_bits_choices),
                             ("input_bits_choices", self.input_bits_choices)):
            if set(table) != set(kinds):
                raise ValueError(f"{label} must define exactly {[k.value for k in kinds]}")
            for kind in kinds:
                _check_choice_list(f"{label}.{kind.value}", table[kind])
        if tuple(self.hardware_gene_choices) != HARDWARE_GENES:
            raise ValueError(f"hardware genes must be exactly {list(HARDWARE_GENES)} in that order")
        for gene, values in self.hardware_gene_choices.items():
            _check_choice_list(f"hardware_gene_choices.{gene}", values)
        return self

    @property
    def conv_kinds(self) -> Tuple[ConvKind, ...]:
        return TEMPLATE_CONV_KINDS[self.model_template]

    @property
    def max_depths(self) -> Tuple[int, ...]:
        return tuple(depths[-1] for depths in self.depth_choices)

    @cached_property
    def genes(self) -> Tuple[Gene, ...]:
        """Flat gene layout in canonical order: model, quant, hardware"""
        genes: List[Gene] = []
        for s, depths in enumerate(self.depth_choices):
            genes.append(Gene(f"depth[{s}]", GeneGroup.MODEL, tuple(depths), stage=s))
        for s, depths in enumerate(self.depth_choices):
            for b in range(depths[-1]):
                inactive = b >= depths[0]
                genes.append(Gene(f"kernel[{s}][{b}]", GeneGroup.MODEL, self.kernel_choices,
                                  stage=s, block=b, can_be_inactive=inactive))
                genes.append(Gene(f"expansion[{s}][{b}]", GeneGroup.MODEL, self.expansion_choices,
                                  stage=s, block=b, can_be_inactive=inactive))
        genes.append(Gene("width_mult", GeneGroup.MODEL, self.width_mult_choices))
        for s, depths in enumerate(self.depth_choices):
            for b in range(depths[-1]):
                inactive = b >= depths[0]
                for kind in self.conv_kinds:
                    genes.append(Gene(f"w_bits.{kind.value}[{s}][{b}]", GeneGroup.QUANT,
                                      self.weight_bits_choices[kind], stage=s, block=b,
                                      can_be_inactive=inactive))
                    genes.append(Gene(f"in_bits.{kind.value}[{s}][{b}]", GeneGroup.QUANT,
                                      self.input_bits_choices[kind], stage=s, block=b,
                                      can_be_inactive=inactive))
        for name in HARDWARE_GENES:
            genes.append(Gene(name, GeneGroup.HARDWARE, tuple(self.hardware_gene_choices[name])))
        return tuple(genes)

    @cached_property
    def gene_sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.genes], dtype=np.int64)


class ModelGenome(BaseModel):
    """Per-stage depth, per-block kernel/expansion, width multiplier; padded to max depth"""
    model_config = ConfigDict(frozen=True)

    depths: Tuple[int, ...]
    kernels: Tuple[Tuple[int, ...], ...]
    expansions: Tuple[Tuple[float, ...], ...]
    width_mult: float = 1.0


class QuantPolicy(BaseModel):
    """Per-block, per-conv-kind precisions; stem and classifier stay at 8 bits"""
    model_config = ConfigDict(frozen=True)

    weight_bits: Dict[ConvKind, Tuple[Tuple[int, ...], ...]]
    input_bits: Dict[ConvKind, Tuple[Tuple[int, ...], ...]]
    fixed_bits: int = FIXED_LAYER_BITS


class HardwareConfig(BaseModel):
    """One point of the CIM hierarchy: crossbar macros, tiles, groups, buffer"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    v_op: float = Field(..., alias="V_op", gt=0)
    bits_cell: int = Field(..., alias="Bits_cell", ge=1)
    t_cycle: float = Field(..., alias="T_cycle", gt=0)
    xbar_rows: int = Field(..., alias="Xbar_rows", ge=1)
    xbar_cols: int = Field(..., alias="Xbar_cols", ge=1)
    c_per_tile: int = Field(..., alias="C_per_tile", ge=1)
    t_per_router: int = Field(..., alias="T_per_router", ge=1)
    g_per_chip: int = Field(..., alias="G_per_chip", ge=1)
    glb_mb: float = Field(..., alias="GLB", gt=0)
    execution_mode: ExecutionMode = ExecutionMode.WEIGHT_STATIONARY

    @property
    def total_macros(self) -> int:
        return self.g_per_chip * self.t_per_router * self.c_per_tile

    @property
    def routers(self) -> int:
        return self.g_per_chip

    def gene_value(self, gene: str):
        return getattr(self, HARDWARE_FIELDS[gene])


class DesignPoint(BaseModel):
    """One candidate of the joint space plus its flat index encoding"""
    model_config = ConfigDict(frozen=True)

    model: ModelGenome
    quant: QuantPolicy
    hardware: HardwareConfig
    encoding: Tuple[int, ...]

    @property
    def key(self) -> str:
        return "-".join(str(i) for i in self.encoding)


# ============================================
# Workloads and histograms
# ============================================

class LayerWorkload(BaseModel):
    """Matrix view of one layer as it lands on crossbars"""
    model_config = ConfigDict(frozen=True)

    layer_id: str
    kind: ConvKind
    rows: int = Field(..., gt=0)
    cols: int = Field(..., gt=0)
    positions: int = Field(..., gt=0)
    macs: int = Field(..., gt=0)
    weight_bits: int = Field(..., gt=0)
    input_bits: int = Field(..., gt=0)
    weight_count: int = Field(..., gt=0)
    input_bytes: int = Field(..., gt=0)
    output_bytes: int = Field(..., gt=0)
    kernel: int = Field(1, gt=0)
    in_channels: int = Field(..., gt=0)
    stride: int = Field(1, gt=0)
    searched: bool = False

    @property
    def weight_bytes(self) -> int:
        return -(-self.weight_count * self.weight_bits // 8)

    @property
    def traffic_bytes(self) -> int:
        return self.input_bytes + self.output_bytes


@dataclass(frozen=True)
class Histogram:
    """Counts over all 2^precision quantized levels"""
    precision: int
    bins: np.ndarray
    total: int


@dataclass(frozen=True)
class LayerHistograms:
    """Input and weight histograms of one layer"""
    inputs: Histogram
    weights: Histogram


class ValueDistribution(BaseModel):
    """Synthetic stand-in for real activations and weights"""
    model_config = ConfigDict(frozen=True)

    kind: DistributionKind = DistributionKind.UNIFORM_NONNEG
    value: float = Field(0.0, ge=0.0, le=1.0)
    scale: float = Field(0.3, gt=0.0)


# ============================================
# Cost model
# ============================================

class TechnologyProfile(BaseModel):
    """Per-node device and circuit constants; every field is mandatory"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    node_nm: int = Field(..., gt=0)
    v_ref: float = Field(..., gt=0)
    cell_read_energy_pj: float = Field(..., gt=0)
    adc_energy_coeff_pj: float = Field(..., gt=0)
    driver_energy_pj: float = Field(..., gt=0)
    buffer_energy_pj_per_byte: float = Field(..., gt=0)
    router_hop_energy_pj_per_byte: float = Field(..., gt=0)
    dram_energy_pj_per_byte: float = Field(..., gt=0)
    cell_area_um2: float = Field(..., gt=0)
    adc_area_um2: float = Field(..., gt=0)
    adc_column_share: int = Field(..., gt=0)
    macro_peripheral_area_um2: float = Field(..., gt=0)
    router_area_mm2: float = Field(..., gt=0)
    glb_area_mm2_per_mb: float = Field(..., gt=0)
    tile_overhead: float = Field(..., gt=0)
    link_bandwidth_bytes_per_ns: float = Field(..., gt=0)
    dram_bandwidth_bytes_per_ns: float = Field(..., gt=0)


@dataclass(frozen=True)
class MappingResult:
    """Crossbar counts per layer and their placement on the macros"""
    crossbars: Tuple[int, ...]
    row_tiles: Tuple[int, ...]
    col_tiles: Tuple[int, ...]
    required: int
    available: int
    assignment: Tuple[Tuple[int, int], ...]
    swap_groups: Tuple[Tuple[int, ...], ...] = ()

    @property
    def max_layer(self) -> int:
        return max(self.crossbars)


@dataclass(frozen=True)
class LayerCost:
    """Per-layer energy (mJ) and delay (us), with the energy terms kept apart"""
    layer_id: str
    energy_mj: float
    delay_us: float
    crossbars: int
    cell_read_mj: float = 0.0
    adc_mj: float = 0.0
    driver_mj: float = 0.0
    movement_mj: float = 0.0
    dram_mj: float = 0.0


class HardwareMetrics(BaseModel):
    """Energy (mJ), delay (us), area (mm2) and derived figures of merit"""
    model_config = ConfigDict(frozen=True)

    energy_mj: float
    delay_us: float
    area_mm2: float
    edap: float
    tops_per_w: float
    tops_per_mm2: float
    utilization: float = Field(..., ge=0.0, le=1.0)
    feasible: bool
    macros_required: int = 0
    macros_available: int = 0


# ============================================
# Accuracy surrogate
# ============================================

class OracleParams(BaseModel):
    """Closed-form synthetic accuracy"""
    model_config = ConfigDict(frozen=True)

    ceiling: float = Field(78.0, gt=0.0, le=100.0)
    capacity_gain: float = Field(6.0, ge=0.0)
    kappa: float = Field(1000.0, gt=0.0)
    gamma: float = Field(0.1, gt=0.0)
    knee_bits: int = Field(6, ge=1)
    noise: float = Field(0.2, ge=0.0)
    seed: int = 0


class PredictorHyper(BaseModel):
    """Perceptron training knobs"""
    model_config = ConfigDict(frozen=True)

    hidden_sizes: Tuple[int, ...] = (400, 400)
    learning_rate: float = Field(1e-3, gt=0.0)
    epochs: int = Field(200, ge=1)
    batch_size: int = Field(128, ge=1)
    optimizer: str = Field("adam", pattern="^(adam|sgd)$")
    alpha: float = Field(0.1, ge=0.0)
    early_stopping: bool = True
    patience: int = Field(10, ge=1)
    stopping_fraction: float = Field(0.1, gt=0.0, lt=1.0)
    validation_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    seed: int = 0


@dataclass
class PredictorModel:
    """Fitted regressor (input -> hidden... -> 1) plus target scaling"""
    estimator: "MLPRegressor"
    hyper: PredictorHyper = field(default_factory=PredictorHyper)
    target_offset: float = 0.0
    target_scale: float = 1.0
    final_loss: float = float("nan")
    history: List[float] = field(default_factory=list)

    @property
    def weights(self) -> List[np.ndarray]:
        return self.estimator.coefs_

    @property
    def biases(self) -> List[np.ndarray]:
        return self.estimator.intercepts_

    @property
    def input_dim(self) -> int:
        return int(self.estimator.n_features_in_)


# ============================================
# Search
# ============================================

class ObjectiveAnchor(BaseModel):
    """First feasible sample, used to normalize priority objectives"""
    model_config = ConfigDict(frozen=True)

    energy_mj: float = Field(..., gt=0)
    delay_us: float = Field(..., gt=0)
    area_mm2: float = Field(..., gt=0)
    accuracy: float = Field(..., gt=0)


class ObjectiveSpec(BaseModel):
    """Objective mode with exponents (E^a D^b A^c / Acc^d) and optional anchor"""
    model_config = ConfigDict(frozen=True)

    mode: ObjectiveMode = ObjectiveMode.EDAP_ACC
    a: float = Field(1.0, ge=0.0)
    b: float = Field(1.0, ge=0.0)
    c: float = Field(1.0, ge=0.0)
    d: float = Field(1.0, ge=0.0)
    anchor: Optional[ObjectiveAnchor] = None

    @model_validator(mode="after")
    def _check_priority(self) -> "ObjectiveSpec":
        if self.mode == ObjectiveMode.PRIORITY:
            for name in ("a", "b", "c", "d"):
                if getattr(self, name) > 1.0:
                    raise ValueError(f"priority coefficient {name} must lie in [0, 1]")
        return self


class SearchConfig(BaseModel):
    """Evolutionary search parameters"""
    model_config = ConfigDict(frozen=True)

    population: int = Field(150, ge=2)
    generations: int = Field(70, ge=0)
    crossover_prob: float = Field(0.95, ge=0.0, le=1.0)
    mutation_prob: float = Field(0.95, ge=0.0, le=1.0)
    eta_c: float = Field(3.0, gt=0.0)
    eta_m: float = Field(3.0, gt=0.0)
    seed: int = 0
    workers: int = Field(1, ge=1)
    objective: ObjectiveSpec = Field(default_factory=ObjectiveSpec)
    area_constraint: float = Field(800.0, gt=0.0)
    max_init_attempts: int = Field(100_000, ge=1)
    max_repair_attempts: int = Field(20, ge=0)
    top_k: int = Field(5, ge=1)
    baseline_samples: int = Field(1000, ge=1)


class ArchiveEntry(BaseModel):
    """One evaluated design; immutable once archived"""
    model_config = ConfigDict(frozen=True)

    index: int
    generation: int
    design: DesignPoint
    metrics: HardwareMetrics
    accuracy: float
    score: float
    feasible: bool


class RunManifest(BaseModel):
    """Provenance of one CLI invocation"""
    run_id: str
    command: str
    config_path: str = ""
    config_sha256: str = ""
    seed: int = 0
    spec_sha256: str = ""
    profile_sha256: str = ""
    tool_version: str = ""
    duration_s: float = 0.0
    anchor: str = ""


class ConvergenceRecord(BaseModel):
    """Per-generation progress"""
    model_config = ConfigDict(frozen=True)

    generation: int
    best_score: float
    mean_score: float
    feasible_fraction: float
    evaluated: int
    cache_hits: int
