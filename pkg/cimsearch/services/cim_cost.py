"""
CIM Cost Model

Analytical mapping of layer workloads onto the crossbar / tile / group hierarchy,
capacity checks, and energy, delay, area and derived figures of merit.

Units: energy in mJ, delay in us, area in mm2. Per-layer terms are computed in
pJ and ns and reduced in fixed layer order.
"""

import logging
from math import ceil, log2, sqrt
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from cimsearch.config import read_yaml
from cimsearch.exceptions import InfeasibleDesign, MissingHistogram, SpecError
from cimsearch.models.schemas import (
    ConvKind,
    DesignPoint,
    ExecutionMode,
    HardwareConfig,
    HardwareMetrics,
    LayerCost,
    LayerHistograms,
    LayerWorkload,
    MappingResult,
    TechnologyProfile,
)
from cimsearch.services.workload import layer_activity, total_macs

logger = logging.getLogger(__name__)

PJ_TO_MJ = 1e-9
NS_TO_US = 1e-3
UM2_TO_MM2 = 1e-6


def load_profile(path: Path) -> TechnologyProfile:
    """Technology profile from YAML; every field is required"""
    data = read_yaml(path, "technology profile")
    try:
        return TechnologyProfile(**data)
    except ValidationError as e:
        first = e.errors()[0]
        raise SpecError(first["msg"], key=".".join(str(p) for p in first["loc"])) from e


# ============================================
# Mapping
# ============================================

def cells_per_weight(weight_bits: int, hw: HardwareConfig) -> int:
    return ceil(weight_bits / hw.bits_cell)


def layer_crossbars(layer: LayerWorkload, hw: HardwareConfig) -> tuple:
    """(crossbars, row_tiles, col_tiles) for one layer"""
    cpw = cells_per_weight(layer.weight_bits, hw)
    if layer.kind == ConvKind.DEPTHWISE:
        # Block-diagonal packing of channel groups
        k2 = layer.kernel * layer.kernel
        groups = max(1, min(hw.xbar_rows // k2, hw.xbar_cols // cpw))
        count = ceil(layer.in_channels / groups)
        return count, count, 1
    row_tiles = ceil(layer.rows / hw.xbar_rows)
    col_tiles = ceil(layer.cols * cpw / hw.xbar_cols)
    return row_tiles * col_tiles, row_tiles, col_tiles


def map_network(workloads: Sequence[LayerWorkload], hw: HardwareConfig) -> MappingResult:
    """Crossbars per layer, placed by sequential fill (restarting per swap group)"""
    if not workloads:
        raise InfeasibleDesign("cannot map an empty layer list")

    counts, rows, cols = [], [], []
    for layer in workloads:
        c, r, k = layer_crossbars(layer, hw)
        counts.append(c)
        rows.append(r)
        cols.append(k)

    available = hw.total_macros
    assignment = []
    groups: List[List[int]] = []
    if hw.execution_mode == ExecutionMode.WEIGHT_SWAPPING:
        fill = 0
        for i, count in enumerate(counts):
            if not groups or fill + count > available:
                groups.append([])
                fill = 0
            groups[-1].append(i)
            assignment.append((fill, fill + count - 1))
            fill += count
    else:
        fill = 0
        for count in counts:
            assignment.append((fill, fill + count - 1))
            fill += count

    return MappingResult(
        crossbars=tuple(counts),
        row_tiles=tuple(rows),
        col_tiles=tuple(cols),
        required=sum(counts),
        available=available,
        assignment=tuple(assignment),
        swap_groups=tuple(tuple(g) for g in groups),
    )


def check_feasibility(
    mapping: MappingResult,
    hw: HardwareConfig,
    mode: Optional[ExecutionMode] = None,
) -> bool:
    """Stationary: every layer resident at once. Swapping: the largest layer fits."""
    mode = mode or hw.execution_mode
    if mode == ExecutionMode.WEIGHT_SWAPPING:
        return mapping.available >= mapping.max_layer
    return mapping.available >= mapping.required


# ============================================
# Area
# ============================================

def macro_area_um2(hw: HardwareConfig, tech: TechnologyProfile) -> float:
    return (
        hw.xbar_rows * hw.xbar_cols * tech.cell_area_um2
        + tech.adc_area_um2 * hw.xbar_cols / tech.adc_column_share
        + tech.macro_peripheral_area_um2
    )


def compute_area(hw: HardwareConfig, tech: TechnologyProfile) -> float:
    """Chip area in mm2: macros with tile overhead, routers, global buffer"""
    macros = hw.total_macros * macro_area_um2(hw, tech) * (1.0 + tech.tile_overhead) * UM2_TO_MM2
    return macros + hw.routers * tech.router_area_mm2 + hw.glb_mb * tech.glb_area_mm2_per_mb


# ============================================
# Energy and delay
# ============================================

def adc_bits(hw: HardwareConfig) -> int:
    return hw.bits_cell + ceil(log2(hw.xbar_rows)) - 1


def mesh_hops(hw: HardwareConfig) -> int:
    return ceil(sqrt(hw.routers))


def _layer_energy_terms(
    layer: LayerWorkload,
    row_tiles: int,
    col_tiles: int,
    histograms: LayerHistograms,
    hw: HardwareConfig,
    tech: TechnologyProfile,
) -> Dict[str, float]:
    """Energy terms of one layer in pJ"""
    cpw = cells_per_weight(layer.weight_bits, hw)
    slices = layer.input_bits
    per_slice = layer.positions * slices

    if layer.kind == ConvKind.DEPTHWISE:
        row_activations = per_slice * layer.kernel * layer.kernel * layer.in_channels
        conversions = per_slice * layer.in_channels * cpw
    else:
        row_activations = per_slice * layer.rows * col_tiles
        conversions = per_slice * layer.cols * cpw * row_tiles

    voltage = (hw.v_op / tech.v_ref) ** 2
    active_cells = layer.positions * layer.weight_count * cpw
    cell = active_cells * tech.cell_read_energy_pj * voltage * layer_activity(histograms) * slices

    movement = layer.traffic_bytes * (
        tech.buffer_energy_pj_per_byte + mesh_hops(hw) * tech.router_hop_energy_pj_per_byte
    )
    dram = 0.0
    if hw.execution_mode == ExecutionMode.WEIGHT_SWAPPING:
        dram = layer.weight_bytes * tech.dram_energy_pj_per_byte

    return {
        "driver": row_activations * tech.driver_energy_pj,
        "cell": cell,
        "adc": conversions * tech.adc_energy_coeff_pj * 2 ** adc_bits(hw),
        "movement": movement,
        "dram": dram,
    }


def _layer_delay_ns(layer: LayerWorkload, hw: HardwareConfig, tech: TechnologyProfile) -> float:
    # Row tiles run in parallel macros; inputs are bit-serial
    compute = layer.positions * layer.input_bits * hw.t_cycle
    transfer = layer.traffic_bytes / (tech.link_bandwidth_bytes_per_ns * hw.routers)
    load = 0.0
    if hw.execution_mode == ExecutionMode.WEIGHT_SWAPPING:
        load = layer.weight_bytes / tech.dram_bandwidth_bytes_per_ns
    return compute + transfer + load


def layer_costs(
    mapping: MappingResult,
    workloads: Sequence[LayerWorkload],
    histograms: Dict[str, LayerHistograms],
    hw: HardwareConfig,
    tech: TechnologyProfile,
) -> List[LayerCost]:
    """Per-layer energy and delay, in layer order"""
    costs = []
    for i, layer in enumerate(workloads):
        if layer.layer_id not in histograms:
            raise MissingHistogram(f"no histograms for layer '{layer.layer_id}'")
        terms = _layer_energy_terms(
            layer, mapping.row_tiles[i], mapping.col_tiles[i], histograms[layer.layer_id], hw, tech
        )
        costs.append(
            LayerCost(
                layer_id=layer.layer_id,
                energy_mj=sum(terms.values()) * PJ_TO_MJ,
                delay_us=_layer_delay_ns(layer, hw, tech) * NS_TO_US,
                crossbars=mapping.crossbars[i],
                cell_read_mj=terms["cell"] * PJ_TO_MJ,
                adc_mj=terms["adc"] * PJ_TO_MJ,
                driver_mj=terms["driver"] * PJ_TO_MJ,
                movement_mj=terms["movement"] * PJ_TO_MJ,
                dram_mj=terms["dram"] * PJ_TO_MJ,
            )
        )
    return costs


def compute_energy(
    mapping: MappingResult,
    workloads: Sequence[LayerWorkload],
    histograms: Dict[str, LayerHistograms],
    hw: HardwareConfig,
    tech: TechnologyProfile,
) -> float:
    """Total energy in mJ"""
    return sum(c.energy_mj for c in layer_costs(mapping, workloads, histograms, hw, tech))


def compute_delay(
    mapping: MappingResult,
    workloads: Sequence[LayerWorkload],
    hw: HardwareConfig,
    tech: TechnologyProfile,
) -> float:
    """Total delay in us; layers run one after another"""
    return sum(_layer_delay_ns(layer, hw, tech) for layer in workloads) * NS_TO_US


def utilization(mapping: MappingResult, workloads: Sequence[LayerWorkload], hw: HardwareConfig) -> float:
    """Programmed cells over on-chip cells, averaged over swap groups"""
    programmed = sum(
        layer.weight_count * cells_per_weight(layer.weight_bits, hw) for layer in workloads
    )
    on_chip = mapping.available * hw.xbar_rows * hw.xbar_cols
    loads = max(1, len(mapping.swap_groups))
    return min(1.0, programmed / (on_chip * loads))


# ============================================
# Composition
# ============================================

def evaluate(
    design: DesignPoint,
    workloads: Sequence[LayerWorkload],
    histograms: Dict[str, LayerHistograms],
    tech: TechnologyProfile,
) -> HardwareMetrics:
    """
    Mapping, feasibility, then E/D/A and derived metrics.

    Infeasible designs still get metrics, flagged feasible=False.
    """
    hw = design.hardware
    mapping = map_network(workloads, hw)
    feasible = check_feasibility(mapping, hw)

    costs = layer_costs(mapping, workloads, histograms, hw, tech)
    energy = sum(c.energy_mj for c in costs)
    delay = sum(c.delay_us for c in costs)
    area = compute_area(hw, tech)
    ops = 2 * total_macs(workloads)

    if not feasible:
        logger.debug(
            f"✗ Design {design.key} needs {mapping.required} macros "
            f"(largest layer {mapping.max_layer}), chip has {mapping.available}"
        )

    return HardwareMetrics(
        energy_mj=energy,
        delay_us=delay,
        area_mm2=area,
        edap=energy * (delay / 1000.0) * area,
        tops_per_w=ops / (energy * 1e-3) / 1e12,
        tops_per_mm2=ops / (delay * 1e-6) / 1e12 / area,
        utilization=utilization(mapping, workloads, hw),
        feasible=feasible,
        macros_required=mapping.required,
        macros_available=mapping.available,
    )


def require_feasible(metrics: HardwareMetrics, design: DesignPoint) -> HardwareMetrics:
    if not metrics.feasible:
        raise InfeasibleDesign(
            f"design {design.key} needs {metrics.macros_required} macros, "
            f"chip has {metrics.macros_available}"
        )
    return metrics


def layer_table(costs: Sequence[LayerCost]) -> pd.DataFrame:
    """Per-layer regression table: layer id, E, D, crossbars"""
    return pd.DataFrame(
        {
            "layer_id": [c.layer_id for c in costs],
            "energy_mj": [c.energy_mj for c in costs],
            "delay_us": [c.delay_us for c in costs],
            "crossbars": [c.crossbars for c in costs],
        }
    )
