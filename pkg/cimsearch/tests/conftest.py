"""
Pytest configuration and fixtures for cimsearch
"""
import copy

import pytest
import yaml

from cimsearch.config import PACKAGE_DATA_DIR
from cimsearch.ml.oracle import AccuracyOracle
from cimsearch.models.schemas import (
    ConvKind,
    HardwareConfig,
    HardwareMetrics,
    LayerWorkload,
    OracleParams,
    SearchConfig,
)
from cimsearch.services.cim_cost import load_profile
from cimsearch.services.evaluator import DesignEvaluator
from cimsearch.services.space import load_spec

SPECS = PACKAGE_DATA_DIR / "specs"
CONFIGS = PACKAGE_DATA_DIR / "configs"
PROFILES = PACKAGE_DATA_DIR / "profiles"


@pytest.fixture
def tiny_document():
    """Parsed tiny spec, safe to modify"""
    return yaml.safe_load((SPECS / "tiny.yaml").read_text(encoding="utf-8"))


@pytest.fixture
def tiny_spec():
    return load_spec(SPECS / "tiny.yaml")


@pytest.fixture
def reference_spec():
    return load_spec(SPECS / "mobilenet_reference.yaml")


@pytest.fixture
def resnet_spec():
    return load_spec(SPECS / "resnet50_reference.yaml")


@pytest.fixture
def rram():
    return load_profile(PROFILES / "rram_32nm.yaml")


@pytest.fixture
def sram():
    return load_profile(PROFILES / "sram_7nm.yaml")


@pytest.fixture
def evaluator(tiny_spec, rram):
    return DesignEvaluator(tiny_spec, rram, sample_cap=256)


@pytest.fixture
def oracle():
    """Noiseless oracle for the tiny space"""
    return AccuracyOracle(OracleParams(noise=0.0))


@pytest.fixture
def noisy_oracle():
    return AccuracyOracle(OracleParams())


@pytest.fixture
def small_search():
    """Search settings small enough for the tiny space"""
    return SearchConfig(population=10, generations=4, seed=7, max_init_attempts=20000)


@pytest.fixture
def median_hw():
    """Reference-spec median hardware"""
    return HardwareConfig(
        V_op=0.7, Bits_cell=4, T_cycle=4, Xbar_rows=256, Xbar_cols=256,
        C_per_tile=16, T_per_router=8, G_per_chip=16, GLB=4,
    )


def make_layer(kind=ConvKind.STANDARD, c_in=64, c_out=128, kernel=3, size=8,
               w_bits=8, in_bits=8, layer_id="layer") -> LayerWorkload:
    """Hand-built layer at stride 1"""
    if kind == ConvKind.DEPTHWISE:
        rows, cols, weights = kernel * kernel, c_in, kernel * kernel * c_in
    else:
        rows, cols = c_in * kernel * kernel, c_out
        weights = rows * cols
    positions = size * size
    return LayerWorkload(
        layer_id=layer_id,
        kind=kind,
        rows=rows,
        cols=cols,
        positions=positions,
        macs=weights * positions,
        weight_bits=w_bits,
        input_bits=in_bits,
        weight_count=weights,
        input_bytes=-(-c_in * size * size * in_bits // 8),
        output_bytes=-(-cols * positions * in_bits // 8),
        kernel=kernel,
        in_channels=c_in,
    )


def make_metrics(energy=1.0, delay=1.0, area=100.0, feasible=True) -> HardwareMetrics:
    return HardwareMetrics(
        energy_mj=energy,
        delay_us=delay,
        area_mm2=area,
        edap=energy * (delay / 1000.0) * area,
        tops_per_w=1.0,
        tops_per_mm2=1.0,
        utilization=0.5,
        feasible=feasible,
    )


def with_hardware(document: dict, **lists) -> dict:
    """Copy of a spec document with some hardware choice lists replaced"""
    doc = copy.deepcopy(document)
    doc["hardware_gene_choices"].update(lists)
    return doc
