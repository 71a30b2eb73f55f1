"""
Objective functions

Scores are minimised. Energy in mJ, delay in us (converted to ms or ns per mode),
area in mm2, accuracy in percent.
"""

import re
from typing import Dict

from cimsearch.exceptions import SpecError, UnsetAnchor, ZeroAccuracy
from cimsearch.models.schemas import (
    HardwareMetrics,
    ObjectiveAnchor,
    ObjectiveMode,
    ObjectiveSpec,
)

ALIASES: Dict[str, ObjectiveMode] = {
    "edap": ObjectiveMode.EDAP_ACC,
    "edap_acc": ObjectiveMode.EDAP_ACC,
    "delay": ObjectiveMode.DELAY_ACC,
    "delay_acc": ObjectiveMode.DELAY_ACC,
    "energy_area": ObjectiveMode.ENERGY_AREA_ACC,
    "energy_area_acc": ObjectiveMode.ENERGY_AREA_ACC,
    "accuracy": ObjectiveMode.ACCURACY,
}

_COEFFICIENT = re.compile(r"^\s*([abcd])\s*=\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*$")


def _monomial(energy_mj: float, delay_us: float, area_mm2: float, accuracy: float, spec: ObjectiveSpec) -> float:
    # Same operation order as EDAP/Acc so unit exponents reproduce it exactly
    return energy_mj ** spec.a * (delay_us / 1000.0) ** spec.b * area_mm2 ** spec.c / accuracy ** spec.d


def score(metrics: HardwareMetrics, accuracy: float, objective: ObjectiveSpec) -> float:
    """Lower is better"""
    if accuracy <= 0:
        raise ZeroAccuracy(f"accuracy must be positive, got {accuracy}")
    mode = objective.mode
    if mode == ObjectiveMode.EDAP_ACC:
        return metrics.energy_mj * (metrics.delay_us / 1000.0) * metrics.area_mm2 / accuracy
    if mode == ObjectiveMode.DELAY_ACC:
        return metrics.delay_us * 1000.0 / accuracy
    if mode == ObjectiveMode.ENERGY_AREA_ACC:
        return metrics.energy_mj * metrics.area_mm2 / accuracy
    if mode == ObjectiveMode.ACCURACY:
        return -accuracy
    if mode == ObjectiveMode.MONOMIAL:
        return _monomial(metrics.energy_mj, metrics.delay_us, metrics.area_mm2, accuracy, objective)
    if objective.anchor is None:
        raise UnsetAnchor("priority objective needs the first feasible sample as anchor")
    anchor = objective.anchor
    return _monomial(metrics.energy_mj, metrics.delay_us, metrics.area_mm2, accuracy, objective) / _monomial(
        anchor.energy_mj, anchor.delay_us, anchor.area_mm2, anchor.accuracy, objective
    )


def needs_anchor(objective: ObjectiveSpec) -> bool:
    return objective.mode == ObjectiveMode.PRIORITY and objective.anchor is None


def with_anchor(objective: ObjectiveSpec, metrics: HardwareMetrics, accuracy: float) -> ObjectiveSpec:
    anchor = ObjectiveAnchor(
        energy_mj=metrics.energy_mj,
        delay_us=metrics.delay_us,
        area_mm2=metrics.area_mm2,
        accuracy=accuracy,
    )
    return objective.model_copy(update={"anchor": anchor})


def monomial(a: float = 0.0, b: float = 0.0, c: float = 0.0, d: float = 0.0) -> ObjectiveSpec:
    return ObjectiveSpec(mode=ObjectiveMode.MONOMIAL, a=a, b=b, c=c, d=d)


def hardware_terms(objective: ObjectiveSpec) -> ObjectiveSpec:
    """Latency/area part of an objective, without accuracy"""
    mode = objective.mode
    if mode == ObjectiveMode.DELAY_ACC:
        return monomial(b=1.0)
    if mode == ObjectiveMode.ENERGY_AREA_ACC:
        return monomial(c=1.0)
    if mode in (ObjectiveMode.PRIORITY, ObjectiveMode.MONOMIAL):
        return monomial(b=objective.b, c=objective.c)
    return monomial(b=1.0, c=1.0)


def accuracy_terms(objective: ObjectiveSpec) -> ObjectiveSpec:
    """Accuracy part, with energy where the objective has it"""
    mode = objective.mode
    if mode == ObjectiveMode.DELAY_ACC:
        return monomial(d=1.0)
    if mode in (ObjectiveMode.PRIORITY, ObjectiveMode.MONOMIAL):
        return monomial(a=objective.a, d=objective.d)
    return monomial(a=1.0, d=1.0)


def parse_objective(text: str) -> ObjectiveSpec:
    """'edap' | 'delay' | 'energy_area' | 'accuracy' | 'priority:a=..,b=..,c=..,d=..'"""
    raw = text.strip().lower()
    if raw in ALIASES:
        return ObjectiveSpec(mode=ALIASES[raw])
    if raw.startswith("priority"):
        coefficients = {}
        _, _, body = raw.partition(":")
        for part in filter(None, body.split(",")):
            match = _COEFFICIENT.match(part)
            if not match:
                raise SpecError(f"cannot parse coefficient '{part}'", key="objective")
            coefficients[match.group(1)] = float(match.group(2))
        try:
            return ObjectiveSpec(mode=ObjectiveMode.PRIORITY, **coefficients)
        except ValueError as e:
            raise SpecError(str(e), key="objective") from e
    raise SpecError(f"unknown objective '{text}'", key="objective")


def describe(objective: ObjectiveSpec) -> str:
    if objective.mode in (ObjectiveMode.PRIORITY, ObjectiveMode.MONOMIAL):
        return f"{objective.mode.value}(a={objective.a:g},b={objective.b:g},c={objective.c:g},d={objective.d:g})"
    return objective.mode.value
