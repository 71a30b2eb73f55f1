"""
Tests for objective functions
"""
import numpy as np
import pytest

from cimsearch.exceptions import SpecError, UnsetAnchor, ZeroAccuracy
from cimsearch.models.schemas import ObjectiveMode, ObjectiveSpec
from cimsearch.search.objective import (
    accuracy_terms,
    describe,
    hardware_terms,
    monomial,
    needs_anchor,
    parse_objective,
    score,
    with_anchor,
)
from cimsearch.tests.conftest import make_metrics


class TestScores:
    """Test the fixed score functions against hand-computed values"""

    def test_edap_over_accuracy(self):
        """Test 0.95 mJ x 6.94 us x 3691 mm2 at 73%"""
        metrics = make_metrics(energy=0.95, delay=6.94, area=3691.0)
        assert metrics.edap == pytest.approx(24.334, rel=1e-4)
        assert score(metrics, 73.0, ObjectiveSpec()) == pytest.approx(24.334 / 73.0, rel=1e-4)

    @pytest.mark.parametrize(
        "energy,delay,area,expected",
        [(0.33, 3.55, 234.0, 0.2741), (0.43, 8.8, 465.0, 1.7595)],
    )
    def test_edap_values(self, energy, delay, area, expected):
        """Test EDAP of reported design points"""
        assert make_metrics(energy, delay, area).edap == pytest.approx(expected, rel=1e-3)

    def test_energy_area_over_accuracy(self):
        """Test EA/Acc"""
        metrics = make_metrics(energy=0.95, delay=6.94, area=3691.0)
        objective = ObjectiveSpec(mode=ObjectiveMode.ENERGY_AREA_ACC)
        assert score(metrics, 73.0, objective) == pytest.approx(48.034, rel=1e-4)

    @pytest.mark.parametrize("delay,accuracy,expected", [(6.94, 73.0, 95.07), (1.47, 73.71, 19.94)])
    def test_delay_over_accuracy(self, delay, accuracy, expected):
        """Test D/Acc with delay in nanoseconds"""
        objective = ObjectiveSpec(mode=ObjectiveMode.DELAY_ACC)
        assert score(make_metrics(delay=delay), accuracy, objective) == pytest.approx(expected, abs=0.01)

    def test_accuracy_mode(self):
        """Test that accuracy-only search minimises negative accuracy"""
        objective = ObjectiveSpec(mode=ObjectiveMode.ACCURACY)
        assert score(make_metrics(), 71.2, objective) == -71.2

    def test_zero_accuracy(self):
        """Test non-positive accuracy"""
        with pytest.raises(ZeroAccuracy):
            score(make_metrics(), 0.0, ObjectiveSpec())


class TestPriority:
    """Test the anchored priority objective"""

    def test_unset_anchor(self):
        """Test that priority needs an anchor"""
        objective = parse_objective("priority:a=1,b=1,c=1,d=1")
        assert needs_anchor(objective)
        with pytest.raises(UnsetAnchor):
            score(make_metrics(), 70.0, objective)

    def test_anchor_scores_one(self):
        """Test that the anchor itself scores exactly 1"""
        metrics = make_metrics(energy=0.4, delay=3.0, area=250.0)
        objective = with_anchor(parse_objective("priority:a=0.3,b=0.3,c=1,d=1"), metrics, 72.0)
        assert not needs_anchor(objective)
        assert score(metrics, 72.0, objective) == pytest.approx(1.0)

    def test_unit_coefficients_rank_as_edap(self):
        """Test that a=b=c=d=1 never reverses the EDAP/Acc order"""
        rng = np.random.default_rng(5)
        anchor = make_metrics(energy=1.0, delay=5.0, area=300.0)
        priority = with_anchor(parse_objective("priority:a=1,b=1,c=1,d=1"), anchor, 70.0)
        points = [
            (make_metrics(*rng.uniform([0.1, 0.5, 20.0], [5.0, 50.0, 2000.0])), float(rng.uniform(60, 78)))
            for _ in range(300)
        ]
        edap = np.array([score(m, acc, ObjectiveSpec()) for m, acc in points])
        prio = np.array([score(m, acc, priority) for m, acc in points])
        order = np.argsort(edap, kind="stable")
        assert np.all(np.diff(prio[order]) >= 0)

    def test_parse_coefficients(self):
        """Test priority text parsing"""
        objective = parse_objective(" Priority: a=0.3, b=0.3, c=1, d=1 ")
        assert objective.mode == ObjectiveMode.PRIORITY
        assert (objective.a, objective.b, objective.c, objective.d) == (0.3, 0.3, 1.0, 1.0)
        assert describe(objective) == "priority(a=0.3,b=0.3,c=1,d=1)"

    @pytest.mark.parametrize("text", ["priority:a=2", "priority:e=1", "priority:a=x", "edp", ""])
    def test_parse_errors(self, text):
        """Test rejected objective strings"""
        with pytest.raises(SpecError) as exc:
            parse_objective(text)
        assert exc.value.key == "objective"

    def test_aliases(self):
        """Test short objective names"""
        assert parse_objective("edap").mode == ObjectiveMode.EDAP_ACC
        assert parse_objective("delay").mode == ObjectiveMode.DELAY_ACC
        assert parse_objective("energy_area").mode == ObjectiveMode.ENERGY_AREA_ACC
        assert describe(parse_objective("accuracy")) == "accuracy"


class TestObjectiveSplit:
    """Test hardware and accuracy parts used by staged searches"""

    def test_edap_split(self):
        """Test that EDAP splits into D*A and E/Acc"""
        objective = ObjectiveSpec()
        assert hardware_terms(objective) == monomial(b=1.0, c=1.0)
        assert accuracy_terms(objective) == monomial(a=1.0, d=1.0)

    def test_split_multiplies_back(self):
        """Test that both parts multiply to the full EDAP/Acc"""
        metrics = make_metrics(energy=0.7, delay=4.2, area=512.0)
        objective = ObjectiveSpec()
        product = score(metrics, 74.0, hardware_terms(objective)) * score(metrics, 74.0, accuracy_terms(objective))
        assert product == pytest.approx(score(metrics, 74.0, objective))

    def test_priority_split_keeps_coefficients(self):
        """Test that priority exponents carry into the split"""
        objective = parse_objective("priority:a=0.5,b=0.2,c=0.8,d=1")
        assert hardware_terms(objective) == monomial(b=0.2, c=0.8)
        assert accuracy_terms(objective) == monomial(a=0.5, d=1.0)

    def test_delay_split(self):
        """Test that D/Acc splits into delay and accuracy"""
        objective = ObjectiveSpec(mode=ObjectiveMode.DELAY_ACC)
        assert hardware_terms(objective) == monomial(b=1.0)
        assert accuracy_terms(objective) == monomial(d=1.0)
