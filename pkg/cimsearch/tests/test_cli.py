"""
Tests for the command line interface
"""
import pytest
import yaml
from click.testing import CliRunner

from cimsearch.commands.cli import cli
from cimsearch.services.reports import anchor_text, read_anchor, read_csv, read_manifest
from cimsearch.tests.conftest import CONFIGS, SPECS

TINY_CONFIG = str(CONFIGS / "tiny_search.yaml")


@pytest.fixture
def runner():
    return CliRunner()


def write_design(tmp_path, hardware=None):
    doc = {"model": "reference"}
    if hardware:
        doc["hardware"] = hardware
    path = tmp_path / "design.yaml"
    path.write_text(yaml.safe_dump(doc))
    return str(path)


class TestSpaceCommand:
    """Test `cimsearch space`"""

    def test_tiny_counts(self, runner):
        """Test the printed cardinality identity"""
        result = runner.invoke(cli, ["space", str(SPECS / "tiny.yaml")])
        assert result.exit_code == 0
        assert "20 × 4 × 6 = 480" in result.output

    def test_broken_spec(self, runner, tmp_path):
        """Test exit code 2 for a spec with an empty list"""
        doc = yaml.safe_load((SPECS / "tiny.yaml").read_text())
        doc["expansion_choices"] = []
        path = tmp_path / "broken.yaml"
        path.write_text(yaml.safe_dump(doc))
        result = runner.invoke(cli, ["space", str(path)])
        assert result.exit_code == 2

    def test_missing_spec(self, runner, tmp_path):
        """Test exit code 2 for a missing file"""
        assert runner.invoke(cli, ["space", str(tmp_path / "absent.yaml")]).exit_code == 2


class TestEvalCommand:
    """Test `cimsearch eval`"""

    def test_feasible_design(self, runner, tmp_path):
        """Test the archive row of a design that fits"""
        layers = tmp_path / "layers.csv"
        result = runner.invoke(cli, [
            "eval", "--spec", str(SPECS / "tiny.yaml"),
            "--design", write_design(tmp_path, {"G_per_chip": 8}),
            "--layers", str(layers),
        ])
        assert result.exit_code == 0
        assert "# schema=archive/1 manifest=- run=" in result.output
        assert len(read_csv(layers, "layers")) == 9

    def test_infeasible_design(self, runner, tmp_path):
        """Test exit code 3 for the reference network on median hardware"""
        result = runner.invoke(cli, [
            "eval", "--spec", str(SPECS / "tiny.yaml"), "--design", write_design(tmp_path),
        ])
        assert result.exit_code == 3

    def test_needs_spec_or_config(self, runner, tmp_path):
        """Test exit code 2 without a spec"""
        result = runner.invoke(cli, ["eval", "--design", write_design(tmp_path)])
        assert result.exit_code == 2


class TestSearchCommand:
    """Test `cimsearch search`"""

    def test_outputs_are_reproducible(self, runner, tmp_path):
        """Test byte-identical archives from two runs"""
        archives = []
        for name in ("a", "b"):
            out = tmp_path / name
            result = runner.invoke(cli, [
                "search", TINY_CONFIG, "--generations", "2", "--population", "10", "--output-dir", str(out),
            ])
            assert result.exit_code == 0, result.output
            archives.append((out / "archive.csv").read_text())
            assert read_manifest(out / "manifest.txt").command == "search"
            assert len(read_csv(out / "convergence.csv", "convergence")) == 3
        assert archives[0] == archives[1]

    def test_no_feasible_design(self, runner, tmp_path):
        """Test exit code 4 when sampling finds nothing"""
        config = tmp_path / "config.yaml"
        config.write_text(yaml.safe_dump({
            "space": str(SPECS / "tiny.yaml"),
            "search": {"population": 4, "generations": 1, "area_constraint": 1.0, "max_init_attempts": 20},
        }))
        result = runner.invoke(cli, ["search", str(config), "--output-dir", str(tmp_path / "out")])
        assert result.exit_code == 4

    def test_priority_anchor_in_archive_header(self, runner, tmp_path):
        """Test that a priority run records its normalization anchor"""
        result = runner.invoke(cli, [
            "search", TINY_CONFIG, "--generations", "1", "--population", "6",
            "--objective", "priority:a=0.3,b=0.3,c=1,d=1", "--output-dir", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        anchor = read_anchor(tmp_path / "archive.csv")
        assert anchor is not None
        archive = read_csv(tmp_path / "archive.csv", "archive")
        first = archive[archive["feasible"]].iloc[0]
        assert anchor.energy_mj == pytest.approx(first["energy_mj"], rel=1e-12)
        assert anchor.delay_us == pytest.approx(first["delay_us"], rel=1e-12)
        assert anchor.area_mm2 == pytest.approx(first["area_mm2"], rel=1e-12)
        assert anchor.accuracy == pytest.approx(first["accuracy"], rel=1e-12)
        assert read_manifest(tmp_path / "manifest.txt").anchor == anchor_text(anchor)

    def test_edap_run_has_no_anchor(self, runner, tmp_path):
        """Test that non-priority archives carry no anchor field"""
        result = runner.invoke(cli, [
            "search", TINY_CONFIG, "--generations", "1", "--population", "6", "--output-dir", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        assert read_anchor(tmp_path / "archive.csv") is None
        assert read_manifest(tmp_path / "manifest.txt").anchor == ""

    def test_bad_objective(self, runner, tmp_path):
        """Test exit code 2 for an unparsable objective"""
        result = runner.invoke(cli, ["search", TINY_CONFIG, "--objective", "priority:a=3",
                                     "--output-dir", str(tmp_path)])
        assert result.exit_code == 2


class TestOtherCommands:
    """Test compare, baselines and train-predictor"""

    def test_baselines(self, runner, tmp_path):
        """Test the two baseline rows"""
        result = runner.invoke(cli, ["baselines", TINY_CONFIG, "--samples", "5", "--output-dir", str(tmp_path)])
        assert result.exit_code == 0, result.output
        frame = read_csv(tmp_path / "baselines.csv", "baselines")
        assert list(frame["method"]) == ["baseline1", "baseline2"]

    def test_compare(self, runner, tmp_path):
        """Test the comparison table"""
        result = runner.invoke(cli, ["compare", TINY_CONFIG, "--generations", "2", "--output-dir", str(tmp_path)])
        assert result.exit_code == 0, result.output
        frame = read_csv(tmp_path / "compare.csv", "compare")
        assert set(frame["method"]) == {"baseline1", "baseline2", "joint", "two_stage", "xpert_like"}

    def test_train_predictor(self, runner, tmp_path):
        """Test that a checkpoint is written"""
        target = tmp_path / "predictor.joblib"
        result = runner.invoke(cli, [
            "train-predictor", TINY_CONFIG, "--samples", "200", "--epochs", "2", "--output", str(target),
        ])
        assert result.exit_code == 0, result.output
        assert "✓ Predictor trained" in result.output
        assert target.exists()
