"""
Command line interface

    cimsearch space SPEC
    cimsearch eval --spec SPEC --design DESIGN [--profile PROFILE]
    cimsearch search CONFIG [--seed N] [--workers N] [--objective OBJ] [--generations N]
    cimsearch compare CONFIG
    cimsearch baselines CONFIG
    cimsearch train-predictor CONFIG

Exit codes: 0 success, 2 config/parse error, 3 infeasible evaluation, 4 search failure.
"""

import functools
import logging
import time
from pathlib import Path
from typing import Optional

import click

from cimsearch import __version__
from cimsearch.config import RunConfig, load_run_config, settings, validate_settings_on_startup
from cimsearch.exceptions import CimSearchError, InfeasibleDesign, SearchError
from cimsearch.ml.oracle import AccuracyOracle
from cimsearch.ml.predictor import save_checkpoint, train_two_phase
from cimsearch.models.schemas import ArchiveEntry, ObjectiveAnchor, ObjectiveMode, RunManifest, SearchConfig
from cimsearch.search.archive import diversity, select_top_k
from cimsearch.search.baselines import baselines as run_baselines
from cimsearch.search.compare import baseline_frame, run_comparison
from cimsearch.search.evolve import run_search
from cimsearch.search.objective import parse_objective, score, with_anchor
from cimsearch.services import reports
from cimsearch.services.cim_cost import layer_table
from cimsearch.services.context import RunContext, build_context
from cimsearch.services.space import cardinality, format_cardinality, load_design, load_spec

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SEARCH = 4


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        force=True,
    )


def exit_codes(func):
    """Map engine errors onto exit codes"""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SearchError as e:
            click.echo(f"Search failed: {e}", err=True)
            raise SystemExit(EXIT_SEARCH)
        except InfeasibleDesign as e:
            click.echo(f"Infeasible: {e}", err=True)
            raise SystemExit(EXIT_INFEASIBLE)
        except CimSearchError as e:
            click.echo(f"Error: {e}", err=True)
            raise SystemExit(EXIT_CONFIG)

    return wrapper


def _manifest(
    context: RunContext,
    command: str,
    run_id: str,
    seed: int,
    started: float,
    anchor: Optional[ObjectiveAnchor] = None,
) -> RunManifest:
    config = context.config
    return RunManifest(
        run_id=run_id,
        command=command,
        config_path=config.source_path or "",
        config_sha256=config.source_sha256 or "",
        seed=seed,
        spec_sha256=context.spec_sha256,
        profile_sha256=context.profile_sha256,
        tool_version=__version__,
        duration_s=round(time.perf_counter() - started, 3),
        anchor=reports.anchor_text(anchor),
    )


def _search_config(config: RunConfig, overrides: dict) -> SearchConfig:
    values = config.search.model_dump()
    values.update({k: v for k, v in overrides.items() if v is not None})
    return SearchConfig(**values)


def _output_dir(option: Optional[str], run_id: str) -> Path:
    return Path(option) if option else Path(settings.OUTPUT_DIR) / run_id


# ============================================
# Commands
# ============================================

@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default from CIMSEARCH_LOG_LEVEL)")
@click.version_option(__version__, prog_name="cimsearch")
def cli(log_level: Optional[str]):
    """Joint model, quantization and hardware search for compute-in-memory accelerators."""
    configure_logging(log_level)
    validate_settings_on_startup()


@cli.command("space")
@click.argument("spec_path", type=click.Path(dir_okay=False))
@exit_codes
def space_cmd(spec_path: str):
    """Print the size of a search space."""
    spec = load_spec(Path(spec_path))
    counts = cardinality(spec)
    click.echo(f"spec:     {spec.name} ({spec.model_template.value}, {len(spec.genes)} genes)")
    click.echo(f"model:    {format_cardinality(counts.model)}")
    click.echo(f"quant:    {format_cardinality(counts.quant)}")
    click.echo(f"hardware: {format_cardinality(counts.hardware)}")
    click.echo(f"total:    {format_cardinality(counts.total)}")
    click.echo(f"{counts.model} × {counts.quant} × {counts.hardware} = {counts.total}")


@cli.command("eval")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Run config (oracle, workload, profiles)")
@click.option("--spec", "spec_path", type=click.Path(dir_okay=False), help="Search space spec")
@click.option("--design", "design_path", required=True, type=click.Path(dir_okay=False), help="Design file (YAML)")
@click.option("--profile", "profile_path", type=click.Path(dir_okay=False), help="Technology profile")
@click.option("--objective", default=None, help="edap | delay | energy_area | priority:a=..,b=..,c=..,d=..")
@click.option("--layers", "layers_path", type=click.Path(dir_okay=False), help="Write per-layer costs here")
@click.option("--output", "output_path", type=click.Path(dir_okay=False), help="Also write the row here")
@exit_codes
def eval_cmd(config_path, spec_path, design_path, profile_path, objective, layers_path, output_path):
    """Evaluate one explicit design and print its archive row."""
    if config_path:
        config = load_run_config(config_path)
    elif spec_path:
        config = RunConfig(space=spec_path)
    else:
        raise CimSearchError("provide --config or --spec")

    context = build_context(config, spec_path=spec_path, profile_path=profile_path)
    design = load_design(context.spec, Path(design_path))
    metrics = context.evaluator.metrics(design)
    accuracy = float(context.predictor.predict_designs([design])[0])

    objective_spec = parse_objective(objective) if objective else config.search.objective
    if objective_spec.mode == ObjectiveMode.PRIORITY and objective_spec.anchor is None:
        objective_spec = with_anchor(objective_spec, metrics, accuracy)
    feasible = metrics.feasible and metrics.area_mm2 <= config.search.area_constraint
    entry = ArchiveEntry(
        index=0,
        generation=0,
        design=design,
        metrics=metrics,
        accuracy=accuracy,
        score=score(metrics, accuracy, objective_spec),
        feasible=feasible,
    )

    run_id = reports.make_run_id("eval", config.source_sha256 or context.spec_sha256,
                                 {"design": reports.encoding_text(design.encoding), "profile": context.profile_sha256})
    text = reports.to_csv_text(reports.archive_frame([entry]), "archive", run_id, manifest="-")
    click.echo(text, nl=False)
    if output_path:
        Path(output_path).write_text(text, encoding="utf-8")
    if layers_path:
        reports.write_csv(layer_table(context.evaluator.layer_costs(design)), Path(layers_path),
                          "layers", run_id, manifest="-")

    if not feasible:
        raise InfeasibleDesign(
            f"needs {metrics.macros_required} macros (chip has {metrics.macros_available}), "
            f"area {metrics.area_mm2:.4g} mm2 (limit {config.search.area_constraint})"
        )


@cli.command("search")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--objective", default=None, help="edap | delay | energy_area | priority:a=..,b=..,c=..,d=..")
@click.option("--generations", type=int, default=None)
@click.option("--population", type=int, default=None)
@click.option("--output-dir", default=None, type=click.Path(file_okay=False))
@exit_codes
def search_cmd(config_path, seed, workers, objective, generations, population, output_dir):
    """Run the joint evolutionary search."""
    started = time.perf_counter()
    config = load_run_config(config_path)
    overrides = {
        "seed": seed,
        "objective": parse_objective(objective) if objective else None,
        "generations": generations,
        "population": population,
    }
    if workers is None and config.search.workers == 1:
        workers = settings.WORKERS
    search_config = _search_config(config, {**overrides, "workers": workers})

    context = build_context(config)
    # Worker count never changes results, so it stays out of the run id
    run_id = reports.make_run_id(
        "search", config.source_sha256, {k: v for k, v in overrides.items() if v is not None}
    )
    out = _output_dir(output_dir, run_id)
    logger.info(f"Search {run_id}: P={search_config.population}, G={search_config.generations}, "
                f"seed={search_config.seed}, workers={search_config.workers}")

    result = run_search(context.spec, search_config, context.evaluator, context.predictor)
    top = select_top_k(result.archive.entries, result.objective, search_config.top_k)
    div = diversity([e.design.encoding for e in top.entries])
    anchor = result.anchor or result.objective.anchor

    reports.write_csv(reports.archive_frame(result.archive.entries, result.archive.hits),
                      out / "archive.csv", "archive", run_id, anchor=anchor)
    reports.write_csv(reports.convergence_frame(result.convergence), out / "convergence.csv", "convergence", run_id)
    reports.write_csv(reports.topk_frame(top.entries, top.scores, div), out / "topk.csv", "topk", run_id)
    reports.write_manifest(_manifest(context, "search", run_id, search_config.seed, started, anchor), out)

    best = result.best
    if best is None:
        raise SearchError("no feasible design archived")
    click.echo(f"run:        {run_id}")
    click.echo(f"archive:    {len(result.archive)} designs, {result.cache_hits} cache hits, "
               f"{result.rejections} rejections")
    click.echo(f"best score: {best.score:.6g} (generation {best.generation})")
    click.echo(f"best E/D/A: {best.metrics.energy_mj:.4g} mJ / {best.metrics.delay_us:.4g} us / "
               f"{best.metrics.area_mm2:.4g} mm2, accuracy {best.accuracy:.2f}%")
    click.echo(f"diversity:  {div:.3f} (top {len(top.entries)})")
    click.echo(f"output:     {out}")


@cli.command("compare")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--objective", default=None)
@click.option("--generations", type=int, default=None)
@click.option("--output-dir", default=None, type=click.Path(file_okay=False))
@exit_codes
def compare_cmd(config_path, seed, workers, objective, generations, output_dir):
    """Joint search vs two-stage vs XPert-like vs baselines."""
    started = time.perf_counter()
    config = load_run_config(config_path)
    overrides = {
        "seed": seed,
        "objective": parse_objective(objective) if objective else None,
        "generations": generations,
    }
    search_config = _search_config(config, {**overrides, "workers": workers})
    context = build_context(config)
    run_id = reports.make_run_id(
        "compare", config.source_sha256, {k: v for k, v in overrides.items() if v is not None}
    )
    out = _output_dir(output_dir, run_id)

    comparison = run_comparison(context, search_config)
    reports.write_csv(comparison.frame, out / "compare.csv", "compare", run_id)
    reports.write_manifest(_manifest(context, "compare", run_id, search_config.seed, started), out)
    click.echo(comparison.frame.to_string(index=False, float_format=lambda v: f"{v:.4g}"))
    click.echo(f"output: {out}")


@cli.command("baselines")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--samples", type=int, default=None, help="Random hardware samples for Baseline 2")
@click.option("--output-dir", default=None, type=click.Path(file_okay=False))
@exit_codes
def baselines_cmd(config_path, samples, output_dir):
    """Reference network on median hardware and averaged over random hardware."""
    started = time.perf_counter()
    config = load_run_config(config_path)
    context = build_context(config)
    search_config = config.search
    count = samples or search_config.baseline_samples
    run_id = reports.make_run_id("baselines", config.source_sha256, {"samples": count})
    out = _output_dir(output_dir, run_id)

    base = run_baselines(context.spec, context.evaluator, context.predictor,
                         samples=count, seed=search_config.seed)
    objective = search_config.objective
    if objective.mode == ObjectiveMode.PRIORITY and objective.anchor is None:
        b1 = base["baseline1"]
        objective = with_anchor(objective, b1.metrics, b1.accuracy)
    frame = baseline_frame(base, objective)
    reports.write_csv(frame, out / "baselines.csv", "baselines", run_id)
    reports.write_manifest(_manifest(context, "baselines", run_id, search_config.seed, started), out)
    click.echo(frame.to_string(index=False, float_format=lambda v: f"{v:.4g}"))


@cli.command("train-predictor")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--samples", type=int, default=None, help="Oracle-labelled samples")
@click.option("--epochs", type=int, default=None)
@click.option("--output", "output_path", default=None, type=click.Path(dir_okay=False))
@exit_codes
def train_predictor_cmd(config_path, samples, epochs, output_path):
    """Train the accuracy predictor on oracle labels (full precision, then mixed precision)."""
    config = load_run_config(config_path)
    spec = load_spec(config.spec_path)
    section = config.predictor
    hyper = section.hyper if epochs is None else section.hyper.model_copy(update={"epochs": epochs})
    count = samples or section.train_samples

    click.echo(f"Training predictor on {count} samples ({len(spec.genes)} genes)...")
    oracle = AccuracyOracle(config.oracle, spec.model_template)
    model, metrics = train_two_phase(spec, oracle, count, hyper)

    target = Path(output_path) if output_path else (
        config.resolve(section.checkpoint) if section.checkpoint else Path(settings.OUTPUT_DIR) / "predictor.joblib"
    )
    save_checkpoint(model, target, spec_name=spec.name)

    click.echo("✓ Predictor trained")
    for key, value in metrics.items():
        click.echo(f"  {key}: {value}")
    click.echo(f"  checkpoint: {target}")


def main():
    cli(prog_name="cimsearch")


if __name__ == "__main__":
    main()
