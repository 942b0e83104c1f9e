"""
PHKG Command Line
=================
Entry point for the food log -> patterns -> PHKG -> reasoner ->
recommendations flow.

Every subcommand runs one stage; `pipeline` runs them all and writes the
same files the individual stages would. Errors are reported as a single
`error: <message>` line on stderr (exit 1 for invalid input, exit 2 for
I/O failures).
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import click

from config.settings import Settings, load_config_file, settings
from core.competency import CompetencyService
from core.errors import PHKGError
from core.foodlog import GenSpec, MealType, generate_synthetic_log, serialize_log
from core.phkg_builder import load_profile
from core.pipeline import (
    PipelineConfig,
    build,
    dump_json,
    ingest,
    load_guidelines,
    read_text,
    reason,
    recommend,
    run_pipeline,
    summarize,
)
from core.query_engine import run_query
from core.rdf_store import parse_turtle, serialize_turtle
from core.reasoner import ConstraintSet
from core.summarizer import Thresholds
from tools.recipe_search import RecipeSearchService, load_catalog_file

logger = logging.getLogger(__name__)

EXIT_INVALID = 1
EXIT_IO = 2


@dataclass
class CliState:
    settings: Settings = settings
    threshold_overrides: dict[str, float] = field(default_factory=dict)

    def pipeline_config(self, **paths) -> PipelineConfig:
        return PipelineConfig.from_settings(self.settings, self.threshold_overrides, **paths)


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__


class PHKGGroup(click.Group):
    """Maps engine errors to the CLI exit-code contract."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except (click.exceptions.Exit, click.ClickException, click.Abort):
            raise
        except (PHKGError, ValueError) as exc:
            click.echo(f"error: {_one_line(exc)}", err=True)
            ctx.exit(EXIT_INVALID)
        except OSError as exc:
            click.echo(f"error: {_one_line(exc)}", err=True)
            ctx.exit(EXIT_IO)


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def write_output(text: str, output: Optional[Path]) -> None:
    if output is None:
        click.echo(text, nl=False)
        return
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(text, encoding="utf-8")
    logger.info("Wrote %s", output)


def threshold_options(command):
    """One `--thresholds.<name>` option per Thresholds field."""
    for name in reversed(Thresholds.field_names()):
        command = click.option(
            f"--thresholds.{name}",
            f"threshold_{name}",
            type=float,
            default=None,
            help=f"Override the {name} threshold.",
        )(command)
    return command


# -------------------------
# Command group
# -------------------------

@click.group(cls=PHKGGroup)
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="key = value config file.")
@click.option("--window-length", type=int, default=None, help="Window length in days.")
@click.option("--verbose", is_flag=True, help="Log at INFO.")
@click.option("--debug", is_flag=True, help="Log at DEBUG.")
@threshold_options
@click.pass_context
def cli(ctx: click.Context, config_path, window_length, verbose, debug, **thresholds):
    """Personal health knowledge graph tools."""
    overrides: dict[str, object] = {}
    if config_path is not None:
        if not config_path.is_file():
            raise FileNotFoundError(f"config file not found: {config_path}")
        overrides.update(load_config_file(str(config_path)))
    if window_length is not None:
        overrides["window_length_days"] = window_length

    effective = settings.with_overrides(overrides) if overrides else settings
    effective.validate()

    level = "DEBUG" if debug else "INFO" if verbose else effective.LOG_LEVEL
    configure_logging(level)

    flags = {
        name.removeprefix("threshold_"): value
        for name, value in thresholds.items()
        if value is not None
    }
    Thresholds.from_settings(effective).with_overrides(flags)
    ctx.obj = CliState(effective, flags)


existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
output_file = click.Path(dir_okay=False, path_type=Path)


# -------------------------
# Stage commands
# -------------------------

@cli.command()
@click.option("--days", type=int, default=35, show_default=True)
@click.option("--seed", type=int, default=None, help="Random seed (default: settings).")
@click.option("--start", type=click.DateTime(formats=["%Y-%m-%d"]), default="2021-09-23", show_default=True)
@click.option("--meals", default="breakfast,lunch,dinner", show_default=True)
@click.option("--carbs-mean", type=float, default=45.0, show_default=True)
@click.option("--carbs-jitter", type=float, default=0.1, show_default=True)
@click.option("--fat-mean", type=float, default=25.0, show_default=True)
@click.option("--protein-mean", type=float, default=25.0, show_default=True)
@click.option("--calories-mean", type=float, default=None)
@click.option("--variable-carbs", is_flag=True, help="Draw carbohydrates with a wide spread.")
@click.option("--low-carb-high-fat", is_flag=True)
@click.option("--skip-breakfast", type=float, default=0.0, show_default=True, help="Probability of skipping breakfast.")
@click.option("--user", "user_id", default=None)
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl", show_default=True)
@click.option("-o", "--output", type=output_file, default=None)
@click.pass_obj
def gen(state: CliState, days, seed, start, meals, carbs_mean, carbs_jitter, fat_mean,
        protein_mean, calories_mean, variable_carbs, low_carb_high_fat, skip_breakfast,
        user_id, fmt, output):
    """Generate a synthetic food log."""
    spec = GenSpec(
        start=start.date(),
        num_days=days,
        meals=tuple(MealType.parse(meal) for meal in meals.split(",") if meal.strip()),
        carbs_mean=carbs_mean,
        carbs_jitter=carbs_jitter,
        fat_mean=fat_mean,
        protein_mean=protein_mean,
        calories_mean=calories_mean,
        consistent_carbs=not variable_carbs,
        low_carb_high_fat=low_carb_high_fat,
        skip_breakfast_probability=skip_breakfast,
        seed=state.settings.SEED if seed is None else seed,
        user_id=user_id or state.settings.USER_ID,
        thresholds=state.pipeline_config().thresholds,
    )
    write_output(serialize_log(generate_synthetic_log(spec), fmt), output)


@cli.command("ingest")
@click.argument("log_path", type=existing_file)
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl", show_default=True)
@click.option("-o", "--output", type=output_file, default=None)
@click.pass_obj
def ingest_command(state: CliState, log_path, fmt, output):
    """Validate a food log and echo it in canonical form."""
    write_output(serialize_log(ingest(read_text(log_path), state.settings.USER_ID), fmt), output)


@cli.command("summarize")
@click.option("--log", "log_path", type=existing_file, required=True)
@click.option("-o", "--output", type=output_file, default=None)
@click.pass_obj
def summarize_command(state: CliState, log_path, output):
    """Mine patterns and write the PatternSet report."""
    patterns = summarize(ingest(read_text(log_path), state.settings.USER_ID), state.pipeline_config())
    write_output(dump_json(patterns.to_dict()), output)


@cli.command("build-kg")
@click.option("--log", "log_path", type=existing_file, required=True)
@click.option("--profile", "profile_path", type=existing_file, required=True)
@click.option("-o", "--output", type=output_file, default=None)
@click.pass_obj
def build_kg(state: CliState, log_path, profile_path, output):
    """Build the PHKG and write it as Turtle."""
    profile = load_profile(read_text(profile_path), state.settings.USER_ID)
    log = ingest(read_text(log_path), profile.user_id)
    write_output(serialize_turtle(build(log, profile, state.pipeline_config())), output)


@cli.command("reason")
@click.option("--kg", "kg_path", type=existing_file, required=True)
@click.option("--rules", "rules_dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("-o", "--output", type=output_file, default=None)
@click.option("--report", "report_path", type=output_file, default=None)
@click.pass_obj
def reason_command(state: CliState, kg_path, rules_dir, output, report_path):
    """Classify a PHKG against the guidelines."""
    graph = parse_turtle(read_text(kg_path))
    rules = load_guidelines(rules_dir or Path(state.settings.RULES_DIR))
    reasoned, report = reason(graph, rules)

    write_output(serialize_turtle(reasoned), output)
    if report_path is not None:
        write_output(dump_json(report), report_path)
    elif output is not None:
        click.echo(dump_json(report), nl=False)


def _parse_params(values: tuple[str, ...]) -> dict[str, str]:
    params = {}
    for item in values:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise click.BadParameter(f"expected key=value, got {item!r}", param_hint="--param")
        params[key.strip()] = value.strip()
    return params


@cli.command("query")
@click.option("--kg", "kg_path", type=existing_file, required=True)
@click.option("--sparql", "sparql_path", type=existing_file, default=None, help="File with a subset-SPARQL query.")
@click.option("--question", "question_id", default=None, help="Competency question id.")
@click.option("--param", "params", multiple=True, help="Question parameter as key=value.")
@click.option("--log", "log_path", type=existing_file, default=None, help="Food log for log-aware answers.")
@click.option("--rules", "rules_dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--catalog", "catalog_path", type=existing_file, default=None)
@click.pass_obj
def query_command(state: CliState, kg_path, sparql_path, question_id, params, log_path, rules_dir, catalog_path):
    """Run a SPARQL query (TSV) or answer a competency question (JSON)."""
    if (sparql_path is None) == (question_id is None):
        raise click.UsageError("give exactly one of --sparql or --question")

    graph = parse_turtle(read_text(kg_path))
    if sparql_path is not None:
        click.echo(run_query(graph, read_text(sparql_path)).to_tsv(), nl=False)
        return

    arguments: dict[str, object] = _parse_params(params)
    if log_path is not None:
        arguments["log"] = ingest(read_text(log_path), state.settings.USER_ID)

    service = CompetencyService(
        rules=load_guidelines(rules_dir or Path(state.settings.RULES_DIR)),
        recipe_search=RecipeSearchService(load_catalog_file(catalog_path or state.settings.CATALOG_PATH)),
        progress_band=state.settings.PROGRESS_BAND,
        window_length_days=state.settings.WINDOW_LENGTH_DAYS,
    )
    answer = service.answer_competency(graph, question_id, arguments)
    click.echo(dump_json(answer.to_dict()), nl=False)


def _load_constraints(value: Optional[str]) -> ConstraintSet:
    """Inline JSON, a ConstraintSet file, or a reason report file."""
    if not value:
        return ConstraintSet()
    text = value if value.lstrip().startswith("{") else read_text(Path(value))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"constraints are not valid JSON: {exc.msg}") from None
    return ConstraintSet.from_dict(data)


@cli.command("recommend")
@click.option("--meal", type=click.Choice([m.value for m in MealType], case_sensitive=False), default="breakfast", show_default=True)
@click.option("--constraints", "constraints", default=None, help="ConstraintSet JSON, or a file holding it or a reason report.")
@click.option("--catalog", "catalog_path", type=existing_file, default=None)
@click.option("-o", "--output", type=output_file, default=None)
@click.pass_obj
def recommend_command(state: CliState, meal, constraints, catalog_path, output):
    """Rank catalog recipes under a ConstraintSet."""
    cs = _load_constraints(constraints)
    recipes = recommend(cs, MealType.parse(meal), catalog_path or Path(state.settings.CATALOG_PATH))
    write_output(dump_json(recipes), output)


@cli.command("pipeline")
@click.option("--log", "log_path", type=existing_file, required=True)
@click.option("--profile", "profile_path", type=existing_file, required=True)
@click.option("--rules", "rules_dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--catalog", "catalog_path", type=existing_file, default=None)
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
@click.option("--meal", type=click.Choice([m.value for m in MealType], case_sensitive=False), default="breakfast", show_default=True)
@click.pass_obj
def pipeline_command(state: CliState, log_path, profile_path, rules_dir, catalog_path, output_dir, meal):
    """Run every stage and write all outputs."""
    config = state.pipeline_config(
        log_path=log_path,
        profile_path=profile_path,
        rules_dir=rules_dir,
        catalog_path=catalog_path,
        output_dir=output_dir,
        meal=MealType.parse(meal),
    )
    for name, path in run_pipeline(config).items():
        click.echo(f"{name}\t{path}")


def main():
    cli(prog_name="phkg")


if __name__ == "__main__":
    main()
