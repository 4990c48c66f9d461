"""
Command-line front end.

    framelab list
    framelab <preset> [--seed N] [--out DIR] [--grid N] [--window W] [--set key=value]...
    framelab run --config PATH [same options]

Exit codes: 0 when every check passes, 1 when a check fails or a
computation cannot reach its tolerance, 2 on invalid configuration.
"""

import logging

import click
from pydantic import ValidationError

from framelab.errors import FramelabError
from framelab.experiments import (
    PRESET_BUDGETS,
    PRESETS,
    ExperimentConfig,
    build_config,
    parse_set_values,
    run_pipeline,
)
from framelab.settings import config, configure_logging

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INVALID = 2


def _overrides(seed, out, grid, window, set_values) -> dict:
    overrides = parse_set_values(set_values)
    for key, value in (("seed", seed), ("out", out), ("grid", grid), ("window", window)):
        if value is not None:
            overrides[key] = value
    return overrides


def _load(target: str, config_path, overrides: dict) -> ExperimentConfig:
    if target == "run":
        if not config_path:
            raise click.UsageError("'run' needs --config PATH")
        return ExperimentConfig.from_file(config_path, overrides)
    if target not in PRESETS:
        raise click.UsageError(f"Unknown target '{target}'; use 'list' to see the presets")
    if config_path:
        return ExperimentConfig.from_file(config_path, {**overrides, "preset": target})
    overrides.setdefault("seed", config.SEED)
    return build_config({"preset": target}, overrides)


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("target")
@click.option("-c", "--config", "config_path", type=click.Path(dir_okay=False),
              help="Experiment config in key=value format.")
@click.option("--seed", type=int, default=None, help="Seed for jitter and Monte-Carlo sampling.")
@click.option("-o", "--out", type=click.Path(file_okay=False), default=None,
              help="Output directory for report.json and the CSV tables.")
@click.option("--grid", type=int, default=None, help="Coarsest discretization grid.")
@click.option("--window", type=float, default=None, help="Spectrum half-window.")
@click.option("--set", "set_values", multiple=True, metavar="KEY=VALUE",
              help="Override any config field; may be repeated.")
@click.option("--log-level", default=None, help="Logging level, FRAMELAB_LOG_LEVEL by default.")
def main(target, config_path, seed, out, grid, window, set_values, log_level):
    """Run a preset experiment, a config file (TARGET=run) or list the presets (TARGET=list)."""
    configure_logging(log_level.upper() if log_level else None)

    if target == "list":
        for name in PRESETS:
            click.echo(f"{name:<18} budget {PRESET_BUDGETS[name]:>3}s")
        return

    try:
        cfg = _load(target, config_path, _overrides(seed, out or None, grid, window, set_values))
    except click.UsageError:
        raise
    except (FramelabError, ValidationError, ValueError) as e:
        click.echo(f"Invalid configuration: {e}", err=True)
        raise SystemExit(EXIT_INVALID)

    if out is None and not any(v.startswith("out=") for v in set_values) and cfg.out == "out":
        cfg = cfg.model_copy(update={"out": config.OUT_DIR})

    try:
        report = run_pipeline(cfg)
    except ArithmeticError as e:
        click.echo(f"{report_name(cfg)} could not be computed: {e}", err=True)
        raise SystemExit(EXIT_FAIL)
    except (FramelabError, ValueError) as e:
        click.echo(f"Invalid configuration: {e}", err=True)
        raise SystemExit(EXIT_INVALID)

    for check in report.checks:
        mark = "ok" if check.passed else "FAILED"
        click.echo(f"  {check.name:<32} {check.value!s:<24} {check.op} {check.threshold!s:<12} {mark}")
    status = "PASS" if report.passed else "FAIL"
    click.echo(f"{report.experiment_id}: {status} ({report.wall_clock:.2f}s) -> {cfg.out}")
    raise SystemExit(EXIT_PASS if report.passed else EXIT_FAIL)


def report_name(cfg: ExperimentConfig) -> str:
    return cfg.preset or "pipeline"
