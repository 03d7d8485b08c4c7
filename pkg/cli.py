#!/usr/bin/env python3
"""
Stochastic PF - experiment command line.

Usage:
    python cli.py solve  --config scenarios/default.toml [--out DIR] [--seeds 1,2,3]
                         [--tol 1e-8] [--format csv|json] [--resume]
    python cli.py verify --config scenarios/default.toml

Exit codes: 0 success, 1 config or IO error, 2 non-convergence (solve) or a
failed check (verify).
"""

import logging
import os
import sys

import click

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from stochastic_pf.config import LOG_LEVEL, load_config
from stochastic_pf.errors import ConfigError
from stochastic_pf.experiment import EXIT_CONFIG, run_experiment
from stochastic_pf.verify import verify_suite

logger = logging.getLogger(__name__)


def _seed_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers, e.g. 1,2,3")


@click.group()
def cli():
    """Random eigenpairs of monotone homogeneous maps by pullback iteration."""
    logging.basicConfig(level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--config", "config_path", required=True, help="Experiment file (.toml or .json).")
@click.option("--out", "out_dir", default=None, help="Output directory (overrides the config).")
@click.option("--seeds", default=None, callback=_seed_list, help="Comma-separated seed list.")
@click.option("--tol", type=float, default=None, help="Hilbert-diameter tolerance.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None,
              help="Write only this report format.")
@click.option("--resume", is_flag=True, help="Reuse stored runs with an identical config digest.")
@click.pass_context
def solve(ctx, config_path, out_dir, seeds, tol, fmt, resume):
    """Solve every seed of the sweep and write report.json and the CSV curves."""
    try:
        config = load_config(config_path, out_dir=out_dir, seeds=seeds, tol=tol,
                             formats=[fmt] if fmt else None)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    try:
        report = run_experiment(config, resume=resume)
    except OSError as e:
        click.echo(f"cannot write results to {config.out_dir}: {e}", err=True)
        ctx.exit(EXIT_CONFIG)

    for run in report.runs:
        if run.converged:
            click.echo(f"seed {run.seed} base {run.base}: converged at depth {run.depth_reached} "
                       f"(m_strict={run.m_strict}), lyapunov {run.lyapunov}")
        else:
            click.echo(f"seed {run.seed} base {run.base}: not converged: {run.reason}")
    aggregates = report.aggregates()
    click.echo(f"{aggregates['converged']}/{aggregates['runs']} converged; results in {config.out_dir}")
    ctx.exit(report.exit_code)


@cli.command()
@click.option("--config", "config_path", required=True, help="Experiment file (.toml or .json).")
@click.pass_context
def verify(ctx, config_path):
    """Run the named property checks and print one PASS/FAIL line each."""
    try:
        config = load_config(config_path)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(EXIT_CONFIG)
    summary = verify_suite(config)
    for line in summary.lines():
        click.echo(line)
    click.echo("all checks passed" if summary.passed else "some checks failed")
    ctx.exit(summary.exit_code)


if __name__ == "__main__":
    cli()
