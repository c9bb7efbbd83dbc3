"""
Fibrehom CLI

Command-line interface for RVE homogenisation runs.

Usage:
    fibrehom run configs/calibration/tension.json
    fibrehom run --check-mesh textile.mesh
    fibrehom sweep configs/ud_gfrp/sweep_gf.json --axis interface.Gf --values 0.002,0.003,0.004,0.1
    fibrehom gen configs/ud_gfrp/rve1.json --seed 7
    fibrehom point configs/calibration/shear.json

Environment Variables:
    FIBREHOM_THREADS - Default worker count for sweeps (default: 1)
    FIBREHOM_LOG_LEVEL - Log level (default: WARNING)
    FIBREHOM_OUTPUT_DIR - Output directory when a config names none

Exit codes:
    0 success, 1 unexpected error, 2 invalid config, 3 mesh failure, 4 solve failure
"""

import csv
import logging
import sys
from pathlib import Path
from typing import Optional

import click

from .config import ENV_LOG_LEVEL, ENV_THREADS, get_settings
from .driver import (
    EXIT_CONFIG,
    check_mesh,
    drive_point,
    execute,
    exit_code_for,
    run_sweep,
    write_generated,
)
from .exceptions import ConvergenceError, FibrehomError
from .models import COMPONENT_NAMES, RunStatus
from .run_config import RunConfig, load_run_config
from .utils import format_float, parse_value_list

logger = logging.getLogger(__name__)


def _fail(exc: BaseException) -> None:
    """Report an error on stderr and exit with its status."""
    click.echo(f"Error: {exc}", err=True)
    if isinstance(exc, ConvergenceError) and exc.last_good_strain is not None:
        strain = ", ".join(format_float(float(v)) for v in exc.last_good_strain)
        click.echo(f"Last converged strain: [{strain}]", err=True)
    if not isinstance(exc, FibrehomError):
        logger.debug("Unexpected failure", exc_info=exc)
    sys.exit(exit_code_for(exc))


def _load(
    config_path: Path,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    out: Optional[Path] = None,
) -> RunConfig:
    config = load_run_config(config_path)
    if seed is not None:
        config = config.with_seed(seed)
    if threads is not None:
        config = config.with_threads(threads)
    if out is not None:
        config = config.with_output_dir(out)
    return config


seed_option = click.option("--seed", "-s", type=int, default=None, help="Override the config seed")
threads_option = click.option(
    "--threads", "-j", type=int, default=None, help=f"Worker count (env: {ENV_THREADS})"
)
out_option = click.option(
    "--out", "-o", type=click.Path(path_type=Path), default=None, help="Override the output directory"
)


@click.group()
@click.version_option(package_name="fibrehom")
@click.option("--verbose", "-v", count=True, help=f"-v for INFO, -vv for DEBUG (env: {ENV_LOG_LEVEL})")
def cli(verbose: int):
    """Fibrehom - FE homogenisation of fibre-composite RVEs"""
    level = get_settings().numeric_log_level()
    if verbose:
        level = logging.DEBUG if verbose > 1 else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@cli.command("run")
@click.argument("config_path", metavar="CONFIG", type=click.Path(path_type=Path), required=False)
@click.option(
    "--check-mesh", "mesh_file",
    type=click.Path(path_type=Path),
    default=None,
    help="Validate a mesh file, print its counts and exit"
)
@threads_option
@seed_option
@out_option
def run_command(
    config_path: Optional[Path],
    mesh_file: Optional[Path],
    threads: Optional[int],
    seed: Optional[int],
    out: Optional[Path],
):
    """Solve one run config.

    Examples:
        fibrehom run configs/calibration/tension.json
        fibrehom run configs/ud_gfrp/rve1.json --seed 3 --out runs/rve1-s3
        fibrehom run --check-mesh textile.mesh
    """
    try:
        if mesh_file is not None:
            summary = check_mesh(mesh_file)
            for key, value in summary.items():
                text = f"{value:.6g}" if isinstance(value, float) else str(value)
                click.echo(f"{key}: {text}")
            return
        if config_path is None:
            click.echo("Error: CONFIG is required unless --check-mesh is given", err=True)
            sys.exit(EXIT_CONFIG)

        config = _load(config_path, seed, threads, out)
        click.echo(f"Running {config!r}")
        outcome = execute(config)
        final = outcome.result.steps[-1] if outcome.result and outcome.result.steps else None
        if final is not None:
            stress = ", ".join(f"{v:.4g}" for v in final.stress)
            click.echo(f"Final stress [MPa]: [{stress}]")
        click.echo(f"Curve: {outcome.outputs['curve']}")
        click.echo(f"Manifest: {outcome.outputs['manifest']}")
    except Exception as exc:
        _fail(exc)


@cli.command("sweep")
@click.argument("config_path", metavar="CONFIG", type=click.Path(path_type=Path))
@click.option("--axis", "-a", required=True, help="Dotted config path, e.g. interface.Gf")
@click.option("--values", "values_text", required=True, help="Comma-separated values")
@threads_option
@seed_option
@out_option
def sweep_command(
    config_path: Path,
    axis: str,
    values_text: str,
    threads: Optional[int],
    seed: Optional[int],
    out: Optional[Path],
):
    """Run one variant per value of a config entry.

    Examples:
        fibrehom sweep configs/ud_gfrp/sweep_ft.json --axis interface.ft --values 20,35,50,inf -j 4
    """
    try:
        config = _load(config_path, seed, threads, out)
        sweep = run_sweep(config, axis, parse_value_list(values_text), threads)
    except Exception as exc:
        _fail(exc)
        return

    for variant in sweep.variants:
        label = format_float(variant.value) if isinstance(variant.value, float) else str(variant.value)
        line = f"{axis}={label}: {variant.status.value}"
        if variant.status is RunStatus.FAILED and variant.message:
            line += f" ({variant.message})"
        click.echo(line)
    click.echo(f"Curves: {sweep.outputs['curves']}")
    click.echo(f"Summary: {sweep.outputs['summary']}")


@cli.command("gen")
@click.argument("config_path", metavar="CONFIG", type=click.Path(path_type=Path))
@seed_option
@out_option
def gen_command(config_path: Path, seed: Optional[int], out: Optional[Path]):
    """Generate the fibre layout and mesh only."""
    try:
        config = _load(config_path, seed, None, out)
        written = write_generated(config)
    except Exception as exc:
        _fail(exc)
        return
    for role, path in written.items():
        click.echo(f"{role}: {path}")


@cli.command("point")
@click.argument("config_path", metavar="CONFIG", type=click.Path(path_type=Path))
@out_option
def point_command(config_path: Path, out: Optional[Path]):
    """Drive the matrix material point along the config's load program.

    Prints the strain-stress history as CSV, or writes it under --out.
    """
    try:
        config = _load(config_path)
        history = drive_point(config)
    except Exception as exc:
        _fail(exc)
        return

    header = ["step"] + [f"e{c}" for c in COMPONENT_NAMES] + [f"s{c}" for c in COMPONENT_NAMES]
    rows = [[str(int(r[0]))] + [format_float(v) for v in r[1:]] for r in history.to_rows()]
    if out is None:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return
    path = out / f"{config.name}_point.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    click.echo(f"Point history: {path}")


def main():
    """Entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
