"""Command-line entry point for shom experiments."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from shom.coeff import CoefficientField, load_family_config, make_coefficient
from shom.errors import ShomError
from shom.harness import ExperimentConfig, ExperimentKind, emit_report, load_summary, run_experiments, summary_table
from shom.harness.persistence import save_correctors, save_solution, write_solution_slice
from shom.harness.report import SUPPORTED_FORMATS, summarize
from shom.harness.runner import smooth_force, tangential_boundary
from shom.settings import Settings, get_settings
from shom.stokes import BoxDomain, StokesProblem, solve_homogenized, solve_stokes
from shom.torus import TorusGrid, compute_correctors, dual_identity_residual, flux_divergence_residual

LOGGER = logging.getLogger("shom.cli")

console = Console()

EXIT_OK = 0
EXIT_VERDICT_FAILURE = 1
EXIT_SOLVER_ERROR = 2

_EXPERIMENT_COMMANDS = {
    "green": ExperimentKind.GREEN_DECAY,
    "rates": ExperimentKind.RATES,
    "expand": ExperimentKind.EXPANSION,
    "divlog": ExperimentKind.DIVERGENCE_LOG,
    "maxprinciple": ExperimentKind.MAXPRINCIPLE,
}


def _configure_logging(settings: Settings) -> None:
    level = getattr(logging, settings.runtime.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s %(message)s")


def _read_config(path: Path) -> list[dict[str, Any]]:
    """Experiment JSON: one object, a list of objects, or ``{"experiments": [...]}``."""

    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(payload, dict) and "experiments" in payload:
        payload = payload["experiments"]
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list) or not all(isinstance(item, dict) for item in payload):
        raise ValueError(f"experiment config {path} must hold an object or a list of objects")
    return payload


def _flag_payload(args: argparse.Namespace) -> dict[str, Any]:
    payload: dict[str, Any] = {"family": args.family, "dimension": args.dim}
    if args.params:
        payload["params"] = json.loads(args.params)
    if args.family_file:
        family = load_family_config(args.family_file)
        payload.update({key: family[key] for key in ("family", "params", "dimension") if key in family})
    if isinstance(getattr(args, "eps", None), list):
        payload["eps"] = sorted(args.eps, reverse=True)
    if getattr(args, "cells", None) and args.command in _EXPERIMENT_COMMANDS:
        payload["cells"] = args.cells
    if getattr(args, "length", None) and args.command in _EXPERIMENT_COMMANDS:
        payload["length"] = args.length
    return payload


def _experiment_configs(args: argparse.Namespace, kind: ExperimentKind) -> list[ExperimentConfig]:
    if args.config:
        raw = [item for item in _read_config(args.config) if item.get("kind", kind.value) == kind.value]
        if not raw:
            raise ValueError(f"{args.config} declares no '{kind.value}' experiments")
    else:
        raw = [_flag_payload(args)]
    return [ExperimentConfig.model_validate({**item, "kind": kind.value}) for item in raw]


def _coefficient(args: argparse.Namespace, settings: Settings) -> CoefficientField:
    payload = _flag_payload(args)
    if args.config:
        first = _read_config(args.config)[0]
        payload.update({key: first[key] for key in ("family", "params", "dimension") if key in first})
    return make_coefficient(payload["family"], payload.get("params"), int(payload["dimension"]), settings=settings)


def _output_root(args: argparse.Namespace, settings: Settings) -> Path:
    return Path(args.out) if args.out else settings.runtime.output_dir


def _matrix_table(title: str, a_hat: np.ndarray) -> Table:
    """Render a[i, j, alpha, beta] as the (i alpha) x (j beta) block matrix."""

    d = a_hat.shape[0]
    block = np.transpose(a_hat, (0, 2, 1, 3)).reshape(d * d, d * d)
    table = Table(title=title)
    table.add_column("(i,a)")
    for j in range(d):
        for beta in range(d):
            table.add_column(f"({j},{beta})", justify="right")
    for row_index, row in enumerate(block):
        i, alpha = divmod(row_index, d)
        table.add_row(f"({i},{alpha})", *(f"{value: .6f}" for value in row))
    return table


def run_cell(args: argparse.Namespace, settings: Settings) -> int:
    field = _coefficient(args, settings)
    grid = TorusGrid(dimension=field.dimension, size=args.grid_size or settings.torus.grid_size)
    correctors = compute_correctors(field, grid, args.tol, settings=settings, threads=args.threads)
    path = _output_root(args, settings) / f"correctors-{field.family}-d{field.dimension}-N{grid.size}.shom"
    save_correctors(path, correctors)

    table = Table(title=f"Cell problem {field.family} d={field.dimension} N={grid.size}")
    table.add_column("check")
    table.add_column("value", justify="right")
    table.add_row("max corrector residual", f"{correctors.max_residual:.3e}")
    table.add_row("flux divergence residual", f"{flux_divergence_residual(correctors):.3e}")
    table.add_row("dual identity residual", f"{dual_identity_residual(correctors):.3e}")
    table.add_row("gmres iterations", str(int(np.sum(correctors.iterations))))
    console.print(table)
    console.print(f"[green]Wrote[/green] {path}")
    return EXIT_OK


def run_effective(args: argparse.Namespace, settings: Settings) -> int:
    field = _coefficient(args, settings)
    grid = TorusGrid(dimension=field.dimension, size=args.grid_size or settings.torus.grid_size)
    correctors = compute_correctors(field, grid, args.tol, settings=settings, threads=args.threads)
    console.print(_matrix_table(f"Effective tensor {field.family} d={field.dimension}", correctors.a_hat))
    root = _output_root(args, settings)
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"effective-{field.family}-d{field.dimension}.json"
    payload = {
        "family": field.family,
        "dimension": field.dimension,
        "grid_size": grid.size,
        "max_residual": correctors.max_residual,
        "a_hat": correctors.a_hat.tolist(),
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    console.print(f"[green]Wrote[/green] {path}")
    return EXIT_OK


def run_solve(args: argparse.Namespace, settings: Settings) -> int:
    field = _coefficient(args, settings)
    cells = args.cells or max(8, int(round(8 * args.length / args.eps)))
    domain = BoxDomain.cube(field.dimension, args.length, cells + cells % 2)
    problem = StokesProblem(
        domain=domain,
        field=field,
        eps=args.eps,
        force=smooth_force,
        boundary=tangential_boundary(args.length),
        label=f"solve-{field.family}",
    )
    if args.homogenized:
        grid = TorusGrid(dimension=field.dimension, size=args.grid_size or settings.torus.grid_size)
        correctors = compute_correctors(field, grid, settings=settings, threads=args.threads)
        solution = solve_homogenized(problem, correctors.a_hat, args.tol, settings=settings, method=args.method)
    else:
        solution = solve_stokes(problem, args.tol, settings=settings, method=args.method)

    name = "homogenized" if args.homogenized else f"eps{args.eps:g}"
    path = _output_root(args, settings) / f"solution-{field.family}-d{field.dimension}-{name}.shom"
    save_solution(path, solution, family=field.family, eps=args.eps, homogenized=bool(args.homogenized))
    if args.slice is not None:
        axis, index = args.slice
        slice_path = write_solution_slice(path.with_name(f"{path.stem}-axis{axis}-{index}.csv"), solution, axis, index)
        console.print(f"[green]Wrote[/green] {slice_path}")

    table = Table(title=f"Stokes solve cells={domain.cells}")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    table.add_row("momentum residual", f"{solution.residual:.3e}")
    table.add_row("divergence residual", f"{solution.divergence_residual:.3e}")
    table.add_row("||u||_L2", f"{solution.velocity_l2():.6e}")
    table.add_row("||u||_H1", f"{solution.h1_norm():.6e}")
    table.add_row("||p||_L2", f"{solution.pressure_l2():.6e}")
    console.print(table)
    console.print(f"[green]Wrote[/green] {path}")
    return EXIT_OK


def run_experiment_command(args: argparse.Namespace, settings: Settings) -> int:
    kind = _EXPERIMENT_COMMANDS[args.command]
    configs = _experiment_configs(args, kind)
    bundle = run_experiments(
        configs,
        settings=settings,
        threads=args.threads,
        seed=args.seed,
        progress=not args.quiet,
    )
    root = _output_root(args, settings) / bundle.run_id
    artifacts = emit_report(bundle, root, args.formats)
    console.print(summary_table(summarize(bundle)))
    console.print(f"[green]Wrote[/green] {len(artifacts)} files under {root}")
    return bundle.exit_code


def run_report(args: argparse.Namespace, settings: Settings) -> int:
    summary = load_summary(args.path)
    console.print(summary_table(summary))
    return summary.exit_code


def _slice_spec(value: str) -> tuple[int, int]:
    try:
        axis, index = (int(part) for part in value.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected AXIS:INDEX, got '{value}'") from exc
    return axis, index


def _add_coefficient_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", default="trig", help="Coefficient family (default: trig).")
    parser.add_argument("--params", help="Family parameters as a JSON object.")
    parser.add_argument("--family-file", type=Path, help="JSON family definition overriding --family/--params.")
    parser.add_argument("--dim", type=int, choices=[2, 3], default=2, help="Spatial dimension (default: 2).")
    parser.add_argument("--tol", type=float, help="Solver tolerance (default: from settings).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Homogenization experiments for periodic Stokes systems.")
    parser.add_argument("--config", type=Path, help="Experiment JSON (object, list, or {'experiments': [...]}).")
    parser.add_argument("--out", type=Path, help="Output directory (default: runtime.output_dir).")
    parser.add_argument("--threads", type=int, help="Worker threads (default: runtime.threads).")
    parser.add_argument("--seed", type=int, help="Seed recorded in the run bundle (default: runtime.seed).")
    sub = parser.add_subparsers(dest="command", required=True)

    cell = sub.add_parser("cell", help="Solve the cell problem and write the correctors snapshot.")
    _add_coefficient_flags(cell)
    cell.add_argument("--grid-size", type=int, help="Torus points per axis (power of two).")
    cell.set_defaults(func=run_cell)

    effective = sub.add_parser("effective", help="Print the effective tensor and write it as JSON.")
    _add_coefficient_flags(effective)
    effective.add_argument("--grid-size", type=int, help="Torus points per axis (power of two).")
    effective.set_defaults(func=run_effective)

    solve = sub.add_parser("solve", help="Solve one Dirichlet Stokes problem on a cube.")
    _add_coefficient_flags(solve)
    solve.add_argument("--eps", type=float, default=0.125, help="Oscillation scale (default: 0.125).")
    solve.add_argument("--length", type=float, default=1.0, help="Cube side length (default: 1).")
    solve.add_argument("--n", "--cells", dest="cells", type=int, help="Cells per axis (default: 8 per eps).")
    solve.add_argument("--grid-size", type=int, help="Torus points per axis for --homogenized.")
    solve.add_argument("--homogenized", action="store_true", help="Solve with the effective tensor instead.")
    solve.add_argument("--method", choices=["direct", "krylov"], help="Linear solver (default: by size).")
    solve.add_argument(
        "--slice",
        type=_slice_spec,
        metavar="AXIS:INDEX",
        help="Also write the cell layer INDEX along AXIS as CSV for plotting.",
    )
    solve.set_defaults(func=run_solve)

    helps = {
        "green": "Measure Green's function decay exponents.",
        "rates": "Measure homogenization convergence rates.",
        "expand": "Measure two-scale expansion errors of Green's functions.",
        "divlog": "Measure growth of the divergence-equation gradient bound.",
        "maxprinciple": "Compare velocity maxima with boundary data maxima.",
    }
    for command, text in helps.items():
        experiment = sub.add_parser(command, help=text)
        _add_coefficient_flags(experiment)
        experiment.add_argument("--eps", type=float, nargs="+", help="Dyadic eps values.")
        experiment.add_argument("--cells", type=int, help="Box cells per axis.")
        experiment.add_argument("--length", type=float, help="Box side length.")
        experiment.add_argument(
            "--formats",
            nargs="+",
            default=list(SUPPORTED_FORMATS),
            choices=list(SUPPORTED_FORMATS),
            help="Report formats to write (default: all).",
        )
        experiment.add_argument("--quiet", action="store_true", help="Disable progress bars.")
        experiment.set_defaults(func=run_experiment_command)

    report = sub.add_parser("report", help="Render a summary.json written by an earlier run.")
    report.add_argument("path", type=Path, help="summary.json or the run directory containing it.")
    report.set_defaults(func=run_report)
    return parser


def main(argv: list[str] | None = None) -> None:
    parser = build_parser()
    args = parser.parse_args(args=argv)
    settings = get_settings()
    _configure_logging(settings)
    if args.threads is None:
        args.threads = settings.runtime.threads
    try:
        code = args.func(args, settings)
    except (ShomError, ValidationError, ValueError) as exc:
        LOGGER.error("%s failed: %s", args.command, exc)
        console.print(f"[red]{type(exc).__name__}:[/red] {exc}")
        code = EXIT_SOLVER_ERROR
    sys.exit(code)


__all__ = [
    "build_parser",
    "main",
    "run_cell",
    "run_effective",
    "run_experiment_command",
    "run_report",
    "run_solve",
]
