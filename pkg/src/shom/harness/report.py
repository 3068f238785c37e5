"""Write run bundles to disk: CSV tables, gnuplot data and a JSON summary.

Layout of a run directory::

    <out>/summary.json
    <out>/<experiment label>/<table>.csv
    <out>/<experiment label>/<table>.dat
"""

from __future__ import annotations

import csv
import json
import logging
import re
from pathlib import Path
from typing import Iterable

from rich.table import Table as RichTable

from shom.harness.models import ExperimentReport, ExperimentSummary, ReportBundle, RunSummary, Table
from shom.observability import to_builtin

LOGGER = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
SUPPORTED_FORMATS = ("csv", "json", "dat")


def _slug(value: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", value).strip("_") or "experiment"


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, table: Table) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(value) for value in row])
    return path


def write_plot_data(path: Path, table: Table) -> Path:
    """Whitespace-separated columns with a commented header, one row per line."""

    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# " + " ".join(table.columns)]
    for row in table.rows:
        lines.append(" ".join(_cell(value) if not isinstance(value, str) else f'"{value}"' for value in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path: Path) -> Table:
    """Load a table written by :func:`write_csv`; numeric cells come back as floats."""

    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        columns = next(reader)
        rows = []
        for raw in reader:
            row = []
            for value in raw:
                try:
                    row.append(float(value))
                except ValueError:
                    row.append(value)
            rows.append(row)
    return Table(columns=columns, rows=rows)


def summarize(bundle: ReportBundle, table_files: dict[str, dict[str, str]] | None = None) -> RunSummary:
    files = table_files or {}
    experiments = [
        ExperimentSummary(
            label=report.label,
            kind=report.kind.value,
            status=report.status,
            config=report.config.model_dump(mode="json"),
            fits=report.fits,
            comparisons=report.comparisons,
            verdicts=report.verdicts,
            constants=to_builtin(report.constants),
            errors=report.errors,
            warnings=report.warnings,
            tables=files.get(report.label, {}),
        )
        for report in bundle.experiments
    ]
    return RunSummary(
        run_id=bundle.run_id,
        generated_at=bundle.generated_at,
        seed=bundle.seed,
        schema_version=bundle.schema_version,
        exit_code=bundle.exit_code,
        experiment_count=len(experiments),
        experiments=experiments,
        solver_stats=bundle.solver_stats,
    )


def _experiment_tables(report: ExperimentReport, root: Path, formats: Iterable[str]) -> dict[str, str]:
    directory = root / _slug(report.label)
    written: dict[str, str] = {}
    for name, table in sorted(report.tables.items()):
        if "csv" in formats:
            path = write_csv(directory / f"{_slug(name)}.csv", table)
            written[name] = str(path.relative_to(root))
        if "dat" in formats:
            write_plot_data(directory / f"{_slug(name)}.dat", table)
    return written


def emit_report(bundle: ReportBundle, out_dir: Path, formats: Iterable[str] = SUPPORTED_FORMATS) -> dict[str, Path]:
    """Write the bundle under ``out_dir`` and return the written summary and table paths.

    I/O errors propagate unchanged.
    """

    requested = [fmt.lower().strip() for fmt in formats if fmt and fmt.strip()]
    unknown = sorted(set(requested) - set(SUPPORTED_FORMATS))
    if unknown:
        raise ValueError(f"unsupported report formats: {', '.join(unknown)}")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    files = {report.label: _experiment_tables(report, root, requested) for report in bundle.experiments}
    artifacts: dict[str, Path] = {
        f"{label}/{name}": root / relative for label, tables in files.items() for name, relative in tables.items()
    }
    if "json" in requested:
        summary = summarize(bundle, files)
        path = root / SUMMARY_FILE
        path.write_text(json.dumps(summary.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        artifacts["summary"] = path
    LOGGER.info("Wrote report %s to %s (%d files)", bundle.run_id, root, len(artifacts))
    return artifacts


def load_summary(path: Path) -> RunSummary:
    """Read ``summary.json`` from a file or a run directory."""

    target = Path(path)
    if target.is_dir():
        target = target / SUMMARY_FILE
    return RunSummary.model_validate_json(target.read_text(encoding="utf-8"))


def summary_table(summary: RunSummary) -> RichTable:
    """Rich table of verdicts per experiment for console rendering."""

    table = RichTable(title=f"{summary.run_id} (exit {summary.exit_code})")
    table.add_column("experiment")
    table.add_column("check")
    table.add_column("status")
    table.add_column("value", justify="right")
    table.add_column("threshold", justify="right")
    styles = {"pass": "green", "fail": "red", "error": "red", "degenerate": "yellow", "observed": "cyan"}
    for experiment in summary.experiments:
        if not experiment.verdicts:
            table.add_row(experiment.label, "-", experiment.status, "", "")
        for verdict in experiment.verdicts:
            style = styles.get(verdict.status, "white")
            table.add_row(
                experiment.label,
                verdict.name,
                f"[{style}]{verdict.status}[/{style}]",
                "" if verdict.value is None else f"{verdict.value:.4g}",
                "" if verdict.threshold is None else f"{verdict.threshold:.4g}",
            )
        for error in experiment.errors:
            table.add_row(experiment.label, f"eps={error.eps}", "[red]error[/red]", error.error_type, "")
    return table


__all__ = [
    "SUMMARY_FILE",
    "SUPPORTED_FORMATS",
    "emit_report",
    "load_summary",
    "read_csv",
    "summarize",
    "summary_table",
    "write_csv",
    "write_plot_data",
]
