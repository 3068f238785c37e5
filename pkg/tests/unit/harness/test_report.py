"""Unit tests for report emission, summaries and snapshot persistence of results."""

from __future__ import annotations

import json

import numpy as np
import pytest

from shom.coeff import identity_tensor, make_coefficient
from shom.harness import (
    ExperimentConfig,
    ExperimentReport,
    ReportBundle,
    Table,
    Verdict,
    emit_report,
    load_summary,
    run_experiment,
    summary_table,
)
from shom.harness.persistence import load_correctors, load_solution, save_correctors, save_solution
from shom.harness.report import read_csv
from shom.harness.runner import run_experiments, smooth_force
from shom.snapshot import SnapshotFormatError
from shom.stokes import BoxDomain, StokesProblem, solve_stokes
from shom.torus import TorusGrid, compute_correctors


def _bundle() -> ReportBundle:
    config = ExperimentConfig(kind="rates", name="rates-trig", eps=[0.25, 0.125, 0.0625], cells=128)
    report = ExperimentReport(label=config.label, kind=config.kind, config=config)
    table = Table(columns=["eps", "l2_err", "h1_err", "pressure_err"])
    for eps in config.eps:
        table.append([eps, eps, eps**0.5, eps])
    report.tables["rates"] = table
    report.verdicts.append(Verdict(name="l2_rate", status="pass", value=1.0, threshold=0.9))
    report.constants["a_hat_trace"] = 2.5
    return ReportBundle(
        run_id="run-abc",
        generated_at="2026-01-01T00:00:00+00:00",
        seed=7,
        schema_version="1",
        experiments=[report],
    )


def test_emit_report_writes_tables_and_summary(tmp_path) -> None:
    """CSV and plot files land under the experiment slug; summary.json references them."""

    artifacts = emit_report(_bundle(), tmp_path)

    csv_path = tmp_path / "rates-trig" / "rates.csv"
    assert artifacts["rates-trig/rates"] == csv_path
    assert csv_path.read_text(encoding="utf-8").splitlines()[0] == "eps,l2_err,h1_err,pressure_err"
    assert (tmp_path / "rates-trig" / "rates.dat").read_text(encoding="utf-8").startswith("# eps l2_err")
    payload = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert payload["experiments"][0]["tables"] == {"rates": "rates-trig/rates.csv"}
    assert payload["experiments"][0]["constants"]["a_hat_trace"] == 2.5


def test_summary_round_trip(tmp_path) -> None:
    """load_summary accepts the run directory and restores verdicts."""

    emit_report(_bundle(), tmp_path)
    summary = load_summary(tmp_path)

    assert summary.run_id == "run-abc"
    assert summary.exit_code == 0
    assert summary.experiments[0].verdicts[0].name == "l2_rate"
    assert summary_table(summary).row_count == 1
    table = read_csv(tmp_path / "rates-trig" / "rates.csv")
    assert table.rows[-1][0] == pytest.approx(0.0625)


def test_unknown_report_format_is_rejected(tmp_path) -> None:
    """Formats other than csv, json and dat raise ValueError."""

    with pytest.raises(ValueError):
        emit_report(_bundle(), tmp_path, formats=["xlsx"])


def test_empty_bundle_exits_cleanly(tmp_path) -> None:
    """A bundle with no experiments writes a summary with exit code 0."""

    bundle = _bundle().model_copy(update={"experiments": []})
    emit_report(bundle, tmp_path)

    assert load_summary(tmp_path / "summary.json").experiment_count == 0


def test_correctors_persist_through_snapshots(tmp_path, settings) -> None:
    """Saved cell correctors load back with identical arrays."""

    field = make_coefficient("trig", {"rho": 0.3}, 2, settings=settings)
    correctors = compute_correctors(field, TorusGrid(dimension=2, size=8), 1e-10, settings=settings)
    path = save_correctors(tmp_path / "cell.shom", correctors)
    loaded = load_correctors(path)

    np.testing.assert_array_equal(loaded.chi, correctors.chi)
    np.testing.assert_array_equal(loaded.a_hat, correctors.a_hat)
    np.testing.assert_array_equal(loaded.q, correctors.q)
    assert loaded.family == "trig"
    assert loaded.grid.size == 8


def test_solution_persists_and_kinds_are_checked(tmp_path, settings) -> None:
    """Saved Stokes solutions load back; loading them as correctors is refused."""

    problem = StokesProblem(domain=BoxDomain.cube(2, 1.0, 8), tensor=identity_tensor(2), force=smooth_force)
    solution = solve_stokes(problem, settings=settings)
    path = save_solution(tmp_path / "solution.shom", solution, label="smooth")
    loaded = load_solution(path)

    np.testing.assert_array_equal(loaded.velocity, solution.velocity)
    np.testing.assert_array_equal(loaded.pressure, solution.pressure)
    assert loaded.domain == solution.domain
    with pytest.raises(SnapshotFormatError):
        load_correctors(path)


@pytest.mark.integration
def test_cell_experiment_reports_effective_tensor(settings) -> None:
    """The cell experiment tabulates every entry of the effective tensor."""

    bundle = run_experiment(ExperimentConfig(kind="cell", params={"rho": 0.3}), settings=settings, threads=1)
    report = bundle.experiments[0]

    assert not report.errors
    assert len(report.tables["effective"].rows) == 16
    verdicts = {verdict.name: verdict for verdict in report.verdicts}
    assert set(verdicts) == {"cell_residual", "dual_identity", "effective_window", "cell_self_convergence"}
    assert verdicts["effective_window"].status == "pass"
    assert verdicts["cell_self_convergence"].status == "degenerate"


def test_invalid_coefficient_is_reported_as_error(settings) -> None:
    """A non-elliptic family is captured in the report and the run exits 2."""

    bundle = run_experiment(ExperimentConfig(kind="cell", params={"rho": 1.5}), settings=settings, threads=1)

    assert bundle.exit_code == 2
    assert bundle.experiments[0].errors[0].error_type == "EllipticityViolationError"


@pytest.mark.integration
def test_identity_green_decay_compares_against_stokeslet(settings) -> None:
    """An identity-tensor column is checked against the whole-space stokeslet at every probe."""

    config = ExperimentConfig(kind="green-decay", family="constant", params={"scale": 1.0}, eps=[0.25], cells=32)

    report = run_experiment(config, settings=settings, threads=1).experiments[0]

    assert not report.errors
    assert report.tables["stokeslet"].rows
    names = {verdict.name for verdict in report.verdicts}
    assert {"stokeslet_velocity", "stokeslet_pressure", "symmetry"} <= names


def test_run_leaves_global_random_state_untouched(settings) -> None:
    """The run seed is recorded in the bundle without reseeding numpy's global generator."""

    np.random.seed(11)
    before = np.random.get_state()[1].copy()

    bundle = run_experiments([], settings=settings, seed=5)

    np.testing.assert_array_equal(np.random.get_state()[1], before)
    assert bundle.seed == 5
