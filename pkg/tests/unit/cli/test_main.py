"""Unit tests for the shom command line."""

from __future__ import annotations

import json

import numpy as np
import pytest

from shom.cli.main import EXIT_SOLVER_ERROR, _experiment_configs, build_parser, main
from shom.coeff.fields import identity_tensor
from shom.harness import ExperimentConfig, ExperimentKind, ExperimentReport, ReportBundle, Verdict, emit_report


def _exit_code(argv: list[str]) -> int:
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    return excinfo.value.code


def test_experiment_flags_build_sorted_configs() -> None:
    """--eps values are sorted descending before validation."""

    args = build_parser().parse_args(["rates", "--eps", "0.0625", "0.125", "0.25", "--cells", "128"])
    configs = _experiment_configs(args, ExperimentKind.RATES)

    assert configs[0].eps == [0.25, 0.125, 0.0625]
    assert configs[0].cells == 128
    assert configs[0].kind is ExperimentKind.RATES


def test_config_file_filters_by_kind(tmp_path) -> None:
    """Only experiments of the requested kind are taken from a config file."""

    config = tmp_path / "experiments.json"
    config.write_text(
        json.dumps(
            {
                "experiments": [
                    {"kind": "divergence-log", "name": "div", "eps": [0.25, 0.125, 0.0625]},
                    {"kind": "maxprinciple", "name": "max"},
                ]
            }
        ),
        encoding="utf-8",
    )
    args = build_parser().parse_args(["--config", str(config), "divlog"])
    configs = _experiment_configs(args, ExperimentKind.DIVERGENCE_LOG)

    assert [item.label for item in configs] == ["div"]


def test_config_file_without_matching_kind_is_rejected(tmp_path) -> None:
    """A config declaring none of the requested experiments raises ValueError."""

    config = tmp_path / "experiments.json"
    config.write_text(json.dumps([{"kind": "maxprinciple"}]), encoding="utf-8")
    args = build_parser().parse_args(["--config", str(config), "green"])

    with pytest.raises(ValueError):
        _experiment_configs(args, ExperimentKind.GREEN_DECAY)


def test_effective_command_writes_tensor(tmp_path, settings) -> None:
    """The effective command prints a_hat and writes it as JSON."""

    code = _exit_code(["--out", str(tmp_path), "effective", "--family", "constant", "--params", '{"scale": 2.0}'])

    assert code == 0
    payload = json.loads((tmp_path / "effective-constant-d2.json").read_text(encoding="utf-8"))
    np.testing.assert_allclose(payload["a_hat"], 2.0 * identity_tensor(2), atol=1e-12)


def test_solver_errors_exit_with_code_two(tmp_path, settings) -> None:
    """Non-elliptic coefficients end the command with exit code 2."""

    code = _exit_code(["--out", str(tmp_path), "cell", "--params", '{"rho": 1.5}'])

    assert code == EXIT_SOLVER_ERROR


def test_report_command_returns_recorded_exit_code(tmp_path, settings) -> None:
    """Rendering a summary exits with the code stored in it."""

    config = ExperimentConfig(kind="maxprinciple", name="max")
    report = ExperimentReport(label="max", kind=config.kind, config=config)
    report.verdicts.append(Verdict(name="max_principle_drift", status="fail", value=9.0, threshold=4.0))
    bundle = ReportBundle(
        run_id="run-cli", generated_at="2026-01-01T00:00:00+00:00", seed=0, schema_version="1", experiments=[report]
    )
    emit_report(bundle, tmp_path)

    assert _exit_code(["report", str(tmp_path)]) == 1


def test_experiment_command_writes_report_under_run_id(tmp_path, settings, mocker) -> None:
    """Experiment subcommands emit the bundle under <out>/<run_id> and return its exit code."""

    config = ExperimentConfig(kind="divergence-log", name="div")
    report = ExperimentReport(label="div", kind=config.kind, config=config)
    bundle = ReportBundle(
        run_id="run-mocked", generated_at="2026-01-01T00:00:00+00:00", seed=3, schema_version="1", experiments=[report]
    )
    runner = mocker.patch("shom.cli.main.run_experiments", return_value=bundle)

    code = _exit_code(["--out", str(tmp_path), "--seed", "3", "divlog", "--quiet", "--formats", "json"])

    assert code == 0
    assert (tmp_path / "run-mocked" / "summary.json").exists()
    assert runner.call_args.kwargs["seed"] == 3
    assert runner.call_args.kwargs["progress"] is False


def test_solve_accepts_n_as_cells_alias() -> None:
    """--n and --cells set the same cell count."""

    parser = build_parser()

    assert parser.parse_args(["solve", "--n", "16"]).cells == 16
    assert parser.parse_args(["solve", "--cells", "24"]).cells == 24


def test_slice_option_parses_axis_and_index() -> None:
    """--slice takes AXIS:INDEX and rejects anything else."""

    parser = build_parser()

    assert parser.parse_args(["solve", "--slice", "0:3"]).slice == (0, 3)
    with pytest.raises(SystemExit):
        parser.parse_args(["solve", "--slice", "middle"])


def test_solve_writes_csv_slice(tmp_path, settings) -> None:
    """solve --slice exports one CSV row per cell of the chosen layer."""

    argv = ["--out", str(tmp_path), "solve", "--family", "constant", "--params", '{"scale": 1.0}']
    code = _exit_code(argv + ["--eps", "0.25", "--n", "8", "--slice", "0:3"])

    assert code == 0
    lines = (tmp_path / "solution-constant-d2-eps0.25-axis0-3.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x0,x1,u0,u1,p"
    assert len(lines) == 1 + 8
    assert all(float(line.split(",")[0]) == pytest.approx(3.5 / 8) for line in lines[1:])
