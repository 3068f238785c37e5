"""Unit tests for experiment configuration validation and bundle exit codes."""

from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from shom.harness import ExperimentConfig, ExperimentKind, ExperimentReport, ProbeSpec, ReportBundle, Verdict
from shom.harness.models import PointError


def _bundle(*reports: ExperimentReport) -> ReportBundle:
    return ReportBundle(
        run_id="run-test",
        generated_at="2026-01-01T00:00:00+00:00",
        seed=0,
        schema_version="1",
        experiments=list(reports),
    )


def _report(**updates) -> ExperimentReport:
    config = ExperimentConfig(kind="cell")
    return ExperimentReport(label=config.label, kind=config.kind, config=config, **updates)


def test_eps_must_be_descending_and_dyadic() -> None:
    """eps lists halve at each step."""

    with pytest.raises(ValidationError):
        ExperimentConfig(kind="cell", eps=[0.0625, 0.125])
    with pytest.raises(ValidationError):
        ExperimentConfig(kind="cell", eps=[0.125, 0.1])
    with pytest.raises(ValidationError):
        ExperimentConfig(kind="cell", eps=[])


def test_homogenization_kinds_require_resolution() -> None:
    """Rates and expansion sweeps need h <= eps_min / 8."""

    with pytest.raises(ValidationError):
        ExperimentConfig(kind="rates", eps=[0.25, 0.125], cells=32)

    config = ExperimentConfig(kind="rates", eps=[0.25, 0.125], cells=64)
    assert config.resolved_cells() == 64


def test_cells_default_from_points_per_eps() -> None:
    """Without explicit cells the box resolves eps_min with points_per_eps cells."""

    config = ExperimentConfig(kind="expansion", eps=[0.25, 0.125], points_per_eps=8)

    assert config.resolved_cells() == 64
    assert config.label == "expansion-trig-d2"


def test_probe_range_must_be_ordered() -> None:
    """r_min may not exceed r_max."""

    with pytest.raises(ValidationError):
        ProbeSpec(r_min=0.5, r_max=0.25)


def test_sample_offsets_are_dyadic_along_direction() -> None:
    """Offsets double from r_min up to r_max along the normalized direction."""

    sampling = ProbeSpec(r_min=0.125, r_max=0.5, direction=[0.0, 2.0])

    np.testing.assert_allclose(sampling.offsets(2), [[0.0, 0.125], [0.0, 0.25], [0.0, 0.5]])
    assert sampling.fundamental_side() == pytest.approx(8.0)


def test_fundamental_box_must_cover_sixteen_probe_radii() -> None:
    """A fundamental box shorter than 16 r_max is rejected."""

    with pytest.raises(ValidationError):
        ProbeSpec(r_max=0.25, fundamental=True, fundamental_length=3.0)
    assert ProbeSpec(r_max=0.25, fundamental=True, fundamental_length=4.0).fundamental_side() == 4.0


def test_unknown_kind_is_rejected() -> None:
    """Only the declared experiment kinds are accepted."""

    with pytest.raises(ValidationError):
        ExperimentConfig(kind="turbulence")
    assert ExperimentKind("divergence-log") is ExperimentKind.DIVERGENCE_LOG


def test_exit_codes_follow_worst_status() -> None:
    """Empty and passing runs exit 0, failed verdicts 1, solver errors 2."""

    passing = _report(verdicts=[Verdict(name="ok", status="pass")])
    failing = _report(verdicts=[Verdict(name="slope", status="fail", value=0.5, threshold=0.9)])
    erroring = _report(errors=[PointError(eps=0.1, error_type="ConvergenceError", message="stalled")])

    assert _bundle().exit_code == 0
    assert _bundle(passing).exit_code == 0
    assert _bundle(passing, failing).exit_code == 1
    assert _bundle(failing, erroring).exit_code == 2
    assert erroring.status == "error"


def test_degenerate_verdicts_do_not_fail() -> None:
    """Degenerate and observed verdicts leave the experiment passing."""

    report = _report(
        verdicts=[Verdict(name="rate", status="degenerate"), Verdict(name="drift", status="observed", value=1.2)]
    )

    assert report.status == "pass"
