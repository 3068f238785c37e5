"""Experiment orchestration: sweeps, rate fits, verdicts and reports."""

from shom.harness.fit import compare_growth_models, drift, fit_rate, halving_factors
from shom.harness.models import (
    ExperimentConfig,
    ExperimentKind,
    ExperimentReport,
    GrowthComparison,
    ProbeSpec,
    RateFit,
    ReportBundle,
    RunSummary,
    Table,
    Verdict,
)
from shom.harness.report import emit_report, load_summary, summarize, summary_table
from shom.harness.runner import ExperimentRunner, run_experiment, run_experiments
from shom.snapshot import Snapshot, read_snapshot, write_snapshot

__all__ = [
    "ExperimentConfig",
    "ExperimentKind",
    "ExperimentReport",
    "ExperimentRunner",
    "GrowthComparison",
    "ProbeSpec",
    "RateFit",
    "ReportBundle",
    "RunSummary",
    "Snapshot",
    "Table",
    "Verdict",
    "compare_growth_models",
    "drift",
    "emit_report",
    "fit_rate",
    "halving_factors",
    "load_summary",
    "read_snapshot",
    "run_experiment",
    "run_experiments",
    "summarize",
    "summary_table",
    "write_snapshot",
]
