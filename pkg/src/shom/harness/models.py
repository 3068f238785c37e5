"""Pydantic models describing experiments, fits and report bundles."""

from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

HOMOGENIZATION_KINDS = ("rates", "expansion")


class ExperimentKind(str, Enum):
    """Supported experiment kinds."""

    CELL = "cell"
    RATES = "rates"
    GREEN_DECAY = "green-decay"
    EXPANSION = "expansion"
    DIVERGENCE_LOG = "divergence-log"
    MAXPRINCIPLE = "maxprinciple"


class ProbeSpec(BaseModel):
    """Dyadic probes r_min, 2 r_min, ... <= r_max along ``direction`` from ``source`` (box center by default).

    With ``fundamental`` the expansion sweep also measures large-box fundamental solutions at the same offsets,
    on a cube of side ``fundamental_length`` (16 r_max by default) with ``fundamental_cells`` cells per axis.
    """

    r_min: float = Field(default=0.0625, gt=0)
    r_max: float = Field(default=0.25, gt=0)
    direction: List[float] | None = None
    source: List[float] | None = None
    second_derivatives: bool = False
    source_derivatives: bool = False
    fundamental: bool = False
    fundamental_length: float | None = Field(default=None, gt=0)
    fundamental_cells: int = Field(default=96, ge=8)

    @model_validator(mode="after")
    def _validate_range(self) -> "ProbeSpec":
        if self.r_min > self.r_max:
            raise ValueError("r_min must not exceed r_max")
        if self.fundamental_length is not None and self.fundamental_length < 16.0 * self.r_max * (1 - 1e-12):
            raise ValueError("fundamental_length must be at least 16 * r_max")
        return self

    def offsets(self, d: int) -> np.ndarray:
        """Dyadic displacements r_min, 2 r_min, ... <= r_max along the unit ``direction``."""

        axis = np.ones(d) if self.direction is None else np.asarray(self.direction, dtype=float)
        axis = axis / np.linalg.norm(axis)
        radii = []
        radius = self.r_min
        while radius <= self.r_max * (1 + 1e-12):
            radii.append(radius)
            radius *= 2.0
        return np.asarray(radii)[:, None] * axis

    def fundamental_side(self) -> float:
        return self.fundamental_length if self.fundamental_length is not None else 16.0 * self.r_max


class ExperimentConfig(BaseModel):
    """One declared sweep."""

    kind: ExperimentKind
    name: str | None = None
    family: str = "trig"
    params: Dict[str, Any] = Field(default_factory=dict)
    dimension: Literal[2, 3] = 2
    eps: List[float] = Field(default_factory=lambda: [0.125, 0.0625, 0.03125])
    length: float = Field(default=1.0, gt=0)
    cells: int | None = Field(default=None, ge=8)
    points_per_eps: int = Field(default=8, ge=1)
    probes: ProbeSpec | None = None
    tol: float | None = Field(default=None, gt=0)
    output_dir: Path | None = None
    seed: int | None = None

    @field_validator("eps", mode="after")
    @classmethod
    def _validate_eps(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("eps list must not be empty")
        if any(item <= 0 for item in value):
            raise ValueError("eps values must be positive")
        for larger, smaller in zip(value, value[1:]):
            if not larger > smaller:
                raise ValueError("eps list must be sorted in descending order")
            if not math.isclose(larger / smaller, 2.0, rel_tol=1e-9):
                raise ValueError("eps list must be dyadic (consecutive ratio 2)")
        return value

    @model_validator(mode="after")
    def _validate_resolution(self) -> "ExperimentConfig":
        if self.kind.value in HOMOGENIZATION_KINDS:
            h = self.length / self.resolved_cells()
            if h > min(self.eps) / 8.0 * (1 + 1e-12):
                raise ValueError(f"resolution h={h} must satisfy h <= eps_min / 8 = {min(self.eps) / 8.0}")
        return self

    def resolved_cells(self) -> int:
        """Box cells per axis: ``cells`` when given, else ``points_per_eps`` cells per smallest eps, made even."""

        if self.cells is not None:
            return self.cells
        count = math.ceil(self.points_per_eps * self.length / min(self.eps) - 1e-9)
        return max(8, count + count % 2)

    @property
    def label(self) -> str:
        return self.name or f"{self.kind.value}-{self.family}-d{self.dimension}"


class RateFit(BaseModel):
    """Ordinary least squares of log ordinates against log abscissae."""

    quantity: str = ""
    abscissae: List[float]
    ordinates: List[float]
    slope: float
    intercept: float
    r_squared: float
    stderr: float
    window: List[float]
    excluded: List[List[float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _validate_points(self) -> "RateFit":
        if len(self.abscissae) < 3 or len(self.abscissae) != len(self.ordinates):
            raise ValueError("a rate fit needs at least three matched points")
        return self


class GrowthComparison(BaseModel):
    """Least-squares residuals of the a + b log(1/eps) and c eps^(-eta) growth models."""

    eta: float
    log_coefficients: List[float]
    log_residual: float
    power_coefficient: float
    power_residual: float

    @property
    def preferred(self) -> str:
        return "log" if self.log_residual < self.power_residual else "power"


class Verdict(BaseModel):
    """Outcome of one acceptance check."""

    name: str
    status: Literal["pass", "fail", "degenerate", "error", "observed"]
    value: float | None = None
    threshold: float | None = None
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == "fail"


class Table(BaseModel):
    columns: List[str]
    rows: List[List[Any]] = Field(default_factory=list)

    def append(self, row: List[Any]) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} entries, table has {len(self.columns)} columns")
        self.rows.append(list(row))


class PointError(BaseModel):
    """A solver failure captured at one sweep point."""

    eps: float | None = None
    error_type: str
    message: str


class ExperimentReport(BaseModel):
    """Everything one experiment produced."""

    label: str
    kind: ExperimentKind
    config: ExperimentConfig
    tables: Dict[str, Table] = Field(default_factory=dict)
    fits: Dict[str, RateFit] = Field(default_factory=dict)
    comparisons: Dict[str, GrowthComparison] = Field(default_factory=dict)
    verdicts: List[Verdict] = Field(default_factory=list)
    constants: Dict[str, Any] = Field(default_factory=dict)
    errors: List[PointError] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)

    @property
    def status(self) -> str:
        if self.errors or any(verdict.status == "error" for verdict in self.verdicts):
            return "error"
        if any(verdict.failed for verdict in self.verdicts):
            return "fail"
        return "pass"


class ReportBundle(BaseModel):
    """A run: experiments plus provenance."""

    run_id: str
    generated_at: str
    seed: int
    schema_version: str
    experiments: List[ExperimentReport] = Field(default_factory=list)
    solver_stats: Dict[str, Dict[str, float]] = Field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        statuses = {experiment.status for experiment in self.experiments}
        if "error" in statuses:
            return 2
        if "fail" in statuses:
            return 1
        return 0


class ExperimentSummary(BaseModel):
    """JSON summary entry for one experiment; tables are referenced by file name."""

    label: str
    kind: str
    status: str
    config: Dict[str, Any]
    fits: Dict[str, RateFit] = Field(default_factory=dict)
    comparisons: Dict[str, GrowthComparison] = Field(default_factory=dict)
    verdicts: List[Verdict] = Field(default_factory=list)
    constants: Dict[str, Any] = Field(default_factory=dict)
    errors: List[PointError] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    tables: Dict[str, str] = Field(default_factory=dict)


class RunSummary(BaseModel):
    """Machine-readable run summary written as ``summary.json``."""

    run_id: str
    generated_at: str
    seed: int
    schema_version: str
    exit_code: int
    experiment_count: int
    experiments: List[ExperimentSummary] = Field(default_factory=list)
    solver_stats: Dict[str, Dict[str, float]] = Field(default_factory=dict)


__all__ = [
    "ExperimentConfig",
    "ExperimentKind",
    "ExperimentReport",
    "ExperimentSummary",
    "GrowthComparison",
    "PointError",
    "ProbeSpec",
    "RateFit",
    "ReportBundle",
    "RunSummary",
    "Table",
    "Verdict",
]
