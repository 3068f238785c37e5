"""Dirichlet correctors, two-scale expansions and the divergence equation."""

from shom.expand.dirichlet import (
    DirichletCorrectorSet,
    PeriodicCorrectorView,
    check_resolution,
    linear_field,
    linear_vector,
    periodic_correctors,
    solve_dirichlet_correctors,
)
from shom.expand.divergence import divergence_mismatch, gradient_sup, solve_divergence, truncated_maximal
from shom.expand.fields import ExpansionFields, build_expansion, linf_rate, solution_errors
from shom.expand.green_errors import (
    ERROR_TABLE_COLUMNS,
    ExpansionErrorRow,
    admissible_probes,
    envelope,
    fit_window,
    fundamental_expansion_errors,
    green_expansion_errors,
    second_derivative_expansion_errors,
    table_rows,
)
from shom.expand.mollify import bump_kernel, mollify

__all__ = [
    "ERROR_TABLE_COLUMNS",
    "DirichletCorrectorSet",
    "ExpansionErrorRow",
    "ExpansionFields",
    "PeriodicCorrectorView",
    "admissible_probes",
    "build_expansion",
    "bump_kernel",
    "check_resolution",
    "divergence_mismatch",
    "envelope",
    "fit_window",
    "fundamental_expansion_errors",
    "gradient_sup",
    "green_expansion_errors",
    "linear_field",
    "linear_vector",
    "linf_rate",
    "mollify",
    "periodic_correctors",
    "second_derivative_expansion_errors",
    "solution_errors",
    "solve_dirichlet_correctors",
    "table_rows",
    "truncated_maximal",
]
