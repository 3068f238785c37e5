"""Dirichlet Stokes problems on boxes: MAC discretization, solvers and estimate checks."""

from shom.stokes.checks import (
    LocalEstimate,
    caccioppoli_check,
    data_norms,
    energy_constant,
    lipschitz_oscillation_check,
    manufactured_errors,
    manufactured_pressure,
    manufactured_velocity,
    maximum_principle_ratio,
)
from shom.stokes.grid import BoxDomain, StaggeredGrid, staggered_grid
from shom.stokes.problem import StokesProblem, StokesSolution
from shom.stokes.solver import assemble_system, check_compatibility, solve_homogenized, solve_stokes

__all__ = [
    "BoxDomain",
    "LocalEstimate",
    "StaggeredGrid",
    "StokesProblem",
    "StokesSolution",
    "assemble_system",
    "caccioppoli_check",
    "check_compatibility",
    "data_norms",
    "energy_constant",
    "lipschitz_oscillation_check",
    "manufactured_errors",
    "manufactured_pressure",
    "manufactured_velocity",
    "maximum_principle_ratio",
    "solve_homogenized",
    "solve_stokes",
    "staggered_grid",
]
