"""Periodic cell problem: correctors, effective tensor, flux tensor and dual correctors."""

from shom.torus.cell import (
    CellOperator,
    compute_correctors,
    corrector_difference,
    effective_bounds,
    effective_tensor,
    flux_divergence_residual,
    flux_tensor,
    solve_cell_problem,
)
from shom.torus.dual import antisymmetry_defect, dual_correctors, dual_identity_residual, pressure_potential_residual
from shom.torus.grid import TorusGrid
from shom.torus.models import CorrectorSet

__all__ = [
    "CellOperator",
    "CorrectorSet",
    "TorusGrid",
    "antisymmetry_defect",
    "compute_correctors",
    "corrector_difference",
    "effective_bounds",
    "dual_correctors",
    "dual_identity_residual",
    "effective_tensor",
    "flux_divergence_residual",
    "flux_tensor",
    "pressure_potential_residual",
    "solve_cell_problem",
]
