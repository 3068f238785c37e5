"""Divergence equation with Dirichlet data and the truncated maximal function."""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from scipy import signal

from shom.errors import CompatibilityError, PreconditionError
from shom.settings import Settings, get_settings
from shom.stokes.grid import BoxDomain, staggered_grid
from shom.stokes.problem import StokesProblem, StokesSolution
from shom.stokes.solver import solve_stokes

LOGGER = logging.getLogger(__name__)

MEAN_REL_TOL = 1e-8


def _cell_values(psi: np.ndarray | Callable[[np.ndarray], np.ndarray], domain: BoxDomain) -> np.ndarray:
    if callable(psi):
        values = np.asarray(psi(domain.center_points()), dtype=float)
    else:
        values = np.asarray(psi, dtype=float)
    if values.size != int(np.prod(domain.cells)):
        raise ValueError(f"psi must have one value per cell ({np.prod(domain.cells)}), got {values.size}")
    return values.reshape(domain.cell_shape)


def solve_divergence(
    psi: np.ndarray | Callable[[np.ndarray], np.ndarray],
    domain: BoxDomain,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
) -> StokesSolution:
    """Velocity u of the Laplacian Stokes problem with div u = psi and u = 0 on the boundary.

    ``psi`` is either cell-center values or a callable on points.

    Raises:
        CompatibilityError: psi does not have zero mean.
    """

    values = _cell_values(psi, domain)
    volume = domain.spacing**domain.dimension
    defect = float(volume * np.sum(values))
    scale = max(float(volume * np.sum(np.abs(values))), np.finfo(float).tiny)
    if abs(defect) > MEAN_REL_TOL * scale:
        raise CompatibilityError(f"divergence datum has nonzero mean (integral {defect:.3e})", defect=defect)
    d = domain.dimension
    identity = np.einsum("ij,ab->ijab", np.eye(d), np.eye(d))
    grid = staggered_grid(domain)
    problem = StokesProblem(
        domain=domain,
        tensor=identity,
        divergence_cells=(values - values.mean()).reshape(grid.cell_count),
        label="divergence",
    )
    return solve_stokes(problem, tol, settings=settings or get_settings())


def divergence_mismatch(solution: StokesSolution, psi: np.ndarray) -> float:
    """max |div u - psi| over cells."""

    grid = solution.grid
    divergence = (grid.divergence @ solution.velocity).reshape(solution.domain.cell_shape)
    return float(np.max(np.abs(divergence - np.asarray(psi).reshape(divergence.shape))))


def gradient_sup(solution: StokesSolution) -> float:
    """||grad u||_inf over cell centers."""

    return float(np.max(np.abs(solution.gradient_at_centers())))


def ball_kernel(radius: float, h: float, d: int) -> np.ndarray:
    """Indicator of the cell offsets k with |k| h <= radius."""

    m = int(np.floor(radius / h + 1e-12))
    offsets = np.arange(-m, m + 1) * h
    mesh = np.meshgrid(*([offsets] * d), indexing="ij")
    distance = np.sqrt(sum(axis**2 for axis in mesh))
    return (distance <= radius * (1 + 1e-12)).astype(float)


def truncated_maximal(
    values: np.ndarray,
    t: float,
    domain: BoxDomain,
    *,
    region: np.ndarray | None = None,
) -> np.ndarray:
    """sup over s in {t, 2t, 4t, ...} of the mean of |values| over B(x, s) intersected with ``region``.

    ``values`` lives at the cell centers of ``domain``; ``region`` is a boolean
    cell mask (the whole box by default). Radii stop once a ball covers the
    box, after which the average no longer changes. Cells outside the region
    get NaN.

    Raises:
        PreconditionError: t is below the grid spacing.
    """

    h = domain.spacing
    if t < h * (1 - 1e-12):
        raise PreconditionError(f"truncation radius t={t} is below the grid spacing h={h}")
    field = np.abs(np.asarray(values, dtype=float)).reshape(domain.cell_shape)
    mask = np.ones(domain.cell_shape, dtype=bool) if region is None else np.asarray(region, dtype=bool)
    if mask.shape != domain.cell_shape:
        raise ValueError(f"region mask must have shape {domain.cell_shape}")
    weights = mask.astype(float)
    masked = field * weights
    diameter = float(np.linalg.norm(domain.lengths))
    best = np.zeros(domain.cell_shape)
    radius = t
    while True:
        kernel = ball_kernel(radius, h, domain.dimension)
        sums = signal.fftconvolve(masked, kernel, mode="same")
        counts = np.rint(signal.fftconvolve(weights, kernel, mode="same"))
        average = np.where(counts > 0, sums / np.maximum(counts, 1.0), 0.0)
        best = np.maximum(best, average)
        if radius >= diameter:
            break
        radius *= 2.0
    return np.where(mask, best, np.nan)


__all__ = [
    "ball_kernel",
    "divergence_mismatch",
    "gradient_sup",
    "solve_divergence",
    "truncated_maximal",
]
