"""Dirichlet correctors and the two corrector instantiations used by the expansions.

Both :class:`DirichletCorrectorSet` (V, T) = (Phi, Lambda) and
:class:`PeriodicCorrectorView` (V, T) = (P + eps chi(x/eps), pi(x/eps)) expose
the same sampling methods at cell centers or scattered points:

* ``deviation_at``  V_j^{gamma beta} - P_j^{gamma beta}, layout [j, beta, gamma, P]
* ``gradient_at``   d_i V_j^{gamma beta},                 layout [j, beta, gamma, i, P]
* ``pressure_at``   T_j^beta,                              layout [j, beta, P]
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Any

import numpy as np

from shom.coeff.fields import CoefficientField
from shom.errors import PreconditionError
from shom.observability import get_observability
from shom.settings import Settings, get_settings
from shom.stokes.grid import BoxDomain, StaggeredGrid, staggered_grid
from shom.stokes.problem import StokesProblem
from shom.stokes.solver import solve_stokes
from shom.torus.cell import compute_correctors
from shom.torus.grid import TorusGrid
from shom.torus.models import CorrectorSet

LOGGER = logging.getLogger(__name__)


def linear_field(j: int, beta: int):
    """P_j^beta(x) = x_j e^beta as a vector-valued callable."""

    def evaluate(points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        values = np.zeros_like(pts)
        values[..., beta] = pts[..., j]
        return values

    return evaluate


def linear_vector(grid: StaggeredGrid, j: int, beta: int) -> np.ndarray:
    """P_j^beta sampled on the full extended velocity vector."""

    return np.where(grid.component_of == beta, grid.positions[:, j], 0.0)


def check_resolution(domain: BoxDomain, eps: float, points_per_eps: int) -> None:
    if eps < points_per_eps * domain.spacing * (1 - 1e-12):
        raise PreconditionError(
            f"eps={eps} is under-resolved: need eps >= {points_per_eps} h with h={domain.spacing}"
        )


def _cell_index(domain: BoxDomain, points: np.ndarray) -> tuple[np.ndarray, ...]:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return tuple(np.array([domain.locate_cell(point) for point in pts], dtype=int).T)


@dataclass(frozen=True, eq=False)
class DirichletCorrectorSet:
    """Phi_{eps, j}^beta and Lambda_{eps, j}^beta on one box.

    ``velocity[j, beta]`` is the extended face vector of Phi_j^beta and
    ``pressure[j, beta]`` the cell-center values of Lambda_j^beta, anchored so
    that Lambda_j^beta(x0) = pi_j^beta(x0 / eps).
    """

    domain: BoxDomain
    eps: float
    velocity: np.ndarray
    pressure: np.ndarray
    anchor: np.ndarray
    anchor_distance: float
    cell: CorrectorSet
    adjoint: bool = False
    residuals: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    family: str = "custom"

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def grid(self) -> StaggeredGrid:
        return staggered_grid(self.domain)

    def deviation_vector(self, j: int, beta: int) -> np.ndarray:
        return self.velocity[j, beta] - linear_vector(self.grid, j, beta)

    def deviation_at_centers(self) -> np.ndarray:
        """Phi - P averaged to cell centers, layout [j, beta, gamma, *cells]."""

        d = self.dimension
        grid = self.grid
        out = np.zeros((d, d, d) + self.domain.cell_shape)
        for j, beta in product(range(d), range(d)):
            out[j, beta] = grid.velocity_at_centers(self.deviation_vector(j, beta))
        return out

    def gradient_at_centers(self) -> np.ndarray:
        """d_i Phi_j^{gamma beta} at cell centers, layout [j, beta, gamma, i, *cells]."""

        d = self.dimension
        grid = self.grid
        out = np.zeros((d, d, d, d) + self.domain.cell_shape)
        for j, beta in product(range(d), range(d)):
            out[j, beta] = grid.gradient_at_centers(self.velocity[j, beta])
        return out

    def deviation_at(self, points: np.ndarray) -> np.ndarray:
        return self.deviation_at_centers()[(Ellipsis,) + _cell_index(self.domain, points)]

    def gradient_at(self, points: np.ndarray) -> np.ndarray:
        return self.gradient_at_centers()[(Ellipsis,) + _cell_index(self.domain, points)]

    def pressure_at(self, points: np.ndarray) -> np.ndarray:
        return self.pressure[(Ellipsis,) + _cell_index(self.domain, points)]

    def sup_deviation(self) -> float:
        """max |Phi - P| over every velocity node."""

        d = self.dimension
        return max(float(np.max(np.abs(self.deviation_vector(j, beta)))) for j, beta in product(range(d), range(d)))

    def lipschitz_constant(self) -> float:
        """sup |Phi - P| / eps."""

        return self.sup_deviation() / self.eps

    def pressure_deviation(self, points: np.ndarray) -> np.ndarray:
        """max over (j, beta) of |Lambda_j^beta(x) - pi_j^beta(x / eps)| at each point."""

        pts = np.atleast_2d(np.asarray(points, dtype=float))
        periodic = self.cell.pi_at(pts / self.eps)
        difference = self.pressure_at(pts) - periodic
        return np.max(np.abs(difference.reshape(-1, len(pts))), axis=0)

    def interior_pressure_constant(self, points: np.ndarray) -> float:
        """max of |Lambda(x) - pi(x / eps)| / min(1, eps / delta(x)) over ``points``."""

        pts = np.atleast_2d(np.asarray(points, dtype=float))
        delta = self.domain.distance_to_boundary(pts)
        envelope = np.minimum(1.0, self.eps / delta)
        return float(np.max(self.pressure_deviation(pts) / envelope))

    def describe(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "family": self.family,
            "adjoint": self.adjoint,
            "anchor": self.anchor.tolist(),
            "anchor_distance": self.anchor_distance,
            "lipschitz_constant": self.lipschitz_constant(),
            "max_residual": float(np.max(self.residuals)) if self.residuals.size else 0.0,
            "interpolation": "trigonometric",
        }


@dataclass(frozen=True, eq=False)
class PeriodicCorrectorView:
    """(V, T) = (P + eps chi(x / eps), pi(x / eps)) sampled on a box."""

    cell: CorrectorSet
    eps: float

    @property
    def dimension(self) -> int:
        return self.cell.dimension

    def deviation_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.eps * self.cell.chi_at(pts / self.eps)

    def gradient_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.dimension
        linear = np.einsum("ji,bg->jbgi", np.eye(d), np.eye(d))
        return linear[..., None] + self.cell.chi_gradient_at(pts / self.eps)

    def pressure_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.cell.pi_at(pts / self.eps)


def periodic_correctors(coefficient: CoefficientField, settings: Settings) -> CorrectorSet:
    grid = TorusGrid(dimension=coefficient.dimension, size=settings.torus.grid_size)
    return compute_correctors(coefficient, grid, settings=settings)


def solve_dirichlet_correctors(
    coefficient: CoefficientField,
    eps: float,
    domain: BoxDomain,
    tol: float | None = None,
    *,
    cell: CorrectorSet | None = None,
    adjoint: bool = False,
    settings: Settings | None = None,
    threads: int | None = None,
) -> DirichletCorrectorSet:
    """Solve L_eps(Phi_j^beta) + grad Lambda_j^beta = 0, div Phi_j^beta = div P_j^beta, Phi = P on the boundary.

    ``cell`` supplies pi for the pressure anchor; it is computed from
    ``coefficient`` (or its adjoint) when omitted. With ``adjoint`` the
    transposed tensor a*_ij^{ab} = a_ji^{ba} is used throughout.

    Raises:
        PreconditionError: eps is under-resolved or the anchor is too close to the boundary.
        ConvergenceError: a Stokes solve does not converge.
    """

    resolved = settings or get_settings()
    if coefficient.dimension != domain.dimension:
        raise PreconditionError("coefficient and domain dimensions differ")
    check_resolution(domain, eps, resolved.box.points_per_eps)
    field_used = coefficient.adjoint() if adjoint else coefficient
    if cell is None:
        cell = periodic_correctors(field_used, resolved)

    anchor_cell = domain.locate_cell(domain.center)
    anchor = (np.asarray(anchor_cell, dtype=float) + 0.5) * domain.spacing
    anchor_distance = float(domain.distance_to_boundary(anchor[None, :])[0])
    if anchor_distance < resolved.box.interior_margin_cells * domain.spacing:
        raise PreconditionError(f"anchor {anchor.tolist()} is too close to the boundary")
    pi_anchor = cell.pi_at((anchor / eps)[None, :])[..., 0]

    d = domain.dimension
    grid = staggered_grid(domain)
    obs = get_observability(component="expand", settings=resolved)

    def solve_pair(pair: tuple[int, int]):
        j, beta = pair
        problem = StokesProblem(
            domain=domain,
            field=field_used,
            eps=eps,
            boundary=linear_field(j, beta),
            divergence_cells=np.full(grid.cell_count, 1.0 if j == beta else 0.0),
            label=f"dirichlet-corrector[{j},{beta}]",
        )
        return pair, solve_stokes(problem, tol, settings=resolved)

    velocity = np.zeros((d, d, grid.size))
    pressure = np.zeros((d, d) + domain.cell_shape)
    residuals = np.zeros((d, d))
    with obs.timed("dirichlet_correctors", tags={"d": str(d), "adjoint": str(adjoint)}):
        with ThreadPoolExecutor(max_workers=threads or resolved.runtime.threads) as pool:
            for (j, beta), solution in pool.map(solve_pair, list(product(range(d), range(d)))):
                velocity[j, beta] = solution.velocity
                shift = pi_anchor[j, beta] - solution.pressure[anchor_cell]
                pressure[j, beta] = solution.pressure + shift
                residuals[j, beta] = solution.residual

    correctors = DirichletCorrectorSet(
        domain=domain,
        eps=float(eps),
        velocity=velocity,
        pressure=pressure,
        anchor=anchor,
        anchor_distance=anchor_distance,
        cell=cell,
        adjoint=adjoint,
        residuals=residuals,
        family=field_used.family,
    )
    LOGGER.info(
        "Dirichlet correctors family=%s eps=%s N=%s sup|Phi-P|/eps=%.4f",
        field_used.family,
        eps,
        domain.cells[0],
        correctors.lipschitz_constant(),
    )
    return correctors


__all__ = [
    "DirichletCorrectorSet",
    "PeriodicCorrectorView",
    "check_resolution",
    "linear_field",
    "linear_vector",
    "periodic_correctors",
    "solve_dirichlet_correctors",
]
