"""Discrete counterparts of the energy, Caccioppoli, Lipschitz and maximum-principle estimates.

Also a manufactured identity-tensor solution on the unit square for measuring the solver order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from shom.errors import PreconditionError
from shom.settings import Settings
from shom.stokes.grid import BoxDomain, StaggeredGrid, staggered_grid
from shom.stokes.problem import StokesProblem, StokesSolution
from shom.stokes.solver import solve_stokes


@dataclass(frozen=True)
class LocalEstimate:
    """Both sides of a local estimate measured on D_R(x0)."""

    gradient_max: float
    pressure_oscillation: float
    data_bound: float
    radius: float
    cells: int

    @property
    def ratio(self) -> float:
        lhs = self.gradient_max + self.pressure_oscillation
        if self.data_bound == 0:
            return 0.0 if lhs == 0 else float("inf")
        return lhs / self.data_bound


def _force_at_centers(problem: StokesProblem, grid: StaggeredGrid) -> np.ndarray:
    d = grid.dimension
    if problem.force_faces is not None:
        full = np.zeros(grid.size)
        full[grid.interior] = np.asarray(problem.force_faces, dtype=float).ravel()
        return grid.velocity_at_centers(full).reshape(d, -1).T
    if problem.force is None:
        return np.zeros((grid.cell_count, d))
    return np.asarray(problem.force(grid.center_points), dtype=float).reshape(grid.cell_count, d)


def _flux_at_centers(problem: StokesProblem, grid: StaggeredGrid) -> np.ndarray:
    d = grid.dimension
    if problem.flux is None:
        return np.zeros((grid.cell_count, d, d))
    return np.asarray(problem.flux(grid.center_points), dtype=float).reshape(grid.cell_count, d, d)


def _divergence_at_centers(problem: StokesProblem, grid: StaggeredGrid) -> np.ndarray:
    if problem.divergence_cells is not None:
        return np.asarray(problem.divergence_cells, dtype=float).ravel()
    if problem.divergence is None:
        return np.zeros(grid.cell_count)
    return np.asarray(problem.divergence(grid.center_points), dtype=float).reshape(grid.cell_count)


def _boundary_points(problem: StokesProblem, grid: StaggeredGrid) -> tuple[np.ndarray, np.ndarray]:
    points = grid.positions[grid.boundary]
    if problem.boundary is None:
        return points, np.zeros(len(points))
    return points, np.abs(grid.sample_vector(problem.boundary, grid.boundary))


def data_norms(problem: StokesProblem) -> dict[str, float]:
    """L2 norms of F, h, g over the box and of f over its boundary."""

    grid = staggered_grid(problem.domain)
    volume = grid.cell_volume
    _, boundary = _boundary_points(problem, grid)
    return {
        "force": float(np.sqrt(volume * np.sum(_force_at_centers(problem, grid) ** 2))),
        "flux": float(np.sqrt(volume * np.sum(_flux_at_centers(problem, grid) ** 2))),
        "divergence": float(np.sqrt(volume * np.sum(_divergence_at_centers(problem, grid) ** 2))),
        "boundary": float(np.sqrt(grid.spacing ** (grid.dimension - 1) * np.sum(boundary**2))),
    }


def energy_constant(problem: StokesProblem, solution: StokesSolution) -> float:
    """Ratio (||u||_{H1} + ||p||_{L2}) / (||F|| + ||h|| + ||g|| + ||f||)."""

    data = sum(data_norms(problem).values())
    size = solution.h1_norm() + solution.pressure_l2()
    if data == 0:
        return 0.0 if size == 0 else float("inf")
    return size / data


def maximum_principle_ratio(problem: StokesProblem, solution: StokesSolution) -> float:
    """||u||_inf / ||f||_inf for boundary-data-only problems."""

    grid = staggered_grid(problem.domain)
    _, boundary = _boundary_points(problem, grid)
    f_max = float(np.max(boundary)) if boundary.size else 0.0
    u_max = solution.velocity_max()
    if f_max == 0:
        return 0.0 if u_max == 0 else float("inf")
    return u_max / f_max


def _ball(grid: StaggeredGrid, center: np.ndarray, radius: float) -> np.ndarray:
    distance = np.linalg.norm(grid.center_points - np.asarray(center, dtype=float), axis=-1)
    return distance <= radius


def caccioppoli_check(
    solution: StokesSolution,
    problem: StokesProblem,
    center: np.ndarray,
    radius: float,
) -> tuple[float, float]:
    """Return (int_{D_{r/2}} |grad u|^2, r^-2 int_{D_r} |u|^2 + r^2 int |F|^2 + int |h|^2 + int |g|^2).

    Raises:
        PreconditionError: the ball leaves the box or contains no cell centers.
    """

    domain = problem.domain
    point = np.asarray(center, dtype=float)
    if radius <= 0 or domain.distance_to_boundary(point[None, :])[0] < radius:
        raise PreconditionError(f"ball of radius {radius} at {point.tolist()} does not lie inside the box")
    grid = staggered_grid(domain)
    inner = _ball(grid, point, 0.5 * radius)
    outer = _ball(grid, point, radius)
    if not inner.any():
        raise PreconditionError(f"ball of radius {radius / 2} contains no cell centers at h={grid.spacing}")
    volume = grid.cell_volume
    d = grid.dimension

    gradient = solution.gradient_at_centers().reshape(d * d, -1)
    velocity = solution.velocity_at_centers().reshape(d, -1)
    lhs = volume * float(np.sum(gradient[:, inner] ** 2))
    rhs = volume * (
        float(np.sum(velocity[:, outer] ** 2)) / radius**2
        + radius**2 * float(np.sum(_force_at_centers(problem, grid)[outer] ** 2))
        + float(np.sum(_flux_at_centers(problem, grid)[outer] ** 2))
        + float(np.sum(_divergence_at_centers(problem, grid)[outer] ** 2))
    )
    return lhs, rhs


def lipschitz_oscillation_check(
    solution: StokesSolution,
    problem: StokesProblem,
    center: np.ndarray,
    radius: float,
) -> LocalEstimate:
    """Measure ||grad u||_inf(D_R) + osc_{D_R} p against the data bound over D_{4R}.

    The Hoelder seminorm terms of h, g and the tangential boundary gradient are
    not included in ``data_bound``.
    """

    if radius <= 0:
        raise PreconditionError(f"radius must be positive (got {radius})")
    grid = staggered_grid(problem.domain)
    point = np.asarray(center, dtype=float)
    inner = _ball(grid, point, radius)
    outer = _ball(grid, point, 4.0 * radius)
    if not inner.any():
        raise PreconditionError(f"ball of radius {radius} contains no cell centers at h={grid.spacing}")
    d = grid.dimension

    gradient = solution.gradient_at_centers().reshape(d, d, -1)[:, :, inner]
    gradient_max = float(np.max(np.sqrt(np.sum(gradient**2, axis=(0, 1)))))
    pressure = solution.pressure.ravel()[inner]
    oscillation = float(pressure.max() - pressure.min())

    velocity = solution.velocity_at_centers().reshape(d, -1)[:, outer]
    force = _force_at_centers(problem, grid)[outer]
    divergence = _divergence_at_centers(problem, grid)[outer]
    boundary_points, boundary_values = _boundary_points(problem, grid)
    near = np.linalg.norm(boundary_points - point, axis=-1) <= 4.0 * radius
    f_max = float(boundary_values[near].max()) if near.any() else 0.0
    bound = (
        float(np.sqrt(np.mean(np.sum(velocity**2, axis=0)))) / radius
        + radius * float(np.max(np.linalg.norm(force, axis=-1), initial=0.0))
        + float(np.max(np.abs(divergence), initial=0.0))
        + f_max / radius
    )
    return LocalEstimate(
        gradient_max=gradient_max,
        pressure_oscillation=oscillation,
        data_bound=bound,
        radius=float(radius),
        cells=int(inner.sum()),
    )


def _stream(t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """s = sin^2(pi t) and its first three derivatives."""

    return (
        np.sin(np.pi * t) ** 2,
        np.pi * np.sin(2 * np.pi * t),
        2 * np.pi**2 * np.cos(2 * np.pi * t),
        -4 * np.pi**3 * np.sin(2 * np.pi * t),
    )


def manufactured_velocity(points: np.ndarray) -> np.ndarray:
    """u = curl(s(x) s(y)) on the unit square; vanishes on the boundary and is divergence free."""

    pts = np.asarray(points, dtype=float)
    sx, dsx, _, _ = _stream(pts[..., 0])
    sy, dsy, _, _ = _stream(pts[..., 1])
    return np.stack([sx * dsy, -dsx * sy], axis=-1)


def manufactured_force(points: np.ndarray) -> np.ndarray:
    """-Laplace u + grad p for the manufactured velocity and p = cos(pi x) cos(pi y)."""

    pts = np.asarray(points, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    sx, dsx, ddsx, dddsx = _stream(x)
    sy, dsy, ddsy, dddsy = _stream(y)
    first = -(ddsx * dsy + sx * dddsy) - np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    second = dddsx * sy + dsx * ddsy - np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
    return np.stack([first, second], axis=-1)


def manufactured_pressure(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return np.cos(np.pi * pts[..., 0]) * np.cos(np.pi * pts[..., 1])


def manufactured_errors(
    cells: Sequence[int], tol: float | None = None, *, settings: Settings | None = None
) -> list[tuple[float, float, float]]:
    """(h, velocity L2 error, mean-free pressure L2 error) at cell centers for the identity-tensor
    manufactured solution on the unit square."""

    identity = np.einsum("ij,ab->ijab", np.eye(2), np.eye(2))
    errors = []
    for count in cells:
        domain = BoxDomain.cube(2, 1.0, count)
        problem = StokesProblem(domain=domain, tensor=identity, force=manufactured_force, label=f"manufactured-{count}")
        solution = solve_stokes(problem, tol, settings=settings)
        centers = domain.center_points()
        exact = np.moveaxis(manufactured_velocity(centers), -1, 0)
        difference = solution.velocity_at_centers() - exact
        pressure = np.asarray(solution.pressure).reshape(domain.cells)
        exact_pressure = manufactured_pressure(centers)
        pressure_gap = (pressure - pressure.mean()) - (exact_pressure - exact_pressure.mean())
        cell_volume = domain.spacing**2
        errors.append(
            (
                domain.spacing,
                float(np.sqrt(cell_volume * np.sum(difference**2))),
                float(np.sqrt(cell_volume * np.sum(pressure_gap**2))),
            )
        )
    return errors


__all__ = [
    "LocalEstimate",
    "caccioppoli_check",
    "data_norms",
    "energy_constant",
    "lipschitz_oscillation_check",
    "manufactured_errors",
    "manufactured_force",
    "manufactured_pressure",
    "manufactured_velocity",
    "maximum_principle_ratio",
]
