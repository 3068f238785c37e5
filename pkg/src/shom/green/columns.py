"""Discrete Green's function columns on boxes and fundamental solutions on large boxes.

A column (G^beta(., y), Pi^beta(., y)) solves the Dirichlet problem with a unit
point force in direction beta at the cell center y. The discrete delta puts
1 / (2 h^d) on the two beta-faces of the source cell, so its mass is one and
sampling a column by averaging the same two faces is the exact transpose of
the source. That makes the adjoint symmetry G*(x, y) = G(y, x)^T hold to
solver tolerance on the grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from shom.coeff.fields import CoefficientField
from shom.errors import PreconditionError
from shom.observability import get_observability
from shom.settings import Settings, get_settings
from shom.stokes.grid import BoxDomain, StaggeredGrid, staggered_grid
from shom.stokes.problem import StokesProblem, StokesSolution
from shom.stokes.solver import check_compatibility, solve_stokes

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GreenColumn:
    """Velocity and pressure of one Green's function column.

    ``velocity`` is the full extended face vector and ``pressure`` lives at
    cell centers with zero mean. When ``derivative`` is set the column holds
    the source divided difference (G(., y + h e_l) - G(., y)) / h instead.
    """

    problem: StokesProblem
    source: np.ndarray
    source_cell: tuple[int, ...]
    component: int
    velocity: np.ndarray
    pressure: np.ndarray
    adjoint: bool = False
    derivative: int | None = None
    stats: dict[str, Any] = field(default_factory=dict)

    @property
    def domain(self) -> BoxDomain:
        return self.problem.domain

    @property
    def grid(self) -> StaggeredGrid:
        return staggered_grid(self.problem.domain)

    @property
    def dimension(self) -> int:
        return self.problem.dimension

    def as_solution(self) -> StokesSolution:
        return StokesSolution(
            domain=self.domain,
            velocity=self.velocity,
            pressure=self.pressure,
            residual=float(self.stats.get("residual", 0.0)),
            divergence_residual=float(self.stats.get("divergence_residual", 0.0)),
            stats=dict(self.stats),
        )

    def velocity_at_centers(self) -> np.ndarray:
        return self.grid.velocity_at_centers(self.velocity)

    def gradient_at_centers(self) -> np.ndarray:
        return self.grid.gradient_at_centers(self.velocity)

    def _cells(self, points: np.ndarray) -> tuple[np.ndarray, ...]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        index = np.array([self.domain.locate_cell(point) for point in pts], dtype=int)
        return tuple(index.T)

    def value_at(self, points: np.ndarray) -> np.ndarray:
        """G^{alpha beta}(x, y) at the cells containing ``points``, shape (P, alpha)."""

        cells = self._cells(points)
        return np.moveaxis(self.velocity_at_centers()[(slice(None),) + cells], 0, -1)

    def gradient_at(self, points: np.ndarray) -> np.ndarray:
        """d_j G^{alpha beta}(x, y) at the cells containing ``points``, shape (P, alpha, j)."""

        cells = self._cells(points)
        return np.moveaxis(self.gradient_at_centers()[(slice(None), slice(None)) + cells], -1, 0)

    def pressure_at(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.pressure[self._cells(points)], dtype=float)

    def pressure_mean(self) -> float:
        return float(np.mean(self.pressure))

    def describe(self) -> dict[str, Any]:
        summary = self.problem.describe()
        summary.update(
            {
                "source": self.source.tolist(),
                "source_cell": list(self.source_cell),
                "component": self.component,
                "adjoint": self.adjoint,
                "derivative": self.derivative,
            }
        )
        return summary


@dataclass(frozen=True, eq=False)
class FundamentalColumn(GreenColumn):
    """Large-box column standing in for the whole-space fundamental solution."""

    far_field_pressure: float = 0.0
    shell: tuple[float, float] = (0.0, 0.0)
    measurement_radius: float = 0.0
    contamination: float = 0.0


def source_cell(domain: BoxDomain, point: np.ndarray, *, min_cells: int = 4) -> tuple[tuple[int, ...], np.ndarray]:
    """Snap ``point`` to the center of its cell and check its distance to the boundary.

    Raises:
        PreconditionError: the source lies outside the box or within ``min_cells`` cells of its boundary.
    """

    pt = np.asarray(point, dtype=float)
    if pt.shape != (domain.dimension,) or not domain.contains(pt):
        raise PreconditionError(f"source {pt.tolist()} is not inside the box")
    cell = domain.locate_cell(pt)
    center = (np.asarray(cell, dtype=float) + 0.5) * domain.spacing
    if domain.distance_to_boundary(center[None, :])[0] < min_cells * domain.spacing:
        raise PreconditionError(
            f"source {center.tolist()} is closer than {min_cells} cells to the boundary (h={domain.spacing})"
        )
    return cell, center


def delta_faces(grid: StaggeredGrid, cell: tuple[int, ...], component: int, weight: float = 1.0) -> np.ndarray:
    """Discrete unit point force in ``component`` at ``cell``, on the interior velocity unknowns."""

    d = grid.dimension
    shape = grid.component_shapes[component]
    values = np.zeros(grid.interior.size)
    for shift in (0, 1):
        index = tuple(cell[k] + shift if k == component else cell[k] + 1 for k in range(d))
        flat = grid.offsets[component] + int(np.ravel_multi_index(index, shape))
        position = int(np.searchsorted(grid.interior, flat))
        if position >= grid.interior.size or grid.interior[position] != flat:
            raise PreconditionError(f"source cell {cell} touches the boundary")
        values[position] += weight / (2.0 * grid.cell_volume)
    return values


def _base_problem(
    coefficient: CoefficientField | np.ndarray,
    eps: float | None,
    domain: BoxDomain,
    *,
    label: str,
) -> StokesProblem:
    if isinstance(coefficient, CoefficientField):
        return StokesProblem(domain=domain, field=coefficient, eps=eps, label=label)
    return StokesProblem(domain=domain, tensor=np.asarray(coefficient, dtype=float), label=label)


def _solve_column(
    problem: StokesProblem,
    cell: tuple[int, ...],
    center: np.ndarray,
    component: int,
    *,
    adjoint: bool,
    tol: float | None,
    settings: Settings,
    cache: Any | None,
) -> GreenColumn:
    if cache is not None:
        cached = cache.load(problem, cell, component, adjoint=adjoint)
        if cached is not None:
            return cached
    grid = staggered_grid(problem.domain)
    target = problem.adjoint() if adjoint else problem
    target = target.with_data(force_faces=delta_faces(grid, cell, component))
    solution = solve_stokes(target, tol, settings=settings)
    stats = dict(solution.stats)
    stats.update({"residual": solution.residual, "divergence_residual": solution.divergence_residual})
    column = GreenColumn(
        problem=problem,
        source=center,
        source_cell=cell,
        component=component,
        velocity=solution.velocity,
        pressure=solution.pressure,
        adjoint=adjoint,
        stats=stats,
    )
    if cache is not None:
        cache.store(column)
    return column


def green_column(
    coefficient: CoefficientField | np.ndarray,
    eps: float | None,
    domain: BoxDomain,
    source: np.ndarray,
    component: int,
    tol: float | None = None,
    *,
    adjoint: bool = False,
    settings: Settings | None = None,
    cache: Any | None = None,
) -> GreenColumn:
    """Solve for (G^beta(., y), Pi^beta(., y)) with A(x / eps), or a constant tensor when ``eps`` is None.

    Raises:
        PreconditionError: the source is within the minimum separation of the boundary.
        ConvergenceError: the Stokes solve does not converge.
    """

    resolved = settings or get_settings()
    if not 0 <= component < domain.dimension:
        raise PreconditionError(f"component must be in [0, {domain.dimension}) (got {component})")
    cell, center = source_cell(domain, source, min_cells=resolved.green.min_separation_cells)
    problem = _base_problem(coefficient, eps, domain, label="green")
    column = _solve_column(
        problem, cell, center, component, adjoint=adjoint, tol=tol, settings=resolved, cache=cache
    )
    get_observability(component="green", settings=resolved).increment("columns", tags={"adjoint": str(adjoint)})
    return column


def adjoint_green_column(
    coefficient: CoefficientField | np.ndarray,
    eps: float | None,
    domain: BoxDomain,
    source: np.ndarray,
    component: int,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
    cache: Any | None = None,
) -> GreenColumn:
    """Column (G*^beta(., y), Pi*^beta(., y)) of the adjoint system."""

    return green_column(
        coefficient, eps, domain, source, component, tol, adjoint=True, settings=settings, cache=cache
    )


def dy_green_column(
    column: GreenColumn,
    direction: int,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
    cache: Any | None = None,
) -> GreenColumn:
    """Divided difference in the source point along ``direction``: the discrete d/dy_l of G and Pi."""

    resolved = settings or get_settings()
    domain = column.domain
    if column.derivative is not None:
        raise PreconditionError("column already holds a source derivative")
    if not 0 <= direction < domain.dimension:
        raise PreconditionError(f"direction must be in [0, {domain.dimension}) (got {direction})")
    h = domain.spacing
    shifted_source = column.source + h * np.eye(domain.dimension)[direction]
    cell, center = source_cell(domain, shifted_source, min_cells=resolved.green.min_separation_cells)
    shifted = _solve_column(
        column.problem,
        cell,
        center,
        column.component,
        adjoint=column.adjoint,
        tol=tol,
        settings=resolved,
        cache=cache,
    )
    return replace(
        column,
        velocity=(shifted.velocity - column.velocity) / h,
        pressure=(shifted.pressure - column.pressure) / h,
        derivative=direction,
        stats={"base": column.stats, "shifted": shifted.stats},
    )


def shell_mask(domain: BoxDomain, source: np.ndarray, inner: float, outer: float) -> np.ndarray:
    """Cell centers with inner <= |x - y| <= outer, flattened in cell order."""

    distance = np.linalg.norm(domain.center_points().reshape(-1, domain.dimension) - source, axis=-1)
    return (distance >= inner) & (distance <= outer)


def far_field_constant(column: GreenColumn, inner: float, outer: float) -> float:
    """Average of the pressure over the shell inner <= |x - y| <= outer."""

    mask = shell_mask(column.domain, column.source, inner, outer)
    if not mask.any():
        raise PreconditionError(f"shell [{inner}, {outer}] contains no cell centers")
    return float(np.mean(column.pressure.ravel()[mask]))


def fundamental_column(
    coefficient: CoefficientField | np.ndarray,
    eps: float | None,
    length: float,
    component: int,
    tol: float | None = None,
    *,
    dimension: int | None = None,
    cells: int = 48,
    measurement_radius: float | None = None,
    settings: Settings | None = None,
    cache: Any | None = None,
) -> FundamentalColumn:
    """Green column at the center of the cube [0, L]^d standing in for (Gamma, Q).

    Q-bar is the pressure average over the shell L/4 <= r <= L/3 (fractions from
    ``green`` settings). Measurements use r <= L/16 by default; the boundary
    contamination (r / L)^(d-1) at the measurement radius is recorded.
    """

    resolved = settings or get_settings()
    if isinstance(coefficient, CoefficientField):
        d = coefficient.dimension
    else:
        d = dimension or np.asarray(coefficient).shape[0]
    radius = measurement_radius if measurement_radius is not None else length / 16.0
    if length < 16.0 * radius - 1e-12:
        raise PreconditionError(f"box side {length} must be at least 16 times the measurement radius {radius}")
    domain = BoxDomain.cube(d, length, cells)
    column = green_column(
        coefficient, eps, domain, domain.center, component, tol, settings=resolved, cache=cache
    )
    inner = resolved.green.shell_inner_fraction * length
    outer = resolved.green.shell_outer_fraction * length
    q_bar = far_field_constant(column, inner, outer)
    contamination = (radius / length) ** (d - 1)
    LOGGER.info(
        "Fundamental column L=%s component=%s Q-bar=%.6e contamination=%.3e", length, component, q_bar, contamination
    )
    return FundamentalColumn(
        problem=column.problem,
        source=column.source,
        source_cell=column.source_cell,
        component=column.component,
        velocity=column.velocity,
        pressure=column.pressure,
        adjoint=column.adjoint,
        stats=column.stats,
        far_field_pressure=q_bar,
        shell=(inner, outer),
        measurement_radius=radius,
        contamination=contamination,
    )


ALTERNATE_SHELL = (0.2, 0.25)


def far_field_decay(columns: Sequence[FundamentalColumn], offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """max over columns of |Q(x) - Q-bar| at the cell centers hit by ``source + offsets``, with their radii."""

    domain = columns[0].domain
    source = columns[0].source
    centers = []
    for offset in np.atleast_2d(np.asarray(offsets, dtype=float)):
        point = source + offset
        if not domain.contains(point):
            raise PreconditionError(f"offset {offset.tolist()} leaves the fundamental box")
        centers.append((np.asarray(domain.locate_cell(point), dtype=float) + 0.5) * domain.spacing)
    points = np.asarray(centers)
    radii = np.linalg.norm(points - source, axis=-1)
    values = np.max([np.abs(column.pressure_at(points) - column.far_field_pressure) for column in columns], axis=0)
    return radii, values


def far_field_consistency(
    columns: Sequence[FundamentalColumn], shells: Sequence[tuple[float, float]]
) -> dict[str, Any]:
    """Q-bar of every column over each shell (fractions of the box side) and its relative spread.

    The spread is divided by the mean |Q - Q-bar| on r/2 <= |x - y| <= r at the
    measurement radius r, which puts it on the scale of ``contamination``.
    """

    constants, relative = [], []
    for column in columns:
        length = float(column.domain.lengths[0])
        values = [far_field_constant(column, inner * length, outer * length) for inner, outer in shells]
        radius = column.measurement_radius
        mask = shell_mask(column.domain, column.source, 0.5 * radius, radius)
        if not mask.any():
            raise PreconditionError(f"no cell centers within [{0.5 * radius}, {radius}] of the source")
        scale = float(np.mean(np.abs(column.pressure.ravel()[mask] - column.far_field_pressure)))
        spread = max(values) - min(values)
        constants.append(values)
        relative.append(spread / scale if scale > 0 else float("inf"))
    return {
        "shells": [list(shell) for shell in shells],
        "constants": constants,
        "relative_spread": relative,
        "contamination": max(column.contamination for column in columns),
    }


def stokeslet(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Whole-space fundamental solution of -Laplace u + grad p = delta I, div u = 0.

    Returns (Gamma, Q) with Gamma of shape (P, d, d) (Gamma[:, alpha, beta]) and
    Q of shape (P, d) (Q[:, beta]) at the points ``x`` for the source ``y``.
    """

    diff = np.atleast_2d(np.asarray(x, dtype=float)) - np.asarray(y, dtype=float)
    d = diff.shape[-1]
    r = np.linalg.norm(diff, axis=-1)
    if np.any(r == 0):
        raise PreconditionError("stokeslet is singular at the source")
    outer = diff[:, :, None] * diff[:, None, :]
    eye = np.eye(d)
    if d == 3:
        gamma = (eye / r[:, None, None] + outer / r[:, None, None] ** 3) / (8.0 * np.pi)
        q = diff / (4.0 * np.pi * r[:, None] ** 3)
    elif d == 2:
        gamma = (-np.log(r)[:, None, None] * eye + outer / r[:, None, None] ** 2) / (4.0 * np.pi)
        q = diff / (2.0 * np.pi * r[:, None] ** 2)
    else:
        raise PreconditionError(f"stokeslet is implemented for d = 2, 3 (got {d})")
    return gamma, q


def regular_part(column: GreenColumn, tol: float | None = None, *, settings: Settings | None = None) -> StokesSolution:
    """Solve the identity-tensor Stokes problem whose boundary datum is the stokeslet column.

    For A = I the box column equals the stokeslet minus this regular part. The
    divergence datum is the constant that cancels the quadrature defect of the
    boundary flux.
    """

    problem = column.problem
    d = column.dimension
    if not problem.is_constant or not np.allclose(problem.coefficient(column.source[None, :])[0], _identity(d)):
        raise PreconditionError("the stokeslet regular part applies to the identity tensor only")
    beta, source = column.component, column.source

    def boundary(points: np.ndarray) -> np.ndarray:
        gamma, _ = stokeslet(points, source)
        return gamma[:, :, beta]

    data = StokesProblem(domain=column.domain, tensor=_identity(d), boundary=boundary, label="stokeslet-regular")
    defect = check_compatibility(data)
    grid = staggered_grid(column.domain)
    data = data.with_data(divergence_cells=np.full(grid.cell_count, -defect / column.domain.volume))
    return solve_stokes(data, tol, settings=settings)


def _identity(d: int) -> np.ndarray:
    return np.einsum("ij,ab->ijab", np.eye(d), np.eye(d))


def stokeslet_check(
    column: GreenColumn,
    probes: np.ndarray,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
) -> dict[str, np.ndarray]:
    """Relative errors of G + H against Gamma and of Pi + H_p against Q up to a constant, per probe."""

    points = np.atleast_2d(np.asarray(probes, dtype=float))
    regular = regular_part(column, tol, settings=settings)
    grid = column.grid
    cells = column._cells(points)
    beta = column.component
    regular_velocity = grid.velocity_at_centers(regular.velocity)[(slice(None),) + cells]
    velocity = column.value_at(points) + np.moveaxis(regular_velocity, 0, -1)
    pressure = column.pressure_at(points) + regular.pressure[cells]
    centers = (np.stack(cells, axis=-1) + 0.5) * column.domain.spacing
    gamma, q = stokeslet(centers, column.source)
    exact_velocity = gamma[:, :, beta]
    exact_pressure = q[:, beta]
    offset = float(np.mean(pressure - exact_pressure))
    velocity_error = np.linalg.norm(velocity - exact_velocity, axis=-1) / np.linalg.norm(exact_velocity, axis=-1)
    scale = np.maximum(np.abs(exact_pressure), np.finfo(float).tiny)
    pressure_error = np.abs(pressure - offset - exact_pressure) / scale
    return {
        "r": np.linalg.norm(centers - column.source, axis=-1),
        "velocity_rel_error": velocity_error,
        "pressure_rel_error": pressure_error,
        "pressure_offset": np.full(len(points), offset),
    }


__all__ = [
    "ALTERNATE_SHELL",
    "FundamentalColumn",
    "GreenColumn",
    "adjoint_green_column",
    "delta_faces",
    "dy_green_column",
    "far_field_consistency",
    "far_field_constant",
    "far_field_decay",
    "fundamental_column",
    "green_column",
    "regular_part",
    "shell_mask",
    "source_cell",
    "stokeslet",
    "stokeslet_check",
]
