"""Pointwise decay, symmetry and representation measurements on Green columns."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from shom.errors import PreconditionError
from shom.green.columns import GreenColumn, green_column, shell_mask
from shom.settings import Settings, get_settings
from shom.stokes.grid import staggered_grid
from shom.stokes.problem import StokesProblem
from shom.stokes.solver import solve_stokes

LOGGER = logging.getLogger(__name__)

DECAY_COLUMNS = ("r", "absG", "absDxG", "absDyG", "absDxDyG", "oscPi", "oscDyPi")


@dataclass(frozen=True)
class DecaySample:
    """Magnitudes of one column at one probe; source-derivative fields are NaN without dy columns."""

    r: float
    abs_g: float
    abs_dx_g: float
    abs_dy_g: float
    abs_dxdy_g: float
    osc_pi: float
    osc_dy_pi: float

    def as_row(self) -> tuple[float, ...]:
        return (self.r, self.abs_g, self.abs_dx_g, self.abs_dy_g, self.abs_dxdy_g, self.osc_pi, self.osc_dy_pi)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def dyadic_probes(column: GreenColumn, r_min: float, r_max: float, direction: np.ndarray | None = None) -> np.ndarray:
    """Cell centers along ``direction`` from the source at radii r_min, 2 r_min, ... <= r_max."""

    d = column.dimension
    axis = np.ones(d) if direction is None else np.asarray(direction, dtype=float)
    axis = axis / np.linalg.norm(axis)
    h = column.domain.spacing
    probes = []
    radius = r_min
    while radius <= r_max * (1 + 1e-12):
        point = column.source + radius * axis
        if column.domain.contains(point):
            cell = np.asarray(column.domain.locate_cell(point), dtype=float)
            probes.append((cell + 0.5) * h)
        radius *= 2.0
    return np.asarray(probes).reshape(-1, d)


def pressure_oscillation(
    column: GreenColumn,
    inner: float,
    outer: float,
    *,
    settings: Settings | None = None,
) -> float:
    """max - min of the column pressure over interior cells with inner <= |x - y| <= outer."""

    resolved = settings or get_settings()
    domain = column.domain
    centers = domain.center_points().reshape(-1, domain.dimension)
    mask = shell_mask(domain, column.source, inner, outer) & domain.interior_mask(
        centers,
        margin_cells=resolved.box.interior_margin_cells,
        corner_fraction=resolved.box.corner_margin_fraction,
    )
    if not mask.any():
        return float("nan")
    values = column.pressure.ravel()[mask]
    return float(values.max() - values.min())


def decay_profile(
    column: GreenColumn,
    probes: np.ndarray,
    *,
    dy_columns: Sequence[GreenColumn] = (),
    settings: Settings | None = None,
) -> list[DecaySample]:
    """Measure |G|, its x, y and mixed gradients and the shell oscillations of Pi and grad_y Pi at each probe.

    Probes in the source cell or closer than ``green.min_separation_cells``
    cells to the source are skipped with a warning. The pressure oscillation
    at separation r is taken over the dyadic shell r <= |x - y| <= 2r.
    """

    resolved = settings or get_settings()
    points = np.atleast_2d(np.asarray(probes, dtype=float))
    minimum = resolved.green.min_separation_cells * column.domain.spacing
    samples: list[DecaySample] = []
    for point in points:
        if column.domain.locate_cell(point) == column.source_cell:
            LOGGER.warning("Probe %s lies in the source cell; excluded", point.tolist())
            continue
        r = float(np.linalg.norm(point - column.source))
        if r < minimum:
            LOGGER.warning("Probe %s is within %.3g of the source; excluded", point.tolist(), minimum)
            continue
        value = float(np.linalg.norm(column.value_at(point)))
        gradient = float(np.linalg.norm(column.gradient_at(point)))
        if dy_columns:
            dy = float(np.sqrt(sum(np.sum(other.value_at(point) ** 2) for other in dy_columns)))
            dxdy = float(np.sqrt(sum(np.sum(other.gradient_at(point) ** 2) for other in dy_columns)))
            osc_dy = max(pressure_oscillation(other, r, 2.0 * r, settings=resolved) for other in dy_columns)
        else:
            dy = dxdy = osc_dy = float("nan")
        samples.append(
            DecaySample(
                r=r,
                abs_g=value,
                abs_dx_g=gradient,
                abs_dy_g=dy,
                abs_dxdy_g=dxdy,
                osc_pi=pressure_oscillation(column, r, 2.0 * r, settings=resolved),
                osc_dy_pi=osc_dy,
            )
        )
    return samples


def symmetry_error(adjoint_column: GreenColumn, column: GreenColumn) -> float:
    """Relative mismatch |G*^{ab}(x, y) - G^{ba}(y, x)| for an adjoint column at y and a column at x.

    The adjoint column has source y and component b; the regular one has source x and component a.
    """

    if not adjoint_column.adjoint or column.adjoint:
        raise PreconditionError("expected an adjoint column and a regular column")
    if adjoint_column.source_cell == column.source_cell:
        raise PreconditionError("columns must have different source cells")
    alpha, beta = column.component, adjoint_column.component
    left = float(adjoint_column.value_at(column.source)[0, alpha])
    right = float(column.value_at(adjoint_column.source)[0, beta])
    scale = max(abs(left), abs(right))
    if scale == 0:
        return 0.0
    return abs(left - right) / scale


def representation_check(
    problem: StokesProblem,
    probe: np.ndarray,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
    cache=None,
) -> dict[str, np.ndarray | float]:
    """Compare u(x) from a direct solve with the quadrature of G(x, .) F over the source faces.

    The kernel G(x, y) is read off the adjoint columns with source x, one per
    velocity component. ``problem`` must carry only a body force.
    """

    if problem.flux is not None or problem.divergence is not None or problem.boundary is not None:
        raise PreconditionError("the representation check applies to body-force-only problems")
    if problem.force is None and problem.force_faces is None:
        raise PreconditionError("the representation check needs a body force")
    resolved = settings or get_settings()
    grid = staggered_grid(problem.domain)
    if problem.force_faces is not None:
        force = np.asarray(problem.force_faces, dtype=float).ravel()
    else:
        force = grid.sample_vector(problem.force, grid.interior)
    direct = solve_stokes(problem, tol, settings=resolved)
    cell = problem.domain.locate_cell(probe)
    direct_value = grid.velocity_at_centers(direct.velocity)[(slice(None),) + cell]

    coefficient = problem.field if problem.field is not None else problem.tensor
    represented = np.zeros(problem.dimension)
    for alpha in range(problem.dimension):
        kernel = green_column(
            coefficient,
            problem.eps,
            problem.domain,
            probe,
            alpha,
            tol,
            adjoint=True,
            settings=resolved,
            cache=cache,
        )
        represented[alpha] = grid.cell_volume * float(kernel.velocity[grid.interior] @ force)
    error = float(np.linalg.norm(direct_value - represented))
    scale = max(float(np.linalg.norm(direct_value)), np.finfo(float).tiny)
    return {"direct": direct_value, "represented": represented, "abs_error": error, "rel_error": error / scale}


__all__ = [
    "DECAY_COLUMNS",
    "DecaySample",
    "decay_profile",
    "dyadic_probes",
    "pressure_oscillation",
    "representation_check",
    "symmetry_error",
]
