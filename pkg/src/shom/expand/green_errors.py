"""Expansion errors of Green's functions against the homogenized kernels.

Every error is reported with its predicted envelope and the dimensionless
ratio raw / envelope. With L(r) = log(r / eps + 2):

    G           eps / r^(d-1)
    grad_x G    eps L^2 / r^d
    Pi (pair)   eps L^2 / r_x^d + eps L^2 / r_z^d
    Pi (mean)   eps L^3 / r^d
    dxdy G      eps L^2 / r^(d+1)
    dy Pi       eps L^2 / r_x^(d+1) + eps L^2 / r_z^(d+1)

Index layouts follow the corrector views in :mod:`shom.expand.dirichlet`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from shom.coeff.fields import CoefficientField
from shom.errors import PreconditionError
from shom.expand.dirichlet import (
    DirichletCorrectorSet,
    PeriodicCorrectorView,
    periodic_correctors,
    solve_dirichlet_correctors,
)
from shom.green.columns import GreenColumn, dy_green_column, fundamental_column, green_column
from shom.observability import get_observability
from shom.settings import Settings, get_settings
from shom.stokes.grid import BoxDomain
from shom.torus.models import CorrectorSet

LOGGER = logging.getLogger(__name__)

ERROR_TABLE_COLUMNS = ("eps", "r", "raw_error", "envelope", "ratio", "fit_window_id")


@dataclass(frozen=True)
class ExpansionErrorRow:
    eps: float
    r: float
    quantity: str
    component: int
    raw_error: float
    envelope: float
    ratio: float
    fit_window_id: str

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)

    def as_table_row(self) -> tuple[float, float, float, float, float, str]:
        return (self.eps, self.r, self.raw_error, self.envelope, self.ratio, self.fit_window_id)


def log_factor(r: float, eps: float) -> float:
    return math.log(r / eps + 2.0)


def envelope(quantity: str, eps: float, r: float, d: int) -> float:
    """Predicted size of the expansion error for ``quantity`` at separation r."""

    if quantity == "G":
        return eps / r ** (d - 1)
    if quantity in ("DG", "Pi"):
        return eps * log_factor(r, eps) ** 2 / r**d
    if quantity == "Pi_mean":
        return eps * log_factor(r, eps) ** 3 / r**d
    if quantity in ("DDG", "DyPi"):
        return eps * log_factor(r, eps) ** 2 / r ** (d + 1)
    raise ValueError(f"unknown expansion quantity '{quantity}'")


def fit_window(quantity: str, r: float, h: float) -> str:
    """Dyadic separation bin, counted in units of 4h."""

    index = max(0, int(math.floor(math.log2(max(r, 4.0 * h) / (4.0 * h)))))
    return f"{quantity}:w{index}"


def _row(
    quantity: str, eps: float, r: float, h: float, component: int, raw: float, env: float
) -> ExpansionErrorRow:
    return ExpansionErrorRow(
        eps=float(eps),
        r=float(r),
        quantity=quantity,
        component=int(component),
        raw_error=float(raw),
        envelope=float(env),
        ratio=float(raw / env) if env > 0 else float("nan"),
        fit_window_id=fit_window(quantity, r, h),
    )


def admissible_probes(
    domain: BoxDomain, source: np.ndarray, probes: np.ndarray, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Probes at separation >= max(4h, 2 eps) from ``source`` and outside its cell, with their separations."""

    points = np.atleast_2d(np.asarray(probes, dtype=float))
    minimum = max(4.0 * domain.spacing, 2.0 * eps)
    source_cell = domain.locate_cell(source)
    kept, radii = [], []
    for point in points:
        if not domain.contains(point):
            LOGGER.warning("Probe %s lies outside the box; excluded", point.tolist())
            continue
        r = float(np.linalg.norm(point - source))
        if r < minimum or domain.locate_cell(point) == source_cell:
            LOGGER.warning("Probe %s is within %.3g of the source; excluded", point.tolist(), minimum)
            continue
        kept.append(point)
        radii.append(r)
    return np.asarray(kept).reshape(-1, domain.dimension), np.asarray(radii)


def table_rows(rows: Iterable[ExpansionErrorRow], quantity: str) -> list[tuple[float, float, float, float, float, str]]:
    """CSV-ready rows (``ERROR_TABLE_COLUMNS``) for one quantity."""

    return [row.as_table_row() for row in rows if row.quantity == quantity]


def _columns(
    coefficient: CoefficientField | np.ndarray,
    eps: float | None,
    domain: BoxDomain,
    source: np.ndarray,
    tol: float | None,
    settings: Settings,
    cache: Any | None,
) -> list[GreenColumn]:
    return [
        green_column(coefficient, eps, domain, source, beta, tol, settings=settings, cache=cache)
        for beta in range(domain.dimension)
    ]


def _source_derivatives(
    columns: Sequence[GreenColumn], tol: float | None, settings: Settings, cache: Any | None
) -> list[list[GreenColumn]]:
    """dy[sigma][l] = divided difference of column sigma in the source direction l."""

    return [
        [dy_green_column(column, ell, tol, settings=settings, cache=cache) for ell in range(column.dimension)]
        for column in columns
    ]


def _first_order_rows(
    eps: float,
    h: float,
    view: DirichletCorrectorSet | PeriodicCorrectorView,
    eps_columns: Sequence[GreenColumn],
    zero_columns: Sequence[GreenColumn],
    points: np.ndarray,
    radii: np.ndarray,
    pressure_offsets: tuple[np.ndarray, np.ndarray],
) -> tuple[list[ExpansionErrorRow], np.ndarray]:
    """Rows for G and grad_x G, plus the pressure bracket [P, beta] used by the Pi rows."""

    d = len(eps_columns)
    rows: list[ExpansionErrorRow] = []
    corrector_gradient = view.gradient_at(points)
    corrector_pressure = view.pressure_at(points)
    brackets = np.zeros((len(points), d))
    offset_eps, offset_zero = pressure_offsets
    for beta, (col_eps, col_zero) in enumerate(zip(eps_columns, zero_columns)):
        g_eps = col_eps.value_at(points)
        g_zero = col_zero.value_at(points)
        dg_eps = col_eps.gradient_at(points)
        dg_zero = col_zero.gradient_at(points)
        corrected = np.einsum("jgaip,pgj->pai", corrector_gradient, dg_zero)
        pressure_term = np.einsum("jgp,pgj->p", corrector_pressure, dg_zero)
        pi_eps = col_eps.pressure_at(points) - offset_eps[beta]
        pi_zero = col_zero.pressure_at(points) - offset_zero[beta]
        brackets[:, beta] = pi_eps - pi_zero - pressure_term
        for index, r in enumerate(radii):
            rows.append(
                _row("G", eps, r, h, beta, np.linalg.norm(g_eps[index] - g_zero[index]), envelope("G", eps, r, d))
            )
            raw = np.linalg.norm(dg_eps[index] - corrected[index])
            rows.append(_row("DG", eps, r, h, beta, raw, envelope("DG", eps, r, d)))
    return rows, brackets


def _pair_rows(
    quantity: str,
    eps: float,
    h: float,
    d: int,
    brackets: np.ndarray,
    radii: np.ndarray,
    pairs: Sequence[tuple[int, int]] | None,
) -> list[ExpansionErrorRow]:
    """Difference-form rows |bracket(x) - bracket(z)| over probe pairs; consecutive probes by default."""

    if pairs is None:
        pairs = [(k, k + 1) for k in range(len(radii) - 1)]
    rows = []
    for x_index, z_index in pairs:
        r_x, r_z = radii[x_index], radii[z_index]
        env = envelope(quantity, eps, r_x, d) + envelope(quantity, eps, r_z, d)
        difference = brackets[x_index] - brackets[z_index]
        magnitude = np.linalg.norm(difference.reshape(difference.shape[0], -1), axis=1)
        for component, raw in enumerate(magnitude):
            rows.append(_row(quantity, eps, r_x, h, component, raw, env))
    return rows


def _homogenized(cell: CorrectorSet) -> np.ndarray:
    if cell.a_hat is None:
        raise PreconditionError("cell correctors must carry the effective tensor")
    return cell.a_hat


def green_expansion_errors(
    coefficient: CoefficientField,
    eps: float,
    domain: BoxDomain,
    source: np.ndarray,
    probes: np.ndarray,
    tol: float | None = None,
    *,
    correctors: DirichletCorrectorSet | None = None,
    pairs: Sequence[tuple[int, int]] | None = None,
    settings: Settings | None = None,
    cache: Any | None = None,
) -> list[ExpansionErrorRow]:
    """Errors of G_eps ~ G_0, grad G_eps ~ grad Phi grad G_0 and the two pressure expansions.

    ``pairs`` indexes the admissible probes (in order) for the difference form
    of the pressure expansion. The non-difference form subtracts the box
    average of Lambda grad G_0, matching the mean-zero pressure normalization.

    Raises:
        PreconditionError: fewer than one admissible probe remains.
    """

    resolved = settings or get_settings()
    d = domain.dimension
    h = domain.spacing
    points, radii = admissible_probes(domain, np.asarray(source, dtype=float), probes, eps)
    if not len(points):
        raise PreconditionError("no probe is far enough from the source")
    if correctors is None:
        correctors = solve_dirichlet_correctors(coefficient, eps, domain, tol, settings=resolved)
    a_hat = _homogenized(correctors.cell)
    obs = get_observability(component="expand", settings=resolved)
    with obs.timed("green_expansion", tags={"d": str(d)}):
        eps_columns = _columns(coefficient, eps, domain, source, tol, resolved, cache)
        zero_columns = _columns(a_hat, None, domain, source, tol, resolved, cache)
    zeros = np.zeros(d)
    rows, brackets = _first_order_rows(
        eps, h, correctors, eps_columns, zero_columns, points, radii, (zeros, zeros)
    )
    rows.extend(_pair_rows("Pi", eps, h, d, brackets, radii, pairs))

    for beta, col_zero in enumerate(zero_columns):
        average = float(np.mean(np.einsum("jg...,gj...->...", correctors.pressure, col_zero.gradient_at_centers())))
        for index, r in enumerate(radii):
            raw = abs(brackets[index, beta] + average)
            rows.append(_row("Pi_mean", eps, r, h, beta, raw, envelope("Pi_mean", eps, r, d)))
    LOGGER.info("Green expansion eps=%s probes=%s rows=%s", eps, len(points), len(rows))
    return rows


def second_derivative_expansion_errors(
    coefficient: CoefficientField,
    eps: float,
    domain: BoxDomain,
    source: np.ndarray,
    probes: np.ndarray,
    tol: float | None = None,
    *,
    correctors: DirichletCorrectorSet | None = None,
    adjoint_correctors: DirichletCorrectorSet | None = None,
    pairs: Sequence[tuple[int, int]] | None = None,
    include_pressure: bool = True,
    settings: Settings | None = None,
    cache: Any | None = None,
) -> list[ExpansionErrorRow]:
    """Errors of dx dy G_eps ~ grad Phi(x) dx dy G_0 grad Phi*(y)^T and, optionally, of the dy Pi expansion.

    The source derivatives are divided differences of columns over one cell
    in each direction; the adjoint correctors are evaluated at the source.
    """

    resolved = settings or get_settings()
    d = domain.dimension
    h = domain.spacing
    y = np.asarray(source, dtype=float)
    points, radii = admissible_probes(domain, y, probes, eps)
    if not len(points):
        raise PreconditionError("no probe is far enough from the source")
    if correctors is None:
        correctors = solve_dirichlet_correctors(coefficient, eps, domain, tol, settings=resolved)
    if adjoint_correctors is None:
        adjoint_correctors = solve_dirichlet_correctors(coefficient, eps, domain, tol, adjoint=True, settings=resolved)
    if not adjoint_correctors.adjoint:
        raise PreconditionError("adjoint_correctors must be solved for the adjoint tensor")
    a_hat = _homogenized(correctors.cell)

    obs = get_observability(component="expand", settings=resolved)
    with obs.timed("second_derivative_expansion", tags={"d": str(d)}):
        dy_eps = _source_derivatives(_columns(coefficient, eps, domain, y, tol, resolved, cache), tol, resolved, cache)
        dy_zero = _source_derivatives(_columns(a_hat, None, domain, y, tol, resolved, cache), tol, resolved, cache)

    # [l, sigma, beta, j] = d_{y_j} Phi*_l^{beta sigma}(y)
    adjoint_gradient = adjoint_correctors.gradient_at(y[None, :])[..., 0]
    corrector_gradient = correctors.gradient_at(points)
    corrector_pressure = correctors.pressure_at(points)

    rows: list[ExpansionErrorRow] = []
    brackets = np.zeros((len(points), d, d))
    for index, (point, r) in enumerate(zip(points, radii)):
        ddg_eps = np.zeros((d, d, d, d))
        ddg_zero = np.zeros((d, d, d, d))
        dpi_eps = np.zeros((d, d))
        dpi_zero = np.zeros((d, d))
        for sigma in range(d):
            for ell in range(d):
                ddg_eps[:, :, sigma, ell] = dy_eps[sigma][ell].gradient_at(point)[0]
                ddg_zero[:, :, sigma, ell] = dy_zero[sigma][ell].gradient_at(point)[0]
                dpi_eps[sigma, ell] = dy_eps[sigma][ell].pressure_at(point)[0]
                dpi_zero[sigma, ell] = dy_zero[sigma][ell].pressure_at(point)[0]
        corrected = np.einsum(
            "kgai,gksl,lsbj->aibj", corrector_gradient[..., index], ddg_zero, adjoint_gradient
        )
        difference = ddg_eps - corrected
        env = envelope("DDG", eps, r, d)
        for beta in range(d):
            rows.append(_row("DDG", eps, r, h, beta, np.linalg.norm(difference[:, :, beta, :]), env))
        brackets[index] = (
            dpi_eps
            - np.einsum("lsbj,sl->bj", adjoint_gradient, dpi_zero)
            - np.einsum("kg,gksl,lsbj->bj", corrector_pressure[..., index], ddg_zero, adjoint_gradient)
        )
    if include_pressure:
        rows.extend(_pair_rows("DyPi", eps, h, d, brackets, radii, pairs))
    LOGGER.info("Second-derivative expansion eps=%s probes=%s rows=%s", eps, len(points), len(rows))
    return rows


def fundamental_expansion_errors(
    coefficient: CoefficientField,
    eps: float,
    length: float,
    offsets: np.ndarray,
    tol: float | None = None,
    *,
    cells: int = 48,
    cell: CorrectorSet | None = None,
    pairs: Sequence[tuple[int, int]] | None = None,
    settings: Settings | None = None,
    cache: Any | None = None,
) -> list[ExpansionErrorRow]:
    """G, grad G and Pi expansions for large-box fundamental solutions with (P + eps chi, pi) as correctors.

    ``offsets`` are probe displacements from the box center. Pressures are
    compared after removing each column's far-field constant Q-bar.
    The box side must be at least 16 times the largest offset.
    """

    resolved = settings or get_settings()
    if cell is None:
        cell = periodic_correctors(coefficient, resolved)
    a_hat = _homogenized(cell)
    d = coefficient.dimension
    radius = float(np.max(np.linalg.norm(np.atleast_2d(offsets), axis=-1)))
    eps_columns = [
        fundamental_column(
            coefficient, eps, length, beta, tol, cells=cells, measurement_radius=radius, settings=resolved, cache=cache
        )
        for beta in range(d)
    ]
    zero_columns = [
        fundamental_column(
            a_hat,
            None,
            length,
            beta,
            tol,
            dimension=d,
            cells=cells,
            measurement_radius=radius,
            settings=resolved,
            cache=cache,
        )
        for beta in range(d)
    ]
    domain = eps_columns[0].domain
    source = eps_columns[0].source
    points, radii = admissible_probes(domain, source, source + np.atleast_2d(offsets), eps)
    if not len(points):
        raise PreconditionError("no probe is far enough from the source")
    offsets_eps = np.array([column.far_field_pressure for column in eps_columns])
    offsets_zero = np.array([column.far_field_pressure for column in zero_columns])
    view = PeriodicCorrectorView(cell=cell, eps=eps)
    rows, brackets = _first_order_rows(
        eps, domain.spacing, view, eps_columns, zero_columns, points, radii, (offsets_eps, offsets_zero)
    )
    rows.extend(_pair_rows("Pi", eps, domain.spacing, d, brackets, radii, pairs))
    LOGGER.info(
        "Fundamental expansion eps=%s L=%s contamination=%.3e rows=%s",
        eps,
        length,
        eps_columns[0].contamination,
        len(rows),
    )
    return rows


__all__ = [
    "ERROR_TABLE_COLUMNS",
    "ExpansionErrorRow",
    "admissible_probes",
    "envelope",
    "fit_window",
    "fundamental_expansion_errors",
    "green_expansion_errors",
    "log_factor",
    "second_derivative_expansion_errors",
    "table_rows",
]
