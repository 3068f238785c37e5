"""Unit tests for Dirichlet correctors, expansion fields and Green's expansion error bookkeeping."""

from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from shom.coeff import make_coefficient
from shom.errors import PreconditionError
from shom.expand import (
    ERROR_TABLE_COLUMNS,
    ExpansionErrorRow,
    admissible_probes,
    build_expansion,
    check_resolution,
    envelope,
    fit_window,
    fundamental_expansion_errors,
    green_expansion_errors,
    linear_field,
    linf_rate,
    periodic_correctors,
    second_derivative_expansion_errors,
    solution_errors,
    solve_dirichlet_correctors,
    table_rows,
)
from shom.harness.runner import smooth_force
from shom.stokes import BoxDomain, StokesProblem, solve_homogenized, solve_stokes


@pytest.fixture()
def domain() -> BoxDomain:
    return BoxDomain.cube(2, 1.0, 16)


def test_linear_field_places_coordinate_in_component() -> None:
    """P_j^beta(x) = x_j e^beta."""

    points = np.array([[0.25, 0.75], [0.5, 0.125]])
    values = linear_field(1, 0)(points)

    np.testing.assert_allclose(values, [[0.75, 0.0], [0.125, 0.0]])


def test_check_resolution_requires_points_per_eps(domain) -> None:
    """eps below points_per_eps cells is under-resolved."""

    check_resolution(domain, 0.5, 8)
    with pytest.raises(PreconditionError):
        check_resolution(domain, 0.25, 8)


def test_envelopes_follow_their_scalings() -> None:
    """Each quantity uses its predicted power of r and log factor."""

    eps, r = 0.1, 0.5
    log2 = math.log(r / eps + 2.0) ** 2

    assert envelope("G", eps, r, 2) == pytest.approx(0.2)
    assert envelope("G", eps, r, 3) == pytest.approx(0.4)
    assert envelope("DG", eps, r, 2) == pytest.approx(eps * log2 / r**2)
    assert envelope("DDG", eps, r, 3) == pytest.approx(eps * log2 / r**4)
    assert envelope("Pi_mean", eps, r, 2) == pytest.approx(eps * math.log(r / eps + 2.0) ** 3 / r**2)
    with pytest.raises(ValueError):
        envelope("Hessian", eps, r, 2)


def test_fit_window_bins_separation_in_units_of_four_cells() -> None:
    """Bins are dyadic in r / (4h) and clamp below at zero."""

    h = 1.0 / 64
    assert fit_window("G", 2 * h, h) == "G:w0"
    assert fit_window("G", 4 * h, h) == "G:w0"
    assert fit_window("DG", 8 * h, h) == "DG:w1"
    assert fit_window("DG", 20 * h, h) == "DG:w2"


def test_admissible_probes_excludes_near_and_outside_points(domain, caplog) -> None:
    """Probes closer than max(4h, 2 eps) or outside the box are dropped with a warning."""

    source = np.array([0.5, 0.5])
    probes = np.array([[0.6, 0.5], [0.8, 0.5], [1.5, 0.5]])
    with caplog.at_level(logging.WARNING):
        kept, radii = admissible_probes(domain, source, probes, 0.0625)

    np.testing.assert_allclose(kept, [[0.8, 0.5]])
    np.testing.assert_allclose(radii, [0.3])
    assert "outside the box" in caplog.text


def test_table_rows_filter_by_quantity() -> None:
    """Rows are emitted in the error-table column order for one quantity only."""

    rows = [
        ExpansionErrorRow(0.1, 0.5, "G", 0, 0.01, 0.2, 0.05, "G:w1"),
        ExpansionErrorRow(0.1, 0.5, "DG", 0, 0.02, 0.4, 0.05, "DG:w1"),
    ]

    table = table_rows(rows, "G")
    assert table == [(0.1, 0.5, 0.01, 0.2, 0.05, "G:w1")]
    assert len(ERROR_TABLE_COLUMNS) == len(table[0])


@pytest.mark.integration
def test_constant_coefficient_dirichlet_correctors_are_linear(domain, settings) -> None:
    """For constant A the Dirichlet correctors reduce to P_j^beta with zero pressure."""

    field = make_coefficient("constant", {"scale": 1.3}, 2, settings=settings)
    correctors = solve_dirichlet_correctors(field, 0.5, domain, 1e-10, settings=settings, threads=1)

    assert correctors.sup_deviation() < 1e-9
    np.testing.assert_allclose(correctors.pressure, 0.0, atol=1e-8)
    assert correctors.describe()["interpolation"] == "trigonometric"


@pytest.mark.integration
def test_constant_coefficient_expansion_collapses(domain, settings) -> None:
    """With constant A the first-order expansion is exact and w, tau vanish."""

    field = make_coefficient("constant", {"scale": 1.3}, 2, settings=settings)
    cell = periodic_correctors(field, settings)
    problem = StokesProblem(domain=domain, field=field, eps=0.25, force=smooth_force)
    u_eps = solve_stokes(problem, 1e-10, settings=settings)
    u_0 = solve_homogenized(problem, cell.a_hat, 1e-10, settings=settings)

    expansion = build_expansion(u_eps, u_0, cell, "periodic", eps=0.25)
    norms = expansion.norms()

    assert norms["w_l2"] < 1e-8
    assert norms["tau_l2"] < 1e-8
    assert solution_errors(u_eps, u_0)["linf_err"] < 1e-8


def test_linf_rate_of_identical_solutions_is_zero(domain, settings) -> None:
    """The uniform error of a solution against itself vanishes."""

    field = make_coefficient("constant", {"scale": 1.0}, 2, settings=settings)
    solution = solve_stokes(StokesProblem(domain=domain, field=field, eps=0.25, force=smooth_force), settings=settings)

    assert linf_rate(solution, solution) == 0.0


@pytest.fixture()
def fine_domain() -> BoxDomain:
    return BoxDomain.cube(2, 1.0, 32)


def _offsets_from_center(domain: BoxDomain) -> tuple[np.ndarray, np.ndarray]:
    source = (np.asarray(domain.locate_cell(domain.center), dtype=float) + 0.5) * domain.spacing
    return source, source + np.array([[0.1875, 0.0], [0.0, 0.3125]])


@pytest.mark.integration
def test_green_expansion_errors_vanish_for_constant_coefficients(fine_domain, settings) -> None:
    """With constant A every Green's expansion error is at solver precision."""

    field = make_coefficient("constant", {"scale": 1.3}, 2, settings=settings)
    source, probes = _offsets_from_center(fine_domain)

    rows = green_expansion_errors(field, 0.0625, fine_domain, source, probes, 1e-10, settings=settings)

    assert {row.quantity for row in rows} == {"G", "DG", "Pi", "Pi_mean"}
    assert max(row.raw_error for row in rows) < 1e-6


@pytest.mark.integration
def test_second_derivative_errors_vanish_for_constant_coefficients(fine_domain, settings) -> None:
    """With constant A the mixed-derivative and dy Pi expansions are exact."""

    field = make_coefficient("constant", {"scale": 1.3}, 2, settings=settings)
    source, probes = _offsets_from_center(fine_domain)

    rows = second_derivative_expansion_errors(field, 0.0625, fine_domain, source, probes, 1e-10, settings=settings)

    assert {row.quantity for row in rows} == {"DDG", "DyPi"}
    assert max(row.raw_error for row in rows) < 1e-6


@pytest.mark.integration
def test_fundamental_expansion_errors_vanish_for_constant_coefficients(settings) -> None:
    """Large-box fundamental solutions of a constant tensor coincide with the homogenized ones."""

    field = make_coefficient("constant", {"scale": 1.3}, 2, settings=settings)
    offsets = np.array([[0.25, 0.0], [0.0, 0.25]])

    rows = fundamental_expansion_errors(field, 0.05, 4.0, offsets, 1e-10, cells=80, settings=settings)

    assert {row.quantity for row in rows} == {"G", "DG", "Pi"}
    assert max(row.raw_error for row in rows) < 1e-6
    assert all(row.r == pytest.approx(0.25) for row in rows)


def test_fundamental_expansion_rejects_small_box(settings) -> None:
    """The fundamental box must cover sixteen probe radii."""

    field = make_coefficient("constant", {"scale": 1.0}, 2, settings=settings)

    with pytest.raises(PreconditionError):
        fundamental_expansion_errors(field, 0.05, 2.0, np.array([[0.25, 0.0]]), cells=16, settings=settings)
