"""Unit tests for discrete Green's function columns, decay measurements and the column cache."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from shom.coeff import identity_tensor, make_coefficient
from shom.errors import PreconditionError
from shom.green import (
    DECAY_COLUMNS,
    ColumnCache,
    adjoint_green_column,
    decay_profile,
    dy_green_column,
    dyadic_probes,
    far_field_consistency,
    far_field_constant,
    far_field_decay,
    fundamental_column,
    green_column,
    representation_check,
    stokeslet,
    stokeslet_check,
    symmetry_error,
)
from shom.stokes import BoxDomain, StokesProblem


@pytest.fixture()
def domain() -> BoxDomain:
    return BoxDomain.cube(2, 1.0, 16)


def test_source_too_close_to_boundary_is_rejected(domain, settings) -> None:
    """Sources within the minimum separation of the boundary raise PreconditionError."""

    with pytest.raises(PreconditionError):
        green_column(identity_tensor(2), None, domain, np.array([0.1, 0.5]), 0, settings=settings)


def test_component_out_of_range_is_rejected(domain, settings) -> None:
    """Components index the velocity dimension."""

    with pytest.raises(PreconditionError):
        green_column(identity_tensor(2), None, domain, np.array([0.5, 0.5]), 2, settings=settings)


def test_column_source_snaps_to_cell_center(domain, settings) -> None:
    """The source is moved to the center of its containing cell."""

    column = green_column(identity_tensor(2), None, domain, np.array([0.51, 0.49]), 0, settings=settings)

    np.testing.assert_allclose(column.source, [0.53125, 0.46875])
    assert column.source_cell == (8, 7)
    assert abs(column.pressure_mean()) < 1e-12


def test_green_function_symmetry_for_symmetric_coefficients(domain, settings) -> None:
    """G*^{ab}(x, y) equals G^{ba}(y, x) up to solver tolerance."""

    field = make_coefficient("trig", {"rho": 0.3}, 2, settings=settings)
    x = np.array([0.34, 0.34])
    y = np.array([0.66, 0.59])

    column = green_column(field, 0.25, domain, x, 0, 1e-11, settings=settings)
    adjoint = adjoint_green_column(field, 0.25, domain, y, 1, 1e-11, settings=settings)

    assert symmetry_error(adjoint, column) < 1e-6


def test_symmetry_error_requires_one_adjoint_column(domain, settings) -> None:
    """Two regular columns cannot be compared for symmetry."""

    first = green_column(identity_tensor(2), None, domain, np.array([0.34, 0.34]), 0, settings=settings)
    second = green_column(identity_tensor(2), None, domain, np.array([0.66, 0.66]), 0, settings=settings)

    with pytest.raises(PreconditionError):
        symmetry_error(first, second)


def test_representation_matches_direct_solve(domain, settings) -> None:
    """u(x) equals the quadrature of G(x, .) against the body force."""

    problem = StokesProblem(
        domain=domain,
        tensor=identity_tensor(2),
        force=lambda points: np.stack([np.cos(np.pi * points[..., 1]), np.sin(np.pi * points[..., 0])], axis=-1),
    )
    result = representation_check(problem, np.array([0.5, 0.5]), 1e-11, settings=settings)

    assert result["rel_error"] < 1e-6


def test_representation_check_rejects_boundary_data(domain, settings) -> None:
    """Only body-force data are represented."""

    problem = StokesProblem(
        domain=domain,
        tensor=identity_tensor(2),
        boundary=lambda points: np.zeros(points.shape),
    )

    with pytest.raises(PreconditionError):
        representation_check(problem, np.array([0.5, 0.5]), settings=settings)


def test_decay_profile_skips_source_cell(domain, settings, caplog) -> None:
    """Probes in the source cell are excluded with a warning; others yield finite samples."""

    column = green_column(identity_tensor(2), None, domain, np.array([0.5, 0.5]), 0, settings=settings)
    probes = np.vstack([column.source, dyadic_probes(column, 0.25, 0.25)])

    with caplog.at_level(logging.WARNING):
        samples = decay_profile(column, probes, settings=settings)

    assert len(samples) == 1
    assert "source cell" in caplog.text
    row = samples[0].as_row()
    assert len(row) == len(DECAY_COLUMNS)
    assert samples[0].abs_g > 0
    assert np.isnan(samples[0].abs_dy_g)
    assert np.isnan(samples[0].abs_dxdy_g)


def test_dyadic_probes_double_the_radius(domain, settings) -> None:
    """Probe radii grow by factors of two up to r_max."""

    column = green_column(identity_tensor(2), None, domain, np.array([0.5, 0.5]), 0, settings=settings)
    probes = dyadic_probes(column, 0.0625, 0.25, direction=np.array([1.0, 0.0]))

    radii = np.linalg.norm(probes - column.source, axis=-1)
    np.testing.assert_allclose(radii, [0.0625, 0.125, 0.25])


def test_dy_column_holds_divided_difference(domain, settings) -> None:
    """The source derivative column is (G(., y + h e_l) - G(., y)) / h."""

    column = green_column(identity_tensor(2), None, domain, np.array([0.5, 0.5]), 0, settings=settings)
    dy = dy_green_column(column, 1, settings=settings)
    shifted = green_column(identity_tensor(2), None, domain, column.source + [0.0, 0.0625], 0, settings=settings)

    assert dy.derivative == 1
    np.testing.assert_allclose(dy.velocity, (shifted.velocity - column.velocity) / 0.0625, atol=1e-8)
    with pytest.raises(PreconditionError):
        dy_green_column(dy, 0, settings=settings)


def test_decay_profile_measures_mixed_derivatives_with_dy_columns(domain, settings) -> None:
    """Source-derivative columns fill the y-gradient and mixed-derivative fields."""

    column = green_column(identity_tensor(2), None, domain, np.array([0.5, 0.5]), 0, settings=settings)
    dy_columns = [dy_green_column(column, ell, settings=settings) for ell in range(2)]

    samples = decay_profile(column, dyadic_probes(column, 0.25, 0.25), dy_columns=dy_columns, settings=settings)

    assert len(samples) == 1
    assert samples[0].abs_dy_g > 0
    assert samples[0].abs_dxdy_g > 0
    assert np.isfinite(samples[0].abs_dxdy_g)


def test_cache_round_trip_returns_stored_column(domain, settings, tmp_path) -> None:
    """A cached column is reloaded instead of re-solved."""

    cache = ColumnCache(tmp_path / "cache", settings=settings)
    first = green_column(identity_tensor(2), None, domain, np.array([0.5, 0.5]), 1, settings=settings, cache=cache)
    second = green_column(identity_tensor(2), None, domain, np.array([0.5, 0.5]), 1, settings=settings, cache=cache)

    assert second.stats.get("cached") is True
    np.testing.assert_array_equal(second.velocity, first.velocity)
    assert list((tmp_path / "cache").rglob("*.shom"))


def test_stokeslet_three_dimensional_values() -> None:
    """Gamma(e_1) = (I + e_1 e_1) / (8 pi) and Q(e_1) = e_1 / (4 pi) in three dimensions."""

    gamma, q = stokeslet(np.array([[1.0, 0.0, 0.0]]), np.zeros(3))

    expected = (np.eye(3) + np.diag([1.0, 0.0, 0.0])) / (8 * np.pi)
    np.testing.assert_allclose(gamma[0], expected)
    np.testing.assert_allclose(q[0], [1.0 / (4 * np.pi), 0.0, 0.0])


def test_stokeslet_is_singular_at_source() -> None:
    """Evaluating at the source is an error."""

    with pytest.raises(PreconditionError):
        stokeslet(np.zeros((1, 2)), np.zeros(2))


def test_fundamental_column_requires_large_box(settings) -> None:
    """The box side must be at least sixteen measurement radii."""

    with pytest.raises(PreconditionError):
        fundamental_column(identity_tensor(2), None, 1.0, 0, dimension=2, cells=16, measurement_radius=0.1)


def test_fundamental_column_records_far_field_pressure(settings) -> None:
    """The shell average and contamination are recorded on the column."""

    column = fundamental_column(identity_tensor(2), None, 2.0, 0, dimension=2, cells=32, settings=settings)

    assert column.measurement_radius == pytest.approx(0.125)
    assert column.contamination == pytest.approx(0.125 / 2.0)
    assert column.shell[0] == pytest.approx(0.5)
    assert np.isfinite(column.far_field_pressure)


def test_far_field_constant_is_the_shell_average(settings) -> None:
    """Q-bar of a fundamental column is the far_field_constant over its shell; empty shells are rejected."""

    column = fundamental_column(identity_tensor(2), None, 2.0, 0, dimension=2, cells=32, settings=settings)

    assert far_field_constant(column, *column.shell) == pytest.approx(column.far_field_pressure)
    with pytest.raises(PreconditionError):
        far_field_constant(column, 5.0, 6.0)


@pytest.mark.integration
def test_far_field_constant_agrees_across_shells_for_identity(settings) -> None:
    """For A = I the shell averages over [L/4, L/3] and [L/5, L/4] agree within the boundary contamination."""

    columns = [
        fundamental_column(identity_tensor(2), None, 2.0, beta, 1e-10, dimension=2, cells=32, settings=settings)
        for beta in range(2)
    ]

    consistency = far_field_consistency(columns, [(0.25, 1.0 / 3.0), (0.2, 0.25)])

    assert len(consistency["constants"]) == 2
    assert all(len(values) == 2 for values in consistency["constants"])
    assert consistency["contamination"] == pytest.approx(0.0625)
    assert max(consistency["relative_spread"]) <= consistency["contamination"]


def test_far_field_decay_samples_cell_centers(settings) -> None:
    """Radii are measured to the sampled cell centers and offsets leaving the box are rejected."""

    column = fundamental_column(identity_tensor(2), None, 2.0, 0, dimension=2, cells=32, settings=settings)
    offsets = np.array([[0.125, 0.0], [0.25, 0.0]])

    radii, values = far_field_decay([column], offsets)

    np.testing.assert_allclose(radii, [0.125, 0.25])
    assert np.all(values > 0)
    with pytest.raises(PreconditionError):
        far_field_decay([column], np.array([[5.0, 0.0]]))


@pytest.mark.integration
def test_identity_column_matches_stokeslet_in_two_dimensions(settings) -> None:
    """G + H and Pi + H_p reproduce the 2D stokeslet at probes eight and more cells from the source."""

    domain = BoxDomain.cube(2, 1.0, 32)
    column = green_column(identity_tensor(2), None, domain, domain.center, 0, 1e-10, settings=settings)
    probes = column.source + np.array([[0.25, 0.0], [0.25, 0.25], [0.3125, 0.125]])

    errors = stokeslet_check(column, probes, 1e-10, settings=settings)

    assert np.max(errors["velocity_rel_error"]) <= settings.verdicts.stokeslet_velocity_rel_tol
    assert np.max(errors["pressure_rel_error"]) <= settings.verdicts.stokeslet_pressure_rel_tol
