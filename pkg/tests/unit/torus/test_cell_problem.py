"""Unit tests for the periodic cell problem and the dual correctors."""

from __future__ import annotations

from itertools import product

import numpy as np
import pytest

from shom.coeff import ellipticity_report, make_coefficient
from shom.errors import PreconditionError
from shom.torus import (
    TorusGrid,
    antisymmetry_defect,
    compute_correctors,
    corrector_difference,
    dual_identity_residual,
    effective_bounds,
    flux_divergence_residual,
    pressure_potential_residual,
)
from shom.torus.cell import CellOperator
from shom.torus.grid import divergence, forward, gradient, l2_norm


@pytest.fixture()
def trig_correctors(settings):
    field = make_coefficient("trig", {"rho": 0.4}, 2, settings=settings)
    return compute_correctors(field, TorusGrid(dimension=2, size=16), 1e-10, settings=settings)


def test_torus_grid_requires_power_of_two() -> None:
    """Grid sizes must be powers of two no smaller than eight."""

    with pytest.raises(PreconditionError):
        TorusGrid(dimension=2, size=12)
    with pytest.raises(PreconditionError):
        TorusGrid(dimension=2, size=4)


def test_constant_coefficient_has_zero_correctors(settings) -> None:
    """For constant A the correctors vanish and the effective tensor is A."""

    field = make_coefficient("constant", {"scale": 1.7}, 2, settings=settings)
    correctors = compute_correctors(field, TorusGrid(dimension=2, size=8), settings=settings)

    assert np.all(correctors.chi == 0)
    assert np.all(correctors.pi == 0)
    np.testing.assert_allclose(correctors.a_hat, field.constant_value(), atol=1e-12)


def test_correctors_are_mean_zero_and_solve_the_cell_system(trig_correctors) -> None:
    """Correctors have zero cell mean and meet the residual tolerance."""

    chi_mean = trig_correctors.chi.mean(axis=(-2, -1))
    pi_mean = trig_correctors.pi.mean(axis=(-2, -1))

    assert np.max(np.abs(chi_mean)) < 1e-12
    assert np.max(np.abs(pi_mean)) < 1e-12
    assert trig_correctors.max_residual <= 1e-10
    assert trig_correctors.chi.shape == (2, 2, 2, 16, 16)


def test_effective_tensor_is_symmetric_for_symmetric_coefficients(trig_correctors) -> None:
    """a_hat_ij^{ab} = a_hat_ji^{ba} when A is symmetric."""

    a_hat = trig_correctors.a_hat
    np.testing.assert_allclose(a_hat, np.transpose(a_hat, (1, 0, 3, 2)), atol=1e-8)


def test_effective_tensor_is_positive_on_trace_free_matrices(trig_correctors) -> None:
    """The effective quadratic form is positive on trace-free directions."""

    xi = np.array([[0.0, 1.0], [0.0, 0.0]])
    value = np.einsum("ijab,ia,jb->", trig_correctors.a_hat, xi, xi)

    assert value > 0.5 - 1e-8


def test_effective_bounds_of_constant_tensor_equal_its_scale(settings) -> None:
    """A scaled identity tensor has a single trace-free eigenvalue."""

    field = make_coefficient("constant", {"scale": 1.7}, 2, settings=settings)

    lowest, highest = effective_bounds(field.constant_value())

    assert lowest == pytest.approx(1.7)
    assert highest == pytest.approx(1.7)


def test_effective_bounds_lie_inside_ellipticity_window(trig_correctors, settings) -> None:
    """Homogenization does not leave the ellipticity window of the coefficient."""

    field = make_coefficient("trig", {"rho": 0.4}, 2, settings=settings)
    report = ellipticity_report(field, settings.coeff.ellipticity_samples, settings=settings)

    lowest, highest = effective_bounds(trig_correctors.a_hat)

    assert report.mu_lo * (1 - 1e-6) <= lowest <= highest <= report.mu_hi * (1 + 1e-6)


def test_flux_tensor_identities_hold(trig_correctors) -> None:
    """b is divergence balanced by pi, and phi, q reproduce b with phi antisymmetric."""

    assert flux_divergence_residual(trig_correctors) < 1e-8
    assert dual_identity_residual(trig_correctors) < 1e-8
    assert pressure_potential_residual(trig_correctors) < 1e-8
    assert antisymmetry_defect(trig_correctors.phi) < 1e-12


def test_corrector_difference_shrinks_under_refinement(settings) -> None:
    """Spectral refinement changes a smooth corrector only marginally."""

    field = make_coefficient("trig", {"rho": 0.4}, 2, settings=settings)
    coarse = compute_correctors(field, TorusGrid(dimension=2, size=16), 1e-10, settings=settings)
    fine = compute_correctors(field, TorusGrid(dimension=2, size=32), 1e-10, settings=settings)

    assert corrector_difference(coarse, fine) < 1e-6


def test_scattered_interpolation_matches_grid_values(trig_correctors) -> None:
    """Trigonometric interpolation reproduces grid values at grid points."""

    points = np.array([[0.0, 0.0], [0.25, 0.5], [0.5625, 0.9375]])
    values = trig_correctors.chi_at(points)
    indices = np.rint(points * 16).astype(int) % 16

    for column, (i, j) in enumerate(indices):
        np.testing.assert_allclose(values[..., column], trig_correctors.chi[..., i, j], atol=1e-10)


def test_cell_residual_is_the_unweighted_l2_norm(settings) -> None:
    """The returned correctors satisfy -div sigma + grad pi = 0 to tol in the plain discrete L2 norm."""

    field = make_coefficient("trig", {"rho": 0.45}, 2, settings=settings)
    grid = TorusGrid(dimension=2, size=32)
    correctors = compute_correctors(field, grid, 1e-8, settings=settings)
    operator = CellOperator(field, grid, dealias=correctors.dealias)

    for j, beta in product(range(2), range(2)):
        sigma_hat = operator.flux(forward(correctors.chi[j, beta], 2), j, beta)
        pi_hat = forward(correctors.pi[j, beta], 2)
        residual = -divergence(np.swapaxes(sigma_hat, 0, 1), grid) + gradient(pi_hat, grid)

        assert correctors.residuals[j, beta] <= 1e-8
        assert l2_norm(residual) <= 2e-8
