"""Unit tests for the divergence equation, the truncated maximal function and mollification."""

from __future__ import annotations

import numpy as np
import pytest

from shom.errors import CompatibilityError, PreconditionError
from shom.expand import (
    bump_kernel,
    divergence_mismatch,
    gradient_sup,
    mollify,
    solve_divergence,
    truncated_maximal,
)
from shom.stokes import BoxDomain


@pytest.fixture()
def domain() -> BoxDomain:
    return BoxDomain.cube(2, 1.0, 16)


def _dipole(points: np.ndarray) -> np.ndarray:
    return np.sin(2 * np.pi * points[..., 0]) * np.sin(2 * np.pi * points[..., 1])


def test_zero_datum_gives_zero_velocity(domain, settings) -> None:
    """psi = 0 yields u = 0."""

    solution = solve_divergence(np.zeros(domain.cell_shape), domain, settings=settings)

    assert np.all(solution.velocity == 0)
    assert gradient_sup(solution) == 0


def test_nonzero_mean_is_incompatible(domain, settings) -> None:
    """A datum with nonzero integral raises CompatibilityError carrying the defect."""

    with pytest.raises(CompatibilityError) as excinfo:
        solve_divergence(np.ones(domain.cell_shape), domain, settings=settings)

    assert excinfo.value.defect == pytest.approx(1.0)


def test_divergence_is_matched_at_cell_centers(domain, settings) -> None:
    """The discrete divergence of the solution reproduces psi."""

    psi = _dipole(domain.center_points())
    solution = solve_divergence(_dipole, domain, settings=settings)

    assert divergence_mismatch(solution, psi) < 1e-8
    assert gradient_sup(solution) > 0


def test_divergence_rejects_wrong_shape(domain, settings) -> None:
    """psi needs exactly one value per cell."""

    with pytest.raises(ValueError):
        solve_divergence(np.zeros(10), domain, settings=settings)


def test_maximal_function_of_constant_is_constant(domain) -> None:
    """Averages of a constant are that constant at every radius."""

    result = truncated_maximal(np.full(domain.cell_shape, -3.0), 2 * domain.spacing, domain)

    np.testing.assert_allclose(result, 3.0, rtol=1e-10)


def test_maximal_function_dominates_global_mean(domain) -> None:
    """The largest ball covers the box, so the result is at least the mean of |values|."""

    values = _dipole(domain.center_points())
    result = truncated_maximal(values, domain.spacing, domain)

    assert np.all(result >= np.mean(np.abs(values)) - 1e-12)


def test_maximal_function_rejects_radius_below_spacing(domain) -> None:
    """t must be at least one cell."""

    with pytest.raises(PreconditionError):
        truncated_maximal(np.ones(domain.cell_shape), 0.5 * domain.spacing, domain)


def test_maximal_function_is_nan_outside_region(domain) -> None:
    """Cells outside the region mask are reported as NaN."""

    region = np.zeros(domain.cell_shape, dtype=bool)
    region[4:12, 4:12] = True
    result = truncated_maximal(np.ones(domain.cell_shape), domain.spacing, domain, region=region)

    assert np.all(np.isnan(result[~region]))
    np.testing.assert_allclose(result[region], 1.0, rtol=1e-10)


def test_bump_kernel_has_unit_mass() -> None:
    """The discrete kernel is normalized."""

    kernel = bump_kernel(0.25, 1.0 / 16, 2)

    assert kernel.sum() == pytest.approx(1.0)
    assert kernel.shape == (9, 9)
    assert np.all(kernel >= 0)


def test_mollify_reproduces_constants_up_to_the_boundary(domain) -> None:
    """Boundary renormalization keeps constants exact, including component axes."""

    values = np.stack([np.full(domain.cell_shape, 2.0), np.full(domain.cell_shape, -1.0)])
    smoothed = mollify(values, 4 * domain.spacing, domain)

    assert smoothed.shape == values.shape
    np.testing.assert_allclose(smoothed[0], 2.0, rtol=1e-10)
    np.testing.assert_allclose(smoothed[1], -1.0, rtol=1e-10)


def test_mollify_rejects_small_radius(domain) -> None:
    """The radius must exceed the grid spacing."""

    with pytest.raises(PreconditionError):
        mollify(np.ones(domain.cell_shape), domain.spacing, domain)


def test_mollify_rejects_mismatched_cells(domain) -> None:
    """Values must end with the cell axes of the box."""

    with pytest.raises(ValueError):
        mollify(np.ones((8, 8)), 4 * domain.spacing, domain)
