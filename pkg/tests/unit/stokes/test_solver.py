"""Unit tests for the staggered-grid Dirichlet Stokes solver and its estimate checks."""

from __future__ import annotations

import numpy as np
import pytest

from shom.coeff import identity_tensor, make_coefficient
from shom.errors import CompatibilityError, PreconditionError
from shom.stokes import (
    BoxDomain,
    StokesProblem,
    caccioppoli_check,
    check_compatibility,
    energy_constant,
    lipschitz_oscillation_check,
    manufactured_errors,
    manufactured_velocity,
    maximum_principle_ratio,
    solve_homogenized,
    solve_stokes,
    staggered_grid,
)


def _shear(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return np.stack([pts[..., 1], np.zeros(pts.shape[:-1])], axis=-1)


def _tangential(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return np.stack([np.sin(2 * np.pi * pts[..., 1]), np.sin(2 * np.pi * pts[..., 0])], axis=-1)


def test_box_domain_rejects_non_cubic_cells() -> None:
    """Cells must have the same spacing along every axis."""

    with pytest.raises(PreconditionError):
        BoxDomain(dimension=2, lengths=(1.0, 2.0), cells=(8, 8))


def test_box_domain_requires_minimum_cells() -> None:
    """Boxes need at least eight cells per axis."""

    with pytest.raises(PreconditionError):
        BoxDomain.cube(2, 1.0, 4)


def test_problem_requires_exactly_one_operator() -> None:
    """A problem carries either an oscillating field or a constant tensor."""

    with pytest.raises(PreconditionError):
        StokesProblem(domain=BoxDomain.cube(2, 1.0, 8))


def test_zero_data_gives_zero_solution(settings) -> None:
    """Homogeneous data produce the zero solution without iterating."""

    problem = StokesProblem(domain=BoxDomain.cube(2, 1.0, 8), tensor=identity_tensor(2))
    solution = solve_stokes(problem, settings=settings)

    assert np.all(solution.velocity == 0)
    assert np.all(solution.pressure == 0)
    assert solution.stats["iterations"] == 0


def test_linear_shear_flow_is_reproduced_exactly(settings) -> None:
    """The scheme reproduces divergence-free linear velocities with zero pressure."""

    problem = StokesProblem(domain=BoxDomain.cube(2, 1.0, 8), tensor=identity_tensor(2), boundary=_shear)
    solution = solve_stokes(problem, settings=settings, method="direct")
    grid = staggered_grid(problem.domain)

    exact = grid.sample_vector(_shear, np.arange(grid.size))
    np.testing.assert_allclose(solution.velocity, exact, atol=1e-10)
    np.testing.assert_allclose(solution.pressure, 0.0, atol=1e-9)
    assert solution.divergence_residual < 1e-10


def test_incompatible_divergence_is_rejected(settings) -> None:
    """A divergence with nonzero integral and zero boundary data is incompatible."""

    problem = StokesProblem(
        domain=BoxDomain.cube(2, 1.0, 8),
        tensor=identity_tensor(2),
        divergence=lambda points: np.ones(points.shape[:-1]),
    )

    assert check_compatibility(problem) == pytest.approx(1.0)
    with pytest.raises(CompatibilityError) as excinfo:
        solve_stokes(problem, settings=settings)
    assert excinfo.value.defect == pytest.approx(1.0)


def test_pressure_has_zero_mean(settings) -> None:
    """The returned pressure is normalized to mean zero."""

    problem = StokesProblem(
        domain=BoxDomain.cube(2, 1.0, 8),
        tensor=identity_tensor(2),
        force=lambda points: np.stack([np.cos(np.pi * points[..., 1]), points[..., 0]], axis=-1),
    )
    solution = solve_stokes(problem, settings=settings)

    assert abs(solution.pressure_mean()) < 1e-12
    assert solution.residual < 1e-8


def test_homogenized_solve_requires_a_tensor(settings) -> None:
    """Solving the homogenized problem without a constant tensor is an error."""

    field = make_coefficient("trig", {}, 2, settings=settings)
    problem = StokesProblem(domain=BoxDomain.cube(2, 1.0, 8), field=field, eps=0.25)

    with pytest.raises(ValueError):
        solve_homogenized(problem)


def test_maximum_principle_ratio_is_at_least_one(settings) -> None:
    """Velocity maxima include the boundary values, so the ratio never drops below one."""

    field = make_coefficient("trig", {"rho": 0.3}, 2, settings=settings)
    problem = StokesProblem(domain=BoxDomain.cube(2, 1.0, 16), field=field, eps=0.25, boundary=_tangential)
    solution = solve_stokes(problem, settings=settings)

    ratio = maximum_principle_ratio(problem, solution)
    assert 1.0 <= ratio < 10.0
    assert energy_constant(problem, solution) > 0


def test_caccioppoli_rejects_balls_leaving_the_box(settings) -> None:
    """The ball must lie inside the box."""

    problem = StokesProblem(domain=BoxDomain.cube(2, 1.0, 8), tensor=identity_tensor(2), boundary=_shear)
    solution = solve_stokes(problem, settings=settings)

    with pytest.raises(PreconditionError):
        caccioppoli_check(solution, problem, np.array([0.1, 0.5]), 0.3)


def test_caccioppoli_inequality_holds_for_shear_flow(settings) -> None:
    """Interior gradient energy is bounded by the scaled velocity energy."""

    problem = StokesProblem(domain=BoxDomain.cube(2, 1.0, 16), tensor=identity_tensor(2), boundary=_shear)
    solution = solve_stokes(problem, settings=settings)

    lhs, rhs = caccioppoli_check(solution, problem, np.array([0.5, 0.5]), 0.4)
    assert 0 < lhs <= 50.0 * rhs


def test_lipschitz_check_measures_shear_gradient(settings) -> None:
    """Shear flow has unit gradient and constant pressure in every interior ball."""

    problem = StokesProblem(domain=BoxDomain.cube(2, 1.0, 16), tensor=identity_tensor(2), boundary=_shear)
    solution = solve_stokes(problem, settings=settings)

    estimate = lipschitz_oscillation_check(solution, problem, np.array([0.5, 0.5]), 0.125)

    assert estimate.gradient_max == pytest.approx(1.0, rel=1e-8)
    assert estimate.pressure_oscillation < 1e-8
    assert estimate.cells > 0
    assert estimate.data_bound > 0


@pytest.mark.integration
def test_direct_and_krylov_solutions_agree(settings) -> None:
    """Both linear solvers return the same discrete solution."""

    field = make_coefficient("trig", {"rho": 0.3}, 2, settings=settings)
    problem = StokesProblem(
        domain=BoxDomain.cube(2, 1.0, 16),
        field=field,
        eps=0.25,
        force=lambda points: np.stack([np.cos(np.pi * points[..., 1]), np.cos(np.pi * points[..., 0])], axis=-1),
    )

    direct = solve_stokes(problem, 1e-11, settings=settings, method="direct")
    krylov = solve_stokes(problem, 1e-11, settings=settings, method="krylov")

    np.testing.assert_allclose(krylov.velocity, direct.velocity, atol=1e-6)
    np.testing.assert_allclose(krylov.pressure, direct.pressure, atol=1e-5)


def test_manufactured_velocity_vanishes_on_the_boundary() -> None:
    """The manufactured stream-function velocity satisfies the homogeneous Dirichlet condition."""

    t = np.linspace(0.0, 1.0, 9)
    edges = np.concatenate(
        [
            np.stack([t, np.zeros_like(t)], axis=-1),
            np.stack([t, np.ones_like(t)], axis=-1),
            np.stack([np.zeros_like(t), t], axis=-1),
            np.stack([np.ones_like(t), t], axis=-1),
        ]
    )

    np.testing.assert_allclose(manufactured_velocity(edges), 0.0, atol=1e-12)


@pytest.mark.integration
def test_box_solver_is_second_order_on_manufactured_solution(settings) -> None:
    """Halving h divides the manufactured velocity error by about four and shrinks the pressure error."""

    errors = manufactured_errors((16, 32, 64), 1e-11, settings=settings)
    h = np.array([row[0] for row in errors])
    err = np.array([row[1] for row in errors])
    pressure_err = np.array([row[2] for row in errors])

    slope = np.polyfit(np.log(h), np.log(err), 1)[0]

    assert err[-1] < err[0]
    assert slope == pytest.approx(2.0, abs=0.35)
    assert np.all(np.diff(pressure_err) < 0.0)
    assert pressure_err[-1] < 0.05
