"""Unit tests for built-in coefficient families and the ellipticity scan."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st
from pydantic import ValidationError

from shom.coeff import (
    ElasticityTensor,
    available_families,
    check_ellipticity,
    coefficient_from_config,
    elasticity_reduce,
    load_family_config,
    make_coefficient,
    periodicity_defect,
)
from shom.coeff.fields import identity_tensor, quadratic_form, swap_tensor, trace_tensor
from shom.errors import EllipticityViolationError, MalformedTensorError


def test_available_families_lists_builtins() -> None:
    """Every built-in family is registered."""

    assert set(available_families()) >= {"constant", "trig", "smoothed-checkerboard", "isotropic-elasticity"}


def test_unknown_family_is_rejected(settings) -> None:
    """Unknown names raise MalformedTensorError."""

    with pytest.raises(MalformedTensorError):
        make_coefficient("honeycomb", {}, 2, settings=settings)


def test_trig_family_defaults_are_elliptic_and_periodic(settings) -> None:
    """The default trig field is symmetric, periodic and bounded by 1 +/- rho."""

    field = make_coefficient("trig", {}, 2, settings=settings)
    mu_lo, mu_hi = check_ellipticity(field, 512, settings=settings)

    assert field.family == "trig"
    assert field.symmetric
    assert 0.5 - 1e-9 <= mu_lo <= mu_hi <= 1.5 + 1e-9
    assert periodicity_defect(field) < 1e-12


def test_trig_with_large_amplitude_reports_witness(settings) -> None:
    """A modulation that drives the profile negative fails with the witness point."""

    with pytest.raises(EllipticityViolationError) as excinfo:
        make_coefficient("trig", {"rho": 1.5}, 2, settings=settings)

    assert excinfo.value.value <= 0
    assert excinfo.value.y.shape == (2,)
    assert excinfo.value.xi.shape == (2, 2)


def test_trig_modes_must_have_bounded_sup_norm(settings) -> None:
    """The cosine polynomial must have coefficients summing to at most one."""

    modes = [{"coefficient": 0.8, "wavevector": [1, 0]}, {"coefficient": 0.8, "wavevector": [0, 1]}]
    with pytest.raises(ValidationError):
        make_coefficient("trig", {"modes": modes}, 2, settings=settings)


def test_constant_family_scales_identity(settings) -> None:
    """The constant family returns scale times the Laplacian tensor."""

    field = make_coefficient("constant", {"scale": 2.0}, 3, settings=settings)

    assert field.constant
    np.testing.assert_allclose(field.constant_value(), 2.0 * identity_tensor(3))
    assert field.mu == pytest.approx(0.5)


def test_constant_tensor_with_wrong_shape_is_rejected(settings) -> None:
    """Explicit tensors must be d^4."""

    with pytest.raises(MalformedTensorError):
        make_coefficient("constant", {"tensor": np.eye(2).tolist()}, 2, settings=settings)


def test_elasticity_family_is_strongly_elliptic_after_reduction(settings) -> None:
    """The reduced elasticity tensor is positive on all matrices, not just symmetric ones."""

    field = make_coefficient("isotropic-elasticity", {"lam": 1.0, "shear": 0.5}, 2, settings=settings)
    antisymmetric = np.array([[0.0, 1.0], [-1.0, 0.0]])

    value = quadratic_form(field.evaluate(np.array([0.3, 0.7])), antisymmetric)
    assert value > 0


def test_adjoint_swaps_index_pairs(settings) -> None:
    """a*_ij^{ab} = a_ji^{ba}."""

    field = make_coefficient("isotropic-elasticity", {"lam": 2.0, "shear": 1.0}, 2, settings=settings)
    point = np.array([0.1, 0.4])

    a = field.evaluate(point)
    a_star = field.adjoint().evaluate(point)
    np.testing.assert_allclose(a_star, np.transpose(a, (1, 0, 3, 2)))


def test_family_config_file_round_trip(tmp_path, settings) -> None:
    """JSON family definitions build the same field as direct calls."""

    path = tmp_path / "family.json"
    path.write_text(json.dumps({"family": "smoothed-checkerboard", "params": {"rho": 0.3}, "dimension": 2}))

    field = coefficient_from_config(load_family_config(path), settings=settings)
    assert field.family == "smoothed-checkerboard"
    assert field.params["rho"] == pytest.approx(0.3)


def test_family_config_requires_family_key(tmp_path) -> None:
    """Definitions without a family name are rejected."""

    path = tmp_path / "family.json"
    path.write_text(json.dumps({"params": {}}))

    with pytest.raises(ValueError):
        load_family_config(path)


@hypothesis_settings(max_examples=25, deadline=None)
@given(
    rho=st.floats(min_value=-0.9, max_value=0.9),
    y=st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=2, max_size=2),
)
def test_trig_quadratic_form_stays_within_bounds(rho: float, y: list[float]) -> None:
    """For admissible rho the quadratic form on unit matrices lies in [1 - |rho|, 1 + |rho|]."""

    field = make_coefficient("trig", {"rho": rho}, 2)
    xi = np.array([[0.6, 0.0], [0.0, 0.8]])
    value = quadratic_form(field.evaluate(np.asarray(y)), xi)

    assert 1.0 - abs(rho) - 1e-12 <= value <= 1.0 + abs(rho) + 1e-12


def _modulated_elasticity(lam: float, shear: float, rho: float) -> ElasticityTensor:
    base = lam * trace_tensor(2) + shear * (identity_tensor(2) + swap_tensor(2))

    def evaluator(y: np.ndarray) -> np.ndarray:
        weight = 1.0 + rho * np.cos(2 * np.pi * y[..., 0]) * np.cos(2 * np.pi * y[..., 1])
        return weight[..., None, None, None, None] * base

    return ElasticityTensor(dimension=2, evaluator=evaluator, mu=(1.0 - abs(rho)) * shear)


@hypothesis_settings(max_examples=25, deadline=None)
@given(
    lam=st.floats(min_value=0.0, max_value=3.0),
    shear=st.floats(min_value=0.1, max_value=2.0),
    rho=st.floats(min_value=-0.8, max_value=0.8),
    v=st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=2, max_size=2),
    y=st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=2),
)
def test_elasticity_reduction_keeps_form_on_symmetric_rank_one_matrices(
    lam: float, shear: float, rho: float, v: list[float], y: list[float]
) -> None:
    """The reduced tensor and B agree on every xi = v (x) v."""

    tensor = _modulated_elasticity(lam, shear, rho)
    reduced = elasticity_reduce(tensor)
    xi = np.outer(v, v)
    point = np.asarray(y)

    expected = quadratic_form(tensor.evaluate(point), xi)
    assert quadratic_form(reduced.evaluate(point), xi) == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_elasticity_correction_has_no_divergence() -> None:
    """The added constant tensor sends every Hessian to zero, so Dirichlet solutions are unchanged."""

    tensor = _modulated_elasticity(1.0, 0.5, 0.3)
    point = np.array([0.2, 0.6])
    correction = elasticity_reduce(tensor).evaluate(point) - tensor.evaluate(point)
    hessian = np.random.default_rng(4).normal(size=(2, 2, 2))
    hessian = 0.5 * (hessian + np.swapaxes(hessian, 1, 2))

    np.testing.assert_allclose(np.einsum("ijab,bij->a", correction, hessian), 0.0, atol=1e-12)
    assert np.max(np.abs(correction)) > 0.0


def test_elasticity_reduction_rejects_tensor_without_minor_symmetry() -> None:
    """A tensor that is not symmetric under i <-> alpha is not an elasticity tensor."""

    tensor = ElasticityTensor(
        dimension=2,
        evaluator=lambda y: np.broadcast_to(identity_tensor(2), y.shape[:-1] + (2, 2, 2, 2)),
        mu=1.0,
    )

    with pytest.raises(MalformedTensorError):
        elasticity_reduce(tensor)


def test_reduced_elasticity_is_strongly_elliptic_in_three_dimensions(settings) -> None:
    """The reduced isotropic tensor has a positive sampled lower bound in 3D."""

    field = make_coefficient("isotropic-elasticity", {"lam": 1.0, "shear": 0.5}, 3, settings=settings)

    mu_lo, mu_hi = check_ellipticity(field, settings=settings)

    assert 0 < mu_lo <= mu_hi
    assert mu_lo >= field.mu - 1e-12
