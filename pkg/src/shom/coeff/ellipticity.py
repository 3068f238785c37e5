"""Sampled ellipticity and periodicity checks, plus the incompressible-elasticity reduction."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from shom.errors import EllipticityViolationError, MalformedTensorError
from shom.settings import Settings, get_settings

from .fields import CoefficientField, ElasticityTensor, as_matrix, quadratic_form, swap_tensor, trace_tensor

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class EllipticityReport:
    """Empirical ellipticity constants together with the sample that attains the lower one."""

    mu_lo: float
    mu_hi: float
    witness_y: np.ndarray
    witness_xi: np.ndarray
    samples: int

    def as_tuple(self) -> tuple[float, float]:
        return self.mu_lo, self.mu_hi


def sample_points(d: int, samples: int, seed: int) -> np.ndarray:
    """Lattice plus pseudo-random points in the unit cell.

    The lattice has an even number of nodes per axis so that half-period
    extrema of trigonometric coefficients are hit exactly.
    """

    if samples < 1:
        raise ValueError(f"samples must be >= 1 (got {samples})")
    per_axis = max(2, int(round(samples ** (1.0 / d))))
    per_axis += per_axis % 2
    axes = [np.arange(per_axis) / per_axis] * d
    lattice = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    rng = np.random.default_rng(seed)
    return np.concatenate([lattice, rng.random((samples, d))], axis=0)


def sample_directions(d: int, count: int, seed: int) -> np.ndarray:
    """Canonical basis matrices followed by normalized pseudo-random matrices xi[n, i, a]."""

    basis = np.zeros((d * d, d, d))
    for index in range(d * d):
        basis[index].flat[index] = 1.0
    rng = np.random.default_rng(seed + 1)
    random = rng.standard_normal((count, d, d))
    random /= np.linalg.norm(random.reshape(count, -1), axis=1)[:, None, None]
    return np.concatenate([basis, random], axis=0)


def check_ellipticity(
    field: CoefficientField,
    samples: int | None = None,
    *,
    seed: int | None = None,
    settings: Settings | None = None,
    raise_on_violation: bool = True,
) -> tuple[float, float]:
    """Return the empirical constants (mu_lo, mu_hi) of ``field``.

    Rayleigh quotients are taken over the basis matrices and a fixed
    pseudo-random family of directions, then refined by the exact symmetric
    eigenvalues at each sampled point, so a constant field reports its exact
    eigen-bounds.
    """

    report = ellipticity_report(field, samples, seed=seed, settings=settings)
    if raise_on_violation and report.mu_lo <= 0:
        raise EllipticityViolationError(
            f"coefficient family '{field.family}' is not strongly elliptic (mu_lo={report.mu_lo:.3e})",
            y=report.witness_y,
            xi=report.witness_xi,
            value=report.mu_lo,
        )
    return report.as_tuple()


def ellipticity_report(
    field: CoefficientField,
    samples: int | None = None,
    *,
    seed: int | None = None,
    settings: Settings | None = None,
) -> EllipticityReport:
    """Compute :func:`check_ellipticity` data without raising."""

    resolved = settings or get_settings()
    count = samples if samples is not None else resolved.coeff.ellipticity_samples
    rng_seed = seed if seed is not None else resolved.coeff.ellipticity_seed
    d = field.dimension
    points = sample_points(d, count, rng_seed)
    tensors = field.evaluate(points)

    directions = sample_directions(d, 64, rng_seed)
    rayleigh = np.einsum("nijab,kia,kjb->nk", tensors, directions, directions)

    matrices = as_matrix(tensors)
    sym = 0.5 * (matrices + np.swapaxes(matrices, -1, -2))
    eigvals, eigvecs = np.linalg.eigh(sym)

    lo_index = int(np.argmin(eigvals[:, 0]))
    mu_lo = float(min(eigvals[lo_index, 0], rayleigh.min()))
    mu_hi = float(max(eigvals[:, -1].max(), rayleigh.max()))
    witness_xi = eigvecs[lo_index, :, 0].reshape(d, d)
    LOGGER.debug("Ellipticity scan family=%s samples=%s mu_lo=%.6g mu_hi=%.6g", field.family, len(points), mu_lo, mu_hi)
    return EllipticityReport(
        mu_lo=mu_lo,
        mu_hi=mu_hi,
        witness_y=points[lo_index],
        witness_xi=witness_xi,
        samples=len(points),
    )


def periodicity_defect(field: CoefficientField, samples: int = 64, *, seed: int = 0) -> float:
    """Largest |A(y + z) - A(y)| over sampled y and small integer shifts z."""

    d = field.dimension
    rng = np.random.default_rng(seed)
    points = rng.random((samples, d))
    shifts = rng.integers(-3, 4, size=(samples, d)).astype(float)
    return float(np.max(np.abs(field.evaluate(points + shifts) - field.evaluate(points))))


def elasticity_reduce(tensor: ElasticityTensor, *, samples: int = 64, seed: int = 0) -> CoefficientField:
    """Turn an elasticity tensor into a strongly elliptic Stokes tensor with the same Dirichlet solutions.

    Adds (mu/2) times the difference between the grad-div tensor and the
    grad-transpose tensor. The correction is a constant null Lagrangian, so
    -div of its flux vanishes for every smooth field, and its quadratic form
    vanishes on rank-one matrices. The reduced tensor is elliptic on all
    matrices with constant min(mu/2, 1/(1/mu + d mu/2)).
    """

    d = tensor.dimension
    rng = np.random.default_rng(seed)
    points = rng.random((samples, d))
    defect = tensor.symmetry_defect(points)
    if defect > 1e-12:
        raise MalformedTensorError(f"elasticity tensor violates its symmetries (relative defect {defect:.3e})")

    mu = tensor.mu
    correction = 0.5 * mu * (trace_tensor(d) - swap_tensor(d))
    base = tensor.evaluator

    def evaluator(y: np.ndarray) -> np.ndarray:
        return np.asarray(base(y), dtype=float) + correction

    return CoefficientField(
        dimension=d,
        evaluator=evaluator,
        mu=min(0.5 * mu, 1.0 / (1.0 / mu + 0.5 * d * mu)),
        family=str(tensor.params.get("family", "elasticity")),
        params=dict(tensor.params),
        constant=bool(tensor.params.get("constant", False)),
        symmetric=True,
    )


def symmetric_part_contraction(tensor: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Contract ``tensor`` against the symmetric part of ``xi``."""

    sym = 0.5 * (xi + np.swapaxes(xi, -1, -2))
    return quadratic_form(tensor, sym)


__all__ = [
    "EllipticityReport",
    "check_ellipticity",
    "ellipticity_report",
    "elasticity_reduce",
    "periodicity_defect",
    "sample_directions",
    "sample_points",
    "symmetric_part_contraction",
]
