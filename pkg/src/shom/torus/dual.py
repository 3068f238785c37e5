"""Dual correctors (phi, q) writing the flux tensor as a divergence plus a gradient.

The construction runs in Fourier space on the torus grid:

    q_ij^b    = d_i Laplace^{-1} pi_j^b
    c_ij^{ab} = b_ij^{ab} - d_a q_ij^b
    f_ij^{ab} = Laplace^{-1} c_ij^{ab}
    phi_kij^{ab} = d_k f_ij^{ab} - d_i f_kj^{ab}

so that b_ij^{ab} = d_k phi_kij^{ab} + d_a q_ij^b whenever d_i b_ij^{ab} = d_a pi_j^b.
"""

from __future__ import annotations

import numpy as np

from shom.errors import NormalizationError
from shom.torus.grid import forward, gradient, inverse, inverse_laplacian, l2_norm
from shom.torus.models import CorrectorSet

_MEAN_REL_TOL = 1e-10


def _check_mean_zero(name: str, values: np.ndarray, dimension: int) -> None:
    axes = tuple(range(-dimension, 0))
    mean = float(np.max(np.abs(values.mean(axis=axes)))) if values.size else 0.0
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    if mean > _MEAN_REL_TOL * scale and mean > 1e-14:
        raise NormalizationError(f"{name} must have zero mean over the cell (max |mean| = {mean:.3e})", mean=mean)


def dual_correctors(correctors: CorrectorSet, b: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return (phi[k, i, j, alpha, beta], q[i, j, beta]) for the given correctors.

    Raises:
        NormalizationError: ``b`` or ``pi`` has a nonzero cell mean.
    """

    flux = correctors.b if b is None else np.asarray(b, dtype=float)
    if flux is None:
        raise ValueError("flux tensor b is required to build dual correctors")
    grid = correctors.grid
    d = grid.dimension
    _check_mean_zero("b", flux, d)
    _check_mean_zero("pi", correctors.pi, d)

    pi_hat = forward(correctors.pi, d)  # [j, beta]
    q_hat = np.moveaxis(gradient(inverse_laplacian(pi_hat, grid), grid), 2, 0)  # [i, j, beta]
    grad_q = np.moveaxis(gradient(q_hat, grid), 3, 2)  # [i, j, alpha, beta]
    f_hat = inverse_laplacian(forward(flux, d) - grad_q, grid)
    grad_f = inverse(np.moveaxis(gradient(f_hat, grid), 4, 0), d)  # [k, i, j, alpha, beta]
    phi = grad_f - np.swapaxes(grad_f, 0, 1)
    return phi, inverse(q_hat, d)


def dual_identity_residual(correctors: CorrectorSet) -> float:
    """Discrete L2 norm of b_ij^{ab} - d_k phi_kij^{ab} - d_a q_ij^b."""

    if correctors.b is None or correctors.phi is None or correctors.q is None:
        raise ValueError("flux tensor and dual correctors must be computed first")
    grid = correctors.grid
    d = grid.dimension
    phi_hat = forward(correctors.phi, d)
    div_phi = np.sum(1j * grid.wavevectors[:, None, None, None, None] * phi_hat, axis=0)
    grad_q = np.moveaxis(gradient(forward(correctors.q, d), grid), 3, 2)
    return l2_norm(forward(correctors.b, d) - div_phi - grad_q)


def pressure_potential_residual(correctors: CorrectorSet) -> float:
    """Discrete L2 norm of d_i q_ij^b - pi_j^b."""

    if correctors.q is None:
        raise ValueError("dual pressures must be computed first")
    grid = correctors.grid
    d = grid.dimension
    q_hat = forward(correctors.q, d)
    div_q = np.sum(1j * grid.wavevectors[:, None, None] * q_hat, axis=0)
    return l2_norm(div_q - forward(correctors.pi, d))


def antisymmetry_defect(phi: np.ndarray) -> float:
    """Largest |phi_kij + phi_ikj|."""

    return float(np.max(np.abs(phi + np.swapaxes(phi, 0, 1)))) if phi.size else 0.0


__all__ = ["antisymmetry_defect", "dual_correctors", "dual_identity_residual", "pressure_potential_residual"]
