"""Fourier-Galerkin solver for the periodic Stokes cell problem.

For each pair (j, beta) the corrector chi = chi_j^beta solves

    -div(A (grad chi + grad P)) + grad pi = 0,   div chi = 0,   mean(chi) = mean(pi) = 0

with P^gamma(y) = y_j delta^{gamma beta}. The unknown lives in the space of
band-limited, divergence-free, mean-zero trigonometric fields; there the
Leray projection removes the pressure and the system becomes

    chi + (c0 Laplace)^{-1} Q div((A - c0 I) grad chi) = -(c0 Laplace)^{-1} Q div(A grad P),

a compact perturbation of the identity for c0 midway between the
ellipticity bounds. It is solved with GMRES; the pressure is recovered from
the divergence of the flux afterwards.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import product

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, gmres

from shom.coeff.fields import CoefficientField, as_matrix
from shom.errors import ConvergenceError
from shom.observability import get_observability
from shom.settings import Settings, get_settings
from shom.torus.grid import (
    TorusGrid,
    band_limit,
    divergence,
    forward,
    gradient,
    inverse,
    inverse_laplacian,
    l2_norm,
    leray_project,
    pad_spectrum,
    truncate_spectrum,
)
from shom.torus.dual import dual_correctors
from shom.torus.models import CorrectorSet

LOGGER = logging.getLogger(__name__)

_MAX_ROUNDS = 5


class CellOperator:
    """Coefficient-dependent pieces of the cell problem on one torus grid."""

    def __init__(self, field: CoefficientField, grid: TorusGrid, *, dealias: bool = True) -> None:
        if field.dimension != grid.dimension:
            raise ValueError(f"coefficient dimension {field.dimension} does not match grid dimension {grid.dimension}")
        self.field = field
        self.grid = grid
        self.fine_size = grid.dealiased_size(dealias)
        d = grid.dimension
        sampled = field.evaluate(grid.points(self.fine_size))
        # a[i, j, alpha, beta, *fine_grid]
        self.tensor = np.ascontiguousarray(np.moveaxis(sampled, list(range(d, d + 4)), [0, 1, 2, 3]))
        matrices = as_matrix(sampled).reshape(-1, d * d, d * d)
        eigvals = np.linalg.eigvalsh(0.5 * (matrices + np.swapaxes(matrices, -1, -2)))
        self.lower = float(eigvals[:, 0].min())
        self.upper = float(eigvals[:, -1].max())
        self.reference = 0.5 * (self.lower + self.upper)

    def _to_fine(self, coeffs: np.ndarray) -> np.ndarray:
        d = self.grid.dimension
        return inverse(pad_spectrum(coeffs, d, self.fine_size), d)

    def _to_coarse(self, values: np.ndarray) -> np.ndarray:
        d = self.grid.dimension
        return band_limit(truncate_spectrum(forward(values, d), d, self.grid.size), self.grid)

    def flux(self, chi_hat: np.ndarray, j: int, beta: int) -> np.ndarray:
        """Band-limited coefficients of sigma_i^alpha = a_ik^{ag} d_k (chi + P)^g, shape (i, alpha, ...)."""

        grad = gradient(chi_hat, self.grid)  # (gamma, k, ...)
        fine = self._to_fine(grad)
        fine[beta, j] += 1.0
        sigma = np.einsum("ikag...,gk...->ia...", self.tensor, fine)
        return self._to_coarse(sigma)

    def perturbation(self, chi_hat: np.ndarray) -> np.ndarray:
        """Coefficients of (c0 Laplace)^{-1} Q div((A - c0 I) grad chi)."""

        fine = self._to_fine(gradient(chi_hat, self.grid))  # (gamma, k, ...)
        sigma = np.einsum("ikag...,gk...->ia...", self.tensor, fine)
        sigma -= self.reference * np.swapaxes(fine, 0, 1)
        div = divergence(np.swapaxes(self._to_coarse(sigma), 0, 1), self.grid)
        return inverse_laplacian(leray_project(div, self.grid), self.grid) / self.reference

    def source(self, j: int, beta: int) -> np.ndarray:
        """Right-hand side -(c0 Laplace)^{-1} Q div(A grad P_j^beta)."""

        sigma = self._to_coarse(self.tensor[:, j, :, beta])
        div = divergence(np.swapaxes(sigma, 0, 1), self.grid)
        return -inverse_laplacian(leray_project(div, self.grid), self.grid) / self.reference

    def project(self, coeffs: np.ndarray) -> np.ndarray:
        """Project vector coefficients onto band-limited, divergence-free, mean-zero fields."""

        projected = leray_project(coeffs, self.grid)
        projected[(Ellipsis,) + (0,) * self.grid.dimension] = 0.0
        return projected

    def pressure(self, sigma_hat: np.ndarray) -> np.ndarray:
        """Pressure coefficients k_alpha k_i sigma_i^alpha / |k|^2 balancing the flux divergence."""

        k = self.grid.wavevectors
        return -np.einsum("i...,a...,ia...->...", k, k, sigma_hat) * self.grid.inverse_laplacian_symbol

    def momentum_residual(self, sigma_hat: np.ndarray, pi_hat: np.ndarray) -> float:
        """Discrete L2 norm of -div sigma + grad pi."""

        residual = -divergence(np.swapaxes(sigma_hat, 0, 1), self.grid) + gradient(pi_hat, self.grid)
        return l2_norm(residual)


def _solve_pair(
    operator: CellOperator,
    j: int,
    beta: int,
    *,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    grid = operator.grid
    d = grid.dimension
    shape = (d,) + grid.shape
    count = int(np.prod(shape))

    if operator.field.constant:
        return np.zeros(shape), np.zeros(grid.shape), 0.0, 0

    rhs_hat = operator.source(j, beta)
    rhs = inverse(rhs_hat, d).ravel()

    def matvec(vector: np.ndarray) -> np.ndarray:
        coeffs = forward(vector.reshape(shape), d)
        return vector + inverse(operator.perturbation(operator.project(coeffs)), d).ravel()

    system = LinearOperator((count, count), matvec=matvec, dtype=float)
    restart = min(40, count)
    # the preconditioned residual understates the momentum residual by at most c0 |k|_max^2
    kmax = np.pi * grid.size * np.sqrt(d)
    target = tol * np.sqrt(grid.size**d) / (operator.reference * kmax**2)
    target = max(target, 10.0 * np.finfo(float).eps * float(np.linalg.norm(rhs)))
    history: list[float] = []
    solution = np.zeros(count)
    residual = np.inf
    for _ in range(_MAX_ROUNDS):
        solution, info = gmres(
            system,
            rhs,
            x0=solution,
            rtol=0.0,
            atol=target,
            restart=restart,
            maxiter=max(1, -(-max_iter // restart)),
            callback=history.append,
            callback_type="pr_norm",
        )
        if info < 0:
            raise ConvergenceError(f"GMRES rejected the cell system (info={info})", residual=np.inf, history=history)
        chi_hat = operator.project(forward(solution.reshape(shape), d))
        sigma_hat = operator.flux(chi_hat, j, beta)
        pi_hat = operator.pressure(sigma_hat)
        residual = operator.momentum_residual(sigma_hat, pi_hat)
        if residual <= tol:
            return inverse(chi_hat, d), inverse(pi_hat, d), residual, len(history)
        if info > 0:
            break
        target *= 0.1
    raise ConvergenceError(
        f"cell problem (j={j}, beta={beta}) stalled at residual {residual:.3e} > tol {tol:.1e}",
        residual=residual,
        history=history,
    )


def solve_cell_problem(
    field: CoefficientField,
    grid: TorusGrid,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
    threads: int | None = None,
) -> CorrectorSet:
    """Solve all d^2 cell problems and return the correctors (chi, pi).

    Raises:
        ConvergenceError: GMRES fails to reach ``tol`` within the configured iterations.
    """

    resolved = settings or get_settings()
    tolerance = tol if tol is not None else resolved.torus.tol
    if tolerance <= 0:
        raise ValueError(f"tol must be positive (got {tolerance})")
    workers = threads or resolved.runtime.threads
    obs = get_observability(component="torus", settings=resolved)
    d = grid.dimension

    with obs.timed("cell_solve", tags={"d": str(d), "n": str(grid.size)}):
        operator = CellOperator(field, grid, dealias=resolved.torus.dealias)
        pairs = list(product(range(d), range(d)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda pair: _solve_pair(
                        operator, pair[0], pair[1], tol=tolerance, max_iter=resolved.torus.max_iter
                    ),
                    pairs,
                )
            )

    chi = np.zeros((d, d, d) + grid.shape)
    pi = np.zeros((d, d) + grid.shape)
    residuals = np.zeros((d, d))
    iterations = np.zeros((d, d), dtype=int)
    for (j, beta), (chi_jb, pi_jb, residual, steps) in zip(pairs, results):
        chi[j, beta] = chi_jb
        pi[j, beta] = pi_jb
        residuals[j, beta] = residual
        iterations[j, beta] = steps

    obs.increment("gmres_iterations", value=float(iterations.sum()))
    obs.emit_event(
        "cell_solve_completed",
        family=field.family,
        dimension=d,
        grid_size=grid.size,
        reference_scale=operator.reference,
        max_residual=float(residuals.max()),
        iterations=iterations,
    )
    return CorrectorSet(
        grid=grid,
        chi=chi,
        pi=pi,
        residuals=residuals,
        iterations=iterations,
        dealias=resolved.torus.dealias,
        family=field.family,
        params=dict(field.params),
    )


def _flux_coefficients(field: CoefficientField, correctors: CorrectorSet) -> np.ndarray:
    """Band-limited coefficients of a (grad chi + grad P) in layout [i, j, alpha, beta, ...]."""

    grid = correctors.grid
    d = grid.dimension
    operator = CellOperator(field, grid, dealias=correctors.dealias)
    sigma = np.zeros((d, d, d, d) + grid.shape, dtype=complex)
    for j, beta in product(range(d), range(d)):
        sigma[:, j, :, beta] = operator.flux(forward(correctors.chi[j, beta], d), j, beta)
    return sigma


def effective_tensor(field: CoefficientField, correctors: CorrectorSet) -> np.ndarray:
    """Average of a_ij^{ab} + a_ik^{ag} d_k chi_j^{gb} with the dealiased product quadrature."""

    sigma = _flux_coefficients(field, correctors)
    return sigma[(Ellipsis,) + (0,) * correctors.dimension].real.copy()


def effective_bounds(a_hat: np.ndarray) -> tuple[float, float]:
    """Extreme eigenvalues of the symmetric part of A_hat restricted to trace-free matrices."""

    d = a_hat.shape[-1]
    basis = linalg.null_space(np.eye(d).reshape(1, d * d))
    matrix = as_matrix(np.asarray(a_hat, dtype=float))
    restricted = basis.T @ (0.5 * (matrix + matrix.T)) @ basis
    eigvals = np.linalg.eigvalsh(restricted)
    return float(eigvals[0]), float(eigvals[-1])


def flux_tensor(field: CoefficientField, correctors: CorrectorSet) -> np.ndarray:
    """Mean-zero flux tensor b = a + a grad chi - A_hat, band-limited to the torus grid."""

    sigma = _flux_coefficients(field, correctors)
    sigma[(Ellipsis,) + (0,) * correctors.dimension] = 0.0
    return inverse(sigma, correctors.dimension)


def flux_divergence_residual(correctors: CorrectorSet) -> float:
    """Discrete L2 norm of d_i b_ij^{ab} - d_a pi_j^b."""

    if correctors.b is None:
        raise ValueError("flux tensor has not been computed")
    grid = correctors.grid
    d = grid.dimension
    b_hat = forward(correctors.b, d)
    div_b = np.sum(1j * grid.wavevectors[:, None, None, None] * b_hat, axis=0)  # [j, alpha, beta]
    grad_pi = np.moveaxis(gradient(forward(correctors.pi, d), grid), 2, 1)  # [j, alpha, beta]
    return l2_norm(div_b - grad_pi)


def corrector_difference(coarse: CorrectorSet, fine: CorrectorSet) -> float:
    """Discrete L2 distance between the trigonometric interpolants of two corrector sets."""

    d = coarse.dimension
    if fine.dimension != d:
        raise ValueError("corrector sets have different dimensions")
    small, large = sorted((coarse, fine), key=lambda item: item.grid.size)
    a = pad_spectrum(forward(small.chi, d) * small.grid.band, d, large.grid.size)
    b = forward(large.chi, d) * large.grid.band
    return l2_norm(a - b)


def compute_correctors(
    field: CoefficientField,
    grid: TorusGrid,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
    threads: int | None = None,
) -> CorrectorSet:
    """Solve the cell problem and attach the effective tensor, flux tensor and dual correctors."""

    correctors = solve_cell_problem(field, grid, tol, settings=settings, threads=threads)
    sigma = _flux_coefficients(field, correctors)
    zero = (Ellipsis,) + (0,) * grid.dimension
    a_hat = sigma[zero].real.copy()
    sigma[zero] = 0.0
    correctors = correctors.with_effective(a_hat, inverse(sigma, grid.dimension))
    phi, q = dual_correctors(correctors)
    LOGGER.info(
        "Computed correctors family=%s N=%s max_residual=%.3e", field.family, grid.size, correctors.max_residual
    )
    return correctors.with_duals(phi, q)


__all__ = [
    "CellOperator",
    "compute_correctors",
    "corrector_difference",
    "effective_bounds",
    "effective_tensor",
    "flux_divergence_residual",
    "flux_tensor",
    "solve_cell_problem",
]
