"""Result containers for the periodic cell problem."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from shom.torus.grid import TorusGrid, forward, gradient, interpolate_at, interpolate_on_axes


@dataclass(frozen=True)
class CorrectorSet:
    """Cell correctors on a torus grid.

    Array layouts (grid axes trail every array):
        chi[j, beta, gamma]      chi_j^{gamma beta}
        pi[j, beta]              pi_j^beta
        b[i, j, alpha, beta]     flux tensor, mean zero
        a_hat[i, j, alpha, beta] effective tensor
        phi[k, i, j, alpha, beta] dual correctors
        q[i, j, beta]            dual pressures
    """

    grid: TorusGrid
    chi: np.ndarray
    pi: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray
    dealias: bool = True
    family: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    a_hat: np.ndarray | None = None
    b: np.ndarray | None = None
    phi: np.ndarray | None = None
    q: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return self.grid.dimension

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    def with_effective(self, a_hat: np.ndarray, b: np.ndarray) -> "CorrectorSet":
        return replace(self, a_hat=np.asarray(a_hat), b=np.asarray(b))

    def with_duals(self, phi: np.ndarray, q: np.ndarray) -> "CorrectorSet":
        return replace(self, phi=np.asarray(phi), q=np.asarray(q))

    def chi_at(self, points: np.ndarray) -> np.ndarray:
        """chi[j, beta, gamma] at scattered torus points (P, d), periodic in each coordinate."""

        return interpolate_at(forward(self.chi, self.dimension), self.grid, np.mod(points, 1.0))

    def pi_at(self, points: np.ndarray) -> np.ndarray:
        """pi[j, beta] at scattered torus points."""

        return interpolate_at(forward(self.pi, self.dimension), self.grid, np.mod(points, 1.0))

    def chi_gradient_at(self, points: np.ndarray) -> np.ndarray:
        """d_k chi_j^{gamma beta} at scattered torus points, layout [j, beta, gamma, k, P]."""

        coeffs = gradient(forward(self.chi, self.dimension), self.grid)
        return interpolate_at(coeffs, self.grid, np.mod(points, 1.0))

    def chi_gradient_on_axes(self, axes: list[np.ndarray]) -> np.ndarray:
        """d_k chi_j^{gamma beta} on a tensor-product point set, layout [j, beta, gamma, k, *points]."""

        coeffs = gradient(forward(self.chi, self.dimension), self.grid)
        return interpolate_on_axes(coeffs, self.grid, [np.asarray(a) for a in axes])

    def on_axes(self, name: str, axes: list[np.ndarray]) -> np.ndarray:
        """Interpolate a stored field on a tensor-product point set given in torus units."""

        values = getattr(self, name)
        if values is None:
            raise ValueError(f"corrector field '{name}' has not been computed")
        return interpolate_on_axes(forward(values, self.dimension), self.grid, [np.asarray(a) for a in axes])

    def describe(self) -> dict[str, Any]:
        return {
            "dimension": self.dimension,
            "grid_size": self.grid.size,
            "dealias": self.dealias,
            "family": self.family,
            "params": dict(self.params),
            "max_residual": self.max_residual,
            "iterations": self.iterations.tolist(),
            "interpolation": "trigonometric",
        }


__all__ = ["CorrectorSet"]
