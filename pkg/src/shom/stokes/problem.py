"""Dirichlet Stokes problems on boxes and their discrete solutions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from shom.coeff.fields import CoefficientField
from shom.errors import PreconditionError
from shom.stokes.grid import BoxDomain, StaggeredGrid, staggered_grid

# x (P, d) -> F (P, d), f (P, d), g (P,), h (P, d, d) with h[..., j, beta] = h_j^beta
VectorData = Callable[[np.ndarray], np.ndarray]
ScalarData = Callable[[np.ndarray], np.ndarray]
MatrixData = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class StokesProblem:
    """L(u) + grad p = F + div h, div u = g in the box, u = f on its boundary.

    The operator is either A(x / eps) for a periodic field or a constant tensor.
    Discrete data (``force_faces`` at the interior velocity unknowns,
    ``divergence_cells`` at cell centers) override the callables when given.
    """

    domain: BoxDomain
    field: CoefficientField | None = None
    eps: float | None = None
    tensor: np.ndarray | None = None
    force: VectorData | None = None
    flux: MatrixData | None = None
    divergence: ScalarData | None = None
    boundary: VectorData | None = None
    force_faces: np.ndarray | None = None
    divergence_cells: np.ndarray | None = None
    label: str = "stokes"

    def __post_init__(self) -> None:
        if (self.field is None) == (self.tensor is None):
            raise PreconditionError("exactly one of a coefficient field or a constant tensor is required")
        if self.field is not None:
            if self.eps is None or self.eps <= 0:
                raise PreconditionError(f"eps must be positive for oscillating coefficients (got {self.eps})")
            if self.field.dimension != self.domain.dimension:
                raise PreconditionError("coefficient and domain dimensions differ")
        else:
            tensor = np.array(self.tensor, dtype=float)
            d = self.domain.dimension
            if tensor.shape != (d, d, d, d):
                raise PreconditionError(f"constant tensor must have shape {(d, d, d, d)}, got {tensor.shape}")
            tensor.setflags(write=False)
            object.__setattr__(self, "tensor", tensor)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def is_constant(self) -> bool:
        return self.tensor is not None or bool(self.field is not None and self.field.constant)

    @property
    def is_symmetric(self) -> bool:
        if self.tensor is not None:
            return bool(np.allclose(self.tensor, np.transpose(self.tensor, (1, 0, 3, 2))))
        return bool(self.field.symmetric)

    def coefficient(self, points: np.ndarray) -> np.ndarray:
        """Tensor values at physical points of shape (P, d)."""

        pts = np.asarray(points, dtype=float)
        if self.tensor is not None:
            return np.broadcast_to(self.tensor, pts.shape[:-1] + self.tensor.shape)
        return self.field.evaluate(pts / self.eps)

    def homogenized(self, a_hat: np.ndarray) -> "StokesProblem":
        """Same data with the constant effective tensor in place of A(x / eps)."""

        return replace(self, field=None, eps=None, tensor=np.asarray(a_hat, dtype=float), label=f"{self.label}:hom")

    def adjoint(self) -> "StokesProblem":
        if self.tensor is not None:
            return replace(self, tensor=np.transpose(self.tensor, (1, 0, 3, 2)), label=f"{self.label}:adj")
        return replace(self, field=self.field.adjoint(), label=f"{self.label}:adj")

    def with_data(self, **updates: Any) -> "StokesProblem":
        return replace(self, **updates)

    def describe(self) -> dict[str, Any]:
        summary: dict[str, Any] = {"label": self.label, "domain": self.domain.describe()}
        if self.field is not None:
            summary.update({"family": self.field.family, "eps": self.eps})
        else:
            summary.update({"family": "constant-tensor"})
        return summary


@dataclass(frozen=True, eq=False)
class StokesSolution:
    """Discrete (u, p) with u on the extended staggered grid and p at cell centers, mean zero."""

    domain: BoxDomain
    velocity: np.ndarray
    pressure: np.ndarray
    residual: float
    divergence_residual: float
    stats: dict[str, Any] = field(default_factory=dict)

    @property
    def grid(self) -> StaggeredGrid:
        return staggered_grid(self.domain)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def components(self) -> list[np.ndarray]:
        return self.grid.split(self.velocity)

    def velocity_at_centers(self) -> np.ndarray:
        return self.grid.velocity_at_centers(self.velocity)

    def gradient_at_centers(self) -> np.ndarray:
        """d_j u^beta at cell centers, layout [beta, j, *cells]."""

        return self.grid.gradient_at_centers(self.velocity)

    def pressure_mean(self) -> float:
        return float(np.mean(self.pressure))

    def velocity_l2(self) -> float:
        grid = self.grid
        interior = self.velocity[grid.interior]
        return float(np.sqrt(grid.cell_volume * np.sum(interior**2)))

    def gradient_l2(self) -> float:
        total = 0.0
        for block in self.grid.blocks.values():
            values = block.matrix @ self.velocity
            total += float(np.sum(block.weights * values**2))
        return float(np.sqrt(total))

    def h1_norm(self) -> float:
        return float(np.hypot(self.velocity_l2(), self.gradient_l2()))

    def pressure_l2(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.pressure**2)))

    def velocity_max(self) -> float:
        return float(np.max(np.abs(self.velocity))) if self.velocity.size else 0.0


__all__ = ["StokesProblem", "StokesSolution"]
