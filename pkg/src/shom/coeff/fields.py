"""Periodic coefficient tensors and elasticity tensors."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

import numpy as np

from shom.errors import MalformedTensorError

# Evaluators map points of shape (..., d) to tensors of shape (..., d, d, d, d)
# laid out as a[..., i, j, alpha, beta] = a_ij^{alpha beta}.
TensorEvaluator = Callable[[np.ndarray], np.ndarray]

SUPPORTED_DIMENSIONS = (2, 3)


def identity_tensor(d: int) -> np.ndarray:
    """Return delta_ij delta^{alpha beta}, the tensor of the vector Laplacian."""

    eye = np.eye(d)
    return np.einsum("ij,ab->ijab", eye, eye)


def swap_tensor(d: int) -> np.ndarray:
    """Return delta_{i beta} delta_{j alpha}, the tensor of grad-transpose."""

    eye = np.eye(d)
    return np.einsum("ib,ja->ijab", eye, eye)


def trace_tensor(d: int) -> np.ndarray:
    """Return delta_{i alpha} delta_{j beta}, the tensor of grad-div."""

    eye = np.eye(d)
    return np.einsum("ia,jb->ijab", eye, eye)


def quadratic_form(tensor: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Contract a_ij^{ab} xi_i^a xi_j^b with ``xi[..., i, a]``."""

    return np.einsum("...ijab,...ia,...jb->...", tensor, xi, xi)


def as_matrix(tensor: np.ndarray) -> np.ndarray:
    """Reshape (..., d, d, d, d) tensors into (..., d*d, d*d) matrices indexed by (i, a), (j, b)."""

    d = tensor.shape[-1]
    moved = np.moveaxis(tensor, -2, -3)  # (..., i, a, j, b)
    return moved.reshape(tensor.shape[:-4] + (d * d, d * d))


def _check_points(points: np.ndarray, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != d:
        raise MalformedTensorError(f"expected points with trailing dimension {d}, got shape {pts.shape}")
    return pts


def _check_tensor(values: np.ndarray, leading: tuple[int, ...], d: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    expected = leading + (d, d, d, d)
    if arr.shape != expected:
        try:
            arr = np.broadcast_to(arr, expected)
        except ValueError as exc:
            raise MalformedTensorError(f"evaluator returned shape {arr.shape}, expected {expected}") from exc
    if not np.all(np.isfinite(arr)):
        raise MalformedTensorError("evaluator returned non-finite coefficients")
    return arr


@dataclass(frozen=True)
class CoefficientField:
    """A 1-periodic coefficient tensor A(y) with its ellipticity and Hoelder metadata.

    The evaluator is analytic: no resolution is baked in, consumers sample it
    wherever their stencils need values.
    """

    dimension: int
    evaluator: TensorEvaluator
    mu: float
    family: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    holder_exponent: float = 1.0
    holder_seminorm: float = 0.0
    constant: bool = False
    symmetric: bool = True
    artifact_choice: bool = True

    def __post_init__(self) -> None:
        if self.dimension not in SUPPORTED_DIMENSIONS:
            raise MalformedTensorError(f"dimension must be 2 or 3 (got {self.dimension})")
        if not self.mu > 0:
            raise MalformedTensorError(f"ellipticity constant must be positive (got {self.mu})")
        if not 0 < self.holder_exponent <= 1:
            raise MalformedTensorError(f"Hoelder exponent must lie in (0, 1] (got {self.holder_exponent})")
        if self.holder_seminorm < 0:
            raise MalformedTensorError(f"Hoelder seminorm must be non-negative (got {self.holder_seminorm})")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate A at ``points`` (shape (..., d)) and return (..., d, d, d, d)."""

        pts = _check_points(points, self.dimension)
        return _check_tensor(self.evaluator(pts), pts.shape[:-1], self.dimension)

    def at_scale(self, eps: float) -> TensorEvaluator:
        """Return the evaluator x -> A(x / eps)."""

        if eps <= 0:
            raise ValueError(f"eps must be positive (got {eps})")
        return lambda x: self.evaluate(np.asarray(x, dtype=float) / eps)

    def adjoint(self) -> "CoefficientField":
        """Return A* with a*_ij^{ab} = a_ji^{ba}."""

        base = self.evaluator
        return replace(
            self,
            evaluator=lambda y: np.swapaxes(np.swapaxes(np.asarray(base(y)), -4, -3), -2, -1),
            family=f"{self.family}*" if not self.symmetric else self.family,
        )

    def constant_value(self) -> np.ndarray:
        """Return the tensor of a constant field."""

        if not self.constant:
            raise MalformedTensorError(f"coefficient family '{self.family}' is not constant")
        return np.array(self.evaluate(np.zeros(self.dimension)))

    def describe(self) -> dict[str, Any]:
        """Metadata recorded in reports."""

        return {
            "family": self.family,
            "dimension": self.dimension,
            "params": dict(self.params),
            "mu": self.mu,
            "holder_exponent": self.holder_exponent,
            "holder_seminorm": self.holder_seminorm,
            "constant": self.constant,
            "symmetric": self.symmetric,
            "artifact_choice": self.artifact_choice,
        }


def constant_field(tensor: np.ndarray, *, mu: float, family: str = "constant", **metadata: Any) -> CoefficientField:
    """Wrap a fixed (d, d, d, d) tensor as a constant coefficient field."""

    arr = np.array(tensor, dtype=float)
    if arr.ndim != 4 or len(set(arr.shape)) != 1:
        raise MalformedTensorError(f"constant tensor must have shape (d, d, d, d), got {arr.shape}")
    d = arr.shape[0]
    arr.setflags(write=False)
    symmetric = bool(np.allclose(arr, np.transpose(arr, (1, 0, 3, 2))))

    def evaluator(y: np.ndarray) -> np.ndarray:
        return np.broadcast_to(arr, np.shape(y)[:-1] + arr.shape)

    return CoefficientField(
        dimension=d,
        evaluator=evaluator,
        mu=mu,
        family=family,
        constant=True,
        symmetric=symmetric,
        holder_seminorm=0.0,
        **metadata,
    )


@dataclass(frozen=True)
class ElasticityTensor:
    """A periodic elasticity tensor B(y), elliptic on symmetric matrices only."""

    dimension: int
    evaluator: TensorEvaluator
    mu: float
    params: Mapping[str, Any] = field(default_factory=dict)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = _check_points(points, self.dimension)
        return _check_tensor(self.evaluator(pts), pts.shape[:-1], self.dimension)

    def symmetry_defect(self, points: np.ndarray) -> float:
        """Largest violation of b_ij^{ab} = b_ji^{ba} = b_aj^{ib} over ``points``."""

        b = self.evaluate(points)
        major = np.abs(b - np.swapaxes(np.swapaxes(b, -4, -3), -2, -1))
        minor = np.abs(b - np.swapaxes(b, -4, -2))
        scale = max(float(np.max(np.abs(b))), 1.0)
        return float(max(np.max(major), np.max(minor)) / scale)


__all__ = [
    "CoefficientField",
    "ElasticityTensor",
    "TensorEvaluator",
    "as_matrix",
    "constant_field",
    "identity_tensor",
    "quadratic_form",
    "swap_tensor",
    "trace_tensor",
]
