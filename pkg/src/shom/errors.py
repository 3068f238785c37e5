"""Exception hierarchy shared by the solvers and the experiment harness."""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np


class ShomError(RuntimeError):
    """Base class for solver-facing failures."""


class EllipticityViolationError(ShomError):
    """Raised when a coefficient tensor fails strong ellipticity at a sample."""

    def __init__(self, message: str, *, y: Any, xi: Any, value: float) -> None:
        super().__init__(message)
        self.y = np.asarray(y, dtype=float)
        self.xi = np.asarray(xi, dtype=float)
        self.value = float(value)


class MalformedTensorError(ShomError):
    """Raised when a tensor has the wrong shape or violates required symmetries."""


class ConvergenceError(ShomError):
    """Raised when an iterative solver stops before reaching its tolerance."""

    def __init__(self, message: str, *, residual: float, history: Sequence[float] = ()) -> None:
        super().__init__(message)
        self.residual = float(residual)
        self.history = [float(value) for value in history]


class CompatibilityError(ShomError):
    """Raised when divergence and boundary data violate the compatibility condition."""

    def __init__(self, message: str, *, defect: float) -> None:
        super().__init__(message)
        self.defect = float(defect)


class NormalizationError(ShomError):
    """Raised when a field required to have zero mean does not."""

    def __init__(self, message: str, *, mean: float) -> None:
        super().__init__(message)
        self.mean = float(mean)


class PreconditionError(ShomError):
    """Raised when geometric or resolution preconditions are not met."""


class GridMismatchError(ShomError):
    """Raised when fields defined on different grids are combined."""


class FitError(ShomError):
    """Raised when a log-log regression has too few usable points."""


__all__ = [
    "ShomError",
    "EllipticityViolationError",
    "MalformedTensorError",
    "ConvergenceError",
    "CompatibilityError",
    "NormalizationError",
    "PreconditionError",
    "GridMismatchError",
    "FitError",
]
