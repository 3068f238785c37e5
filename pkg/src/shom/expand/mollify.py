"""Bump-kernel smoothing of cell-center data.

Used to generate test data of controlled roughness; the kernel is never
extended periodically. Near the boundary the kernel is renormalized over the
part of the ball inside the box, so constants are reproduced exactly.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from shom.errors import PreconditionError
from shom.stokes.grid import BoxDomain


def bump_kernel(radius: float, h: float, d: int) -> np.ndarray:
    """exp(-1 / (1 - |x / r|^2)) on the cell offsets inside B(0, r), normalized to unit sum."""

    m = int(np.floor(radius / h))
    offsets = np.arange(-m, m + 1) * h
    mesh = np.meshgrid(*([offsets] * d), indexing="ij")
    rho2 = sum(axis**2 for axis in mesh) / radius**2
    kernel = np.zeros_like(rho2)
    inside = rho2 < 1.0
    kernel[inside] = np.exp(-1.0 / (1.0 - rho2[inside]))
    return kernel / kernel.sum()


def mollify(values: np.ndarray, radius: float, domain: BoxDomain) -> np.ndarray:
    """phi_r * values at the cell centers of ``domain``; leading axes are treated as components.

    Raises:
        PreconditionError: the radius does not exceed one cell.
    """

    h = domain.spacing
    if radius <= h:
        raise PreconditionError(f"mollification radius {radius} must exceed the grid spacing {h}")
    d = domain.dimension
    data = np.asarray(values, dtype=float)
    if data.shape[-d:] != domain.cell_shape:
        raise ValueError(f"values must end with the cell axes {domain.cell_shape} (got {data.shape})")
    kernel = bump_kernel(radius, h, d)
    weight = signal.fftconvolve(np.ones(domain.cell_shape), kernel, mode="same")
    flat = data.reshape((-1,) + domain.cell_shape)
    smoothed = np.stack([signal.fftconvolve(component, kernel, mode="same") / weight for component in flat])
    return smoothed.reshape(data.shape)


__all__ = ["bump_kernel", "mollify"]
