"""Uniform grids on the unit torus and the Fourier operators built on them.

Spectral coefficients use the ``norm="forward"`` convention, so the zero mode
is the grid mean and Parseval reads ``||v||_{L2(Y)}^2 = sum |v_k|^2``. All
fields produced here are band-limited: the Nyquist modes are dropped so that
differentiation and interpolation stay real and exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from shom.errors import GridMismatchError, PreconditionError

_TWO_PI = 2.0 * np.pi


def _is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


@dataclass(frozen=True)
class TorusGrid:
    """N points per axis on Y = (0, 1]^d with spacing h = 1/N."""

    dimension: int
    size: int

    def __post_init__(self) -> None:
        if self.dimension not in (2, 3):
            raise PreconditionError(f"torus dimension must be 2 or 3 (got {self.dimension})")
        if self.size < 8 or not _is_power_of_two(self.size):
            raise PreconditionError(f"torus grid size must be a power of two >= 8 (got {self.size})")

    @property
    def spacing(self) -> float:
        return 1.0 / self.size

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,) * self.dimension

    @property
    def axes(self) -> tuple[int, ...]:
        """Trailing array axes that carry the grid."""

        return tuple(range(-self.dimension, 0))

    def points(self, size: int | None = None) -> np.ndarray:
        """Node coordinates of shape (n, ..., n, d) for ``size`` (default N) points per axis."""

        n = size or self.size
        axis = np.arange(n) / n
        return np.stack(np.meshgrid(*([axis] * self.dimension), indexing="ij"), axis=-1)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Integer frequencies per axis in FFT order."""

        return np.fft.fftfreq(self.size, d=1.0 / self.size)

    @cached_property
    def band(self) -> np.ndarray:
        """Boolean mask of retained modes (all |k_i| < N/2)."""

        keep = np.abs(self.frequencies) < self.size // 2
        masks = np.meshgrid(*([keep] * self.dimension), indexing="ij")
        return np.logical_and.reduce(masks)

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Angular wavevectors 2 pi k of shape (d, N, ..., N), zeroed outside the band."""

        grids = np.meshgrid(*([_TWO_PI * self.frequencies] * self.dimension), indexing="ij")
        return np.stack(grids, axis=0) * self.band

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """-|2 pi k|^2 on the band."""

        return -np.sum(self.wavevectors**2, axis=0)

    @cached_property
    def inverse_laplacian_symbol(self) -> np.ndarray:
        """Symbol of the mean-zero inverse Laplacian (zero at k = 0 and outside the band)."""

        symbol = self.laplacian_symbol
        inverse = np.zeros_like(symbol)
        nonzero = symbol != 0
        inverse[nonzero] = 1.0 / symbol[nonzero]
        return inverse

    def dealiased_size(self, dealias: bool = True) -> int:
        """Quadrature grid used for products (3/2 rule when ``dealias``)."""

        return (3 * self.size) // 2 if dealias else self.size

    def check_same(self, other: "TorusGrid") -> None:
        if (self.dimension, self.size) != (other.dimension, other.size):
            raise GridMismatchError(
                f"torus grids differ: d={self.dimension}, N={self.size} vs d={other.dimension}, N={other.size}"
            )


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def forward(values: np.ndarray, dimension: int, *, workers: int = 1) -> np.ndarray:
    """Fourier coefficients over the trailing ``dimension`` axes."""

    axes = tuple(range(-dimension, 0))
    return sfft.fftn(values, axes=axes, norm="forward", workers=workers)


def inverse(coeffs: np.ndarray, dimension: int, *, workers: int = 1) -> np.ndarray:
    """Real grid values from Fourier coefficients."""

    axes = tuple(range(-dimension, 0))
    return sfft.ifftn(coeffs, axes=axes, norm="forward", workers=workers).real


def band_limit(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return coeffs * grid.band


def pad_spectrum(coeffs: np.ndarray, dimension: int, size: int) -> np.ndarray:
    """Zero-pad band-limited coefficients from n to ``size`` points per axis."""

    n = coeffs.shape[-1]
    if size == n:
        return coeffs
    shifted = sfft.fftshift(coeffs, axes=tuple(range(-dimension, 0)))
    lead = coeffs.shape[:-dimension]
    padded = np.zeros(lead + (size,) * dimension, dtype=complex)
    offset = size // 2 - n // 2
    window = (Ellipsis,) + (slice(offset, offset + n),) * dimension
    padded[window] = shifted
    return sfft.ifftshift(padded, axes=tuple(range(-dimension, 0)))


def truncate_spectrum(coeffs: np.ndarray, dimension: int, size: int) -> np.ndarray:
    """Keep the central ``size`` modes per axis of a finer spectrum."""

    n = coeffs.shape[-1]
    if size == n:
        return coeffs
    shifted = sfft.fftshift(coeffs, axes=tuple(range(-dimension, 0)))
    offset = n // 2 - size // 2
    window = (Ellipsis,) + (slice(offset, offset + size),) * dimension
    return sfft.ifftshift(shifted[window], axes=tuple(range(-dimension, 0)))


# ---------------------------------------------------------------------------
# Spectral calculus
# ---------------------------------------------------------------------------


def derivative(coeffs: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    """Coefficients of the partial derivative along ``axis``."""

    return 1j * grid.wavevectors[axis] * coeffs


def gradient(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Append a derivative index just before the grid axes: (..., d, N, ..., N)."""

    return np.stack([derivative(coeffs, grid, k) for k in range(grid.dimension)], axis=-grid.dimension - 1)


def divergence(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Contract the component index just before the grid axes with the derivative."""

    d = grid.dimension
    return np.sum(1j * grid.wavevectors * coeffs, axis=-d - 1)


def inverse_laplacian(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return coeffs * grid.inverse_laplacian_symbol


def leray_project(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Remove the gradient part of vector coefficients with component axis before the grid."""

    d = grid.dimension
    k = grid.wavevectors
    k2 = np.sum(k**2, axis=0)
    safe = np.where(k2 > 0, k2, 1.0)
    along = np.sum(k * coeffs, axis=-d - 1, keepdims=True) / safe
    return band_limit(coeffs - k * along, grid)


def l2_norm(coeffs: np.ndarray) -> float:
    """Discrete L2(Y) norm of all components, via Parseval."""

    return float(np.sqrt(np.sum(np.abs(coeffs) ** 2)))


# ---------------------------------------------------------------------------
# Interpolation
# ---------------------------------------------------------------------------


def _axis_exponentials(grid: TorusGrid, coordinates: np.ndarray) -> np.ndarray:
    keep = np.abs(grid.frequencies) < grid.size // 2
    freqs = grid.frequencies * keep
    basis = np.exp(1j * _TWO_PI * np.outer(np.asarray(coordinates, dtype=float), freqs))
    return basis * keep


def interpolate_on_axes(coeffs: np.ndarray, grid: TorusGrid, axes: list[np.ndarray]) -> np.ndarray:
    """Evaluate the trigonometric interpolant on the tensor product of per-axis coordinates.

    ``coeffs`` carries arbitrary leading component axes; the result has shape
    ``leading + tuple(len(a) for a in axes)``.
    """

    if len(axes) != grid.dimension:
        raise GridMismatchError(f"expected {grid.dimension} coordinate axes, got {len(axes)}")
    lead = coeffs.ndim - grid.dimension
    values = coeffs
    for coordinates in axes:
        values = np.tensordot(values, _axis_exponentials(grid, coordinates), axes=([lead], [1]))
    return values.real


def interpolate_at(coeffs: np.ndarray, grid: TorusGrid, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant at scattered points of shape (P, d)."""

    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[-1] != grid.dimension:
        raise GridMismatchError(f"points must have trailing dimension {grid.dimension}, got {pts.shape}")
    lead = coeffs.shape[: coeffs.ndim - grid.dimension]
    flat = coeffs.reshape((-1,) + grid.shape)
    basis = [_axis_exponentials(grid, pts[:, axis]) for axis in range(grid.dimension)]
    if grid.dimension == 2:
        values = np.einsum("cab,pa,pb->cp", flat, *basis)
    else:
        values = np.einsum("cabe,pa,pb,pe->cp", flat, *basis)
    return values.real.reshape(lead + (pts.shape[0],))


__all__ = [
    "TorusGrid",
    "band_limit",
    "derivative",
    "divergence",
    "forward",
    "gradient",
    "interpolate_at",
    "interpolate_on_axes",
    "inverse",
    "inverse_laplacian",
    "l2_norm",
    "leray_project",
    "pad_spectrum",
    "truncate_spectrum",
]
