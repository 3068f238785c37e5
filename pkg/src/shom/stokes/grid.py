"""Box domains and their staggered (MAC) discretization.

Layout on a box with ``n_k`` cubic cells of side ``h`` along axis ``k``:

* pressure lives at cell centers;
* velocity component ``u^beta`` lives on an extended grid with the
  ``n_beta + 1`` face nodes along ``beta`` and, along every other axis, the
  ``n_k`` cell centers flanked by the two wall points. Wall points carry the
  Dirichlet datum; all others are unknowns except the wall nodes along beta.

The gradient block ``D[j, beta]`` differences ``u^beta`` along ``j``. Diagonal
blocks land on cell centers; off-diagonal blocks land on nodes along both
``j`` and ``beta``, using half spacing next to the wall. Trapezoid weights on
those node grids make the energy form coincide with the ghost-reflection MAC
stencil.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache, reduce
from itertools import product

import numpy as np
from scipy import sparse

from shom.errors import PreconditionError

MIN_CELLS = 8


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box [0, L_1] x ... x [0, L_d] split into cubic cells."""

    dimension: int
    lengths: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lengths", tuple(float(value) for value in self.lengths))
        object.__setattr__(self, "cells", tuple(int(value) for value in self.cells))
        if self.dimension not in (2, 3):
            raise PreconditionError(f"box dimension must be 2 or 3 (got {self.dimension})")
        if len(self.lengths) != self.dimension or len(self.cells) != self.dimension:
            raise PreconditionError("lengths and cells must have one entry per axis")
        if min(self.cells) < MIN_CELLS:
            raise PreconditionError(f"each axis needs at least {MIN_CELLS} cells (got {self.cells})")
        if min(self.lengths) <= 0:
            raise PreconditionError(f"box extents must be positive (got {self.lengths})")
        spacings = [length / count for length, count in zip(self.lengths, self.cells)]
        if max(spacings) - min(spacings) > 1e-12 * max(spacings):
            raise PreconditionError(f"cells must be cubic (spacings {spacings})")

    @classmethod
    def cube(cls, dimension: int, length: float = 1.0, cells: int = 32) -> "BoxDomain":
        return cls(dimension=dimension, lengths=(float(length),) * dimension, cells=(int(cells),) * dimension)

    @property
    def spacing(self) -> float:
        return self.lengths[0] / self.cells[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def boundary_area(self) -> float:
        total = 0.0
        for axis in range(self.dimension):
            total += 2.0 * float(np.prod([length for k, length in enumerate(self.lengths) if k != axis]))
        return total

    @property
    def center(self) -> np.ndarray:
        return 0.5 * np.asarray(self.lengths, dtype=float)

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return tuple(self.cells)

    def center_axes(self) -> list[np.ndarray]:
        h = self.spacing
        return [(np.arange(count) + 0.5) * h for count in self.cells]

    def center_points(self) -> np.ndarray:
        """Cell centers of shape (n_1, ..., n_d, d)."""

        return np.stack(np.meshgrid(*self.center_axes(), indexing="ij"), axis=-1)

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.min(np.minimum(pts, np.asarray(self.lengths) - pts), axis=-1)

    def edge_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance to the nearest corner (d=2) or edge (d=3) of the box."""

        pts = np.asarray(points, dtype=float)
        faces = np.sort(np.minimum(pts, np.asarray(self.lengths) - pts), axis=-1)
        return np.sqrt(faces[..., 0] ** 2 + faces[..., 1] ** 2)

    def interior_mask(self, points: np.ndarray, *, margin_cells: int, corner_fraction: float) -> np.ndarray:
        """Points at least ``margin_cells * h`` from the boundary and clear of corners and edges."""

        side = min(self.lengths)
        return (self.distance_to_boundary(points) >= margin_cells * self.spacing) & (
            self.edge_distance(points) >= corner_fraction * side
        )

    def contains(self, point: np.ndarray) -> bool:
        pt = np.asarray(point, dtype=float)
        return bool(np.all(pt > 0) and np.all(pt < np.asarray(self.lengths)))

    def locate_cell(self, point: np.ndarray) -> tuple[int, ...]:
        """Index of the cell containing ``point``."""

        pt = np.asarray(point, dtype=float)
        index = np.floor(pt / self.spacing).astype(int)
        return tuple(int(np.clip(i, 0, count - 1)) for i, count in zip(index, self.cells))

    def describe(self) -> dict[str, object]:
        return {
            "dimension": self.dimension,
            "lengths": list(self.lengths),
            "cells": list(self.cells),
            "h": self.spacing,
        }


# ---------------------------------------------------------------------------
# One-dimensional building blocks
# ---------------------------------------------------------------------------


def _difference_to_centers(n: int, h: float) -> sparse.csr_matrix:
    """(u[m+1] - u[m]) / h from n+1 nodes to n centers."""

    return sparse.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr") / h


def _select_centers(n: int) -> sparse.csr_matrix:
    """Pick the n centers out of the wall-flanked n+2 points."""

    return sparse.eye(n, n + 2, k=1, format="csr")


def _difference_to_nodes(n: int, h: float) -> sparse.csr_matrix:
    """Differences of wall-flanked center values onto the n+1 nodes (half spacing at the walls)."""

    spacing = np.full(n + 1, h)
    spacing[0] = spacing[-1] = 0.5 * h
    return sparse.diags([-1.0 / spacing, 1.0 / spacing], [0, 1], shape=(n + 1, n + 2), format="csr")


def _average_nodes(n: int) -> sparse.csr_matrix:
    return sparse.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


def _trapezoid(n: int) -> np.ndarray:
    weights = np.ones(n + 1)
    weights[0] = weights[-1] = 0.5
    return weights


def _kron_all(factors: list[sparse.spmatrix]) -> sparse.csr_matrix:
    return reduce(lambda left, right: sparse.kron(left, right, format="csr"), factors).tocsr()


def _outer_all(vectors: list[np.ndarray]) -> np.ndarray:
    return reduce(np.multiply.outer, vectors).ravel()


def _mesh(axes: list[np.ndarray]) -> np.ndarray:
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def _embed(block: sparse.spmatrix, offset: int, total: int) -> sparse.csr_matrix:
    coo = block.tocoo()
    return sparse.csr_matrix((coo.data, (coo.row, coo.col + offset)), shape=(block.shape[0], total))


@dataclass(frozen=True, eq=False)
class GradientBlock:
    """Discrete d_j u^beta on its natural location grid."""

    direction: int
    component: int
    matrix: sparse.csr_matrix
    node_axes: tuple[int, ...]
    shape: tuple[int, ...]
    points: np.ndarray
    weights: np.ndarray
    to_centers: sparse.csr_matrix


class StaggeredGrid:
    """Index bookkeeping and sparse operators of the MAC scheme on one box."""

    def __init__(self, domain: BoxDomain) -> None:
        self.domain = domain
        d = domain.dimension
        h = domain.spacing
        n = domain.cells
        self.dimension = d
        self.spacing = h
        self.cell_shape = tuple(n)
        self.cell_count = int(np.prod(n))
        self.cell_volume = h**d

        centers = domain.center_axes()
        nodes = [np.arange(count + 1) * h for count in n]
        flanked = [np.concatenate([[0.0], centers[k], [domain.lengths[k]]]) for k in range(d)]

        self.component_shapes: list[tuple[int, ...]] = []
        self.component_axes: list[list[np.ndarray]] = []
        offsets = [0]
        interior_parts = []
        for beta in range(d):
            shape = tuple(n[k] + 1 if k == beta else n[k] + 2 for k in range(d))
            axes = [nodes[k] if k == beta else flanked[k] for k in range(d)]
            self.component_shapes.append(shape)
            self.component_axes.append(axes)
            inside = [np.zeros(size, dtype=bool) for size in shape]
            for k in range(d):
                inside[k][1 : shape[k] - 1] = True
            interior_parts.append(np.flatnonzero(_outer_all(inside).astype(bool)) + offsets[-1])
            offsets.append(offsets[-1] + int(np.prod(shape)))
        self.offsets = tuple(offsets[:-1])
        self.size = offsets[-1]
        self.interior = np.concatenate(interior_parts)
        mask = np.zeros(self.size, dtype=bool)
        mask[self.interior] = True
        self.boundary = np.flatnonzero(~mask)
        self.component_of = np.concatenate(
            [np.full(int(np.prod(shape)), beta) for beta, shape in enumerate(self.component_shapes)]
        )
        self.positions = np.concatenate([_mesh(axes) for axes in self.component_axes], axis=0)

        self.blocks: dict[tuple[int, int], GradientBlock] = {}
        for j, beta in product(range(d), range(d)):
            self.blocks[(j, beta)] = self._gradient_block(j, beta, centers, nodes)
        self.divergence = sum(self.blocks[(beta, beta)].matrix for beta in range(d)).tocsr()
        self.center_points = _mesh(centers)

    def _gradient_block(
        self, j: int, beta: int, centers: list[np.ndarray], nodes: list[np.ndarray]
    ) -> GradientBlock:
        d = self.dimension
        h = self.spacing
        n = self.cell_shape
        factors: list[sparse.spmatrix] = []
        averaging: list[sparse.spmatrix] = []
        weight_axes: list[np.ndarray] = []
        location_axes: list[np.ndarray] = []
        node_axes = () if j == beta else tuple(sorted((j, beta)))
        for k in range(d):
            if k == beta == j:
                factors.append(_difference_to_centers(n[k], h))
            elif k == beta:
                factors.append(sparse.eye(n[k] + 1, format="csr"))
            elif k == j:
                factors.append(_difference_to_nodes(n[k], h))
            else:
                factors.append(_select_centers(n[k]))
            if k in node_axes:
                averaging.append(_average_nodes(n[k]))
                weight_axes.append(_trapezoid(n[k]))
                location_axes.append(nodes[k])
            else:
                averaging.append(sparse.eye(n[k], format="csr"))
                weight_axes.append(np.ones(n[k]))
                location_axes.append(centers[k])
        block = _kron_all(factors)
        return GradientBlock(
            direction=j,
            component=beta,
            matrix=_embed(block, self.offsets[beta], self.size),
            node_axes=node_axes,
            shape=tuple(len(axis) for axis in location_axes),
            points=_mesh(location_axes),
            weights=self.cell_volume * _outer_all(weight_axes),
            to_centers=_kron_all(averaging),
        )

    # -- field helpers ----------------------------------------------------

    def split(self, vector: np.ndarray) -> list[np.ndarray]:
        """Split a full extended velocity vector into per-component arrays."""

        parts = []
        for beta, shape in enumerate(self.component_shapes):
            start = self.offsets[beta]
            parts.append(np.asarray(vector[start : start + int(np.prod(shape))]).reshape(shape))
        return parts

    def join(self, components: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([np.asarray(part, dtype=float).ravel() for part in components])

    def sample_vector(self, function, indices: np.ndarray) -> np.ndarray:
        """Evaluate a vector-valued function at the extended points ``indices``, keeping their own components."""

        if indices.size == 0:
            return np.zeros(0)
        values = np.asarray(function(self.positions[indices]), dtype=float).reshape(len(indices), self.dimension)
        return values[np.arange(len(indices)), self.component_of[indices]]

    def pressure_gradient(self, pressure: np.ndarray) -> np.ndarray:
        """Face differences (p[m] - p[m-1]) / h at the interior velocity unknowns."""

        p = np.asarray(pressure, dtype=float).reshape(self.cell_shape)
        parts = []
        for beta in range(self.dimension):
            grad = np.diff(p, axis=beta) / self.spacing
            parts.append(grad.ravel())
        return np.concatenate(parts)

    def gradient_values(self, vector: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
        return {key: block.matrix @ vector for key, block in self.blocks.items()}

    def gradient_at_centers(self, vector: np.ndarray) -> np.ndarray:
        """d_j u^beta averaged to cell centers, layout [beta, j, *cells]."""

        d = self.dimension
        out = np.zeros((d, d) + self.cell_shape)
        for (j, beta), block in self.blocks.items():
            out[beta, j] = (block.to_centers @ (block.matrix @ vector)).reshape(self.cell_shape)
        return out

    def velocity_at_centers(self, vector: np.ndarray) -> np.ndarray:
        """Face velocities averaged to cell centers, layout [beta, *cells]."""

        d = self.dimension
        out = np.zeros((d,) + self.cell_shape)
        for beta, part in enumerate(self.split(vector)):
            values = part
            for k in range(d):
                size = values.shape[k]
                if k == beta:
                    values = 0.5 * (np.take(values, range(size - 1), axis=k) + np.take(values, range(1, size), axis=k))
                else:
                    values = np.take(values, range(1, size - 1), axis=k)
            out[beta] = values
        return out


@lru_cache(maxsize=16)
def staggered_grid(domain: BoxDomain) -> StaggeredGrid:
    """Cached :class:`StaggeredGrid` for ``domain``."""

    return StaggeredGrid(domain)


__all__ = ["BoxDomain", "GradientBlock", "StaggeredGrid", "staggered_grid"]
