"""Assembly and solution of the discrete Dirichlet Stokes system.

The saddle system is

    [ K   B^T ] [u]   [F_rhs]
    [ B   0   ] [p] = [g_rhs]

with K the coefficient-weighted energy form on the interior velocity
unknowns and B = -h^d Div restricted to them. Constant pressures span the
kernel of B^T; the pressure mean is fixed to zero.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from itertools import product

import numpy as np
import pyamg
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, gmres, minres, spsolve

from shom.errors import CompatibilityError, ConvergenceError
from shom.observability import get_observability
from shom.settings import Settings, get_settings
from shom.stokes.grid import StaggeredGrid, staggered_grid
from shom.stokes.problem import StokesProblem, StokesSolution

LOGGER = logging.getLogger(__name__)

COMPATIBILITY_REL_TOL = 1e-8


def stiffness_matrix(grid: StaggeredGrid, coefficient) -> sparse.csr_matrix:
    """Full energy matrix sum D_i^a^T W a_ij^{ab} D_j^b over the extended velocity vector.

    Pairs of gradient blocks sharing a location grid couple there with trapezoid
    weights; other pairs couple after averaging both blocks to cell centers.
    """

    by_location: dict[tuple[int, ...], np.ndarray] = {}
    centers: np.ndarray | None = None
    total = sparse.csr_matrix((grid.size, grid.size))
    for (i, alpha), test in grid.blocks.items():
        for (j, beta), trial in grid.blocks.items():
            if test.node_axes == trial.node_axes:
                if test.node_axes not in by_location:
                    by_location[test.node_axes] = np.asarray(coefficient(test.points))
                weight = test.weights * by_location[test.node_axes][:, i, j, alpha, beta]
                if not np.any(weight):
                    continue
                total = total + test.matrix.T @ sparse.diags(weight) @ trial.matrix
            else:
                if centers is None:
                    centers = np.asarray(coefficient(grid.center_points))
                weight = grid.cell_volume * centers[:, i, j, alpha, beta]
                if not np.any(weight):
                    continue
                left = test.to_centers @ test.matrix
                right = trial.to_centers @ trial.matrix
                total = total + left.T @ sparse.diags(weight) @ right
    return total.tocsr()


@dataclass(frozen=True, eq=False)
class StokesSystem:
    """Assembled saddle system together with the boundary values it was built from."""

    grid: StaggeredGrid
    stiffness: sparse.csr_matrix
    coupling: sparse.csr_matrix
    momentum_rhs: np.ndarray
    continuity_rhs: np.ndarray
    boundary_values: np.ndarray
    divergence_values: np.ndarray
    compatibility_defect: float
    reference_scale: float


def _cell_divergence(problem: StokesProblem, grid: StaggeredGrid) -> np.ndarray:
    if problem.divergence_cells is not None:
        values = np.asarray(problem.divergence_cells, dtype=float).ravel()
        if values.size != grid.cell_count:
            raise ValueError(f"divergence_cells must have {grid.cell_count} entries (got {values.size})")
        return values
    if problem.divergence is None:
        return np.zeros(grid.cell_count)
    return np.asarray(problem.divergence(grid.center_points), dtype=float).reshape(grid.cell_count)


def _boundary_values(problem: StokesProblem, grid: StaggeredGrid) -> np.ndarray:
    if problem.boundary is None:
        return np.zeros(grid.boundary.size)
    return grid.sample_vector(problem.boundary, grid.boundary)


def _data_scale(problem: StokesProblem, g: np.ndarray, fb: np.ndarray) -> float:
    domain = problem.domain
    g_scale = float(np.max(np.abs(g))) * domain.volume if g.size else 0.0
    f_scale = float(np.max(np.abs(fb))) * domain.boundary_area if fb.size else 0.0
    return max(1.0, g_scale, f_scale)


def check_compatibility(problem: StokesProblem) -> float:
    """Signed defect of int g - int_{boundary} f.n under the scheme's quadrature."""

    grid = staggered_grid(problem.domain)
    g = _cell_divergence(problem, grid)
    full = np.zeros(grid.size)
    full[grid.boundary] = _boundary_values(problem, grid)
    boundary_flux = grid.divergence @ full
    return float(grid.cell_volume * (np.sum(g) - np.sum(boundary_flux)))


def assemble_system(problem: StokesProblem) -> StokesSystem:
    """Build the saddle system for ``problem``.

    Raises:
        CompatibilityError: the data violate the compatibility condition.
    """

    grid = staggered_grid(problem.domain)
    interior, boundary = grid.interior, grid.boundary
    volume = grid.cell_volume

    g = _cell_divergence(problem, grid)
    fb = _boundary_values(problem, grid)
    full_boundary = np.zeros(grid.size)
    full_boundary[boundary] = fb
    defect = float(volume * (np.sum(g) - np.sum(grid.divergence @ full_boundary)))
    scale = _data_scale(problem, g, fb)
    if abs(defect) > COMPATIBILITY_REL_TOL * scale:
        raise CompatibilityError(
            f"divergence and boundary data are incompatible (defect {defect:.3e}, scale {scale:.3e})", defect=defect
        )

    full_stiffness = stiffness_matrix(grid, problem.coefficient)
    stiffness = full_stiffness[interior][:, interior].tocsr()

    if problem.force_faces is not None:
        force = np.asarray(problem.force_faces, dtype=float).ravel()
        if force.size != interior.size:
            raise ValueError(f"force_faces must have {interior.size} entries (got {force.size})")
    elif problem.force is not None:
        force = grid.sample_vector(problem.force, interior)
    else:
        force = np.zeros(interior.size)

    momentum = volume * force - full_stiffness[interior] @ full_boundary
    if problem.flux is not None:
        for (j, beta), block in grid.blocks.items():
            values = np.asarray(problem.flux(block.points), dtype=float)[:, j, beta]
            if np.any(values):
                momentum -= block.matrix[:, interior].T @ (block.weights * values)

    divergence_interior = grid.divergence[:, interior]
    coupling = (-volume * divergence_interior).tocsr()
    continuity = -volume * (g - grid.divergence @ full_boundary)
    continuity -= continuity.mean()

    sample = grid.center_points[:: max(1, grid.cell_count // 512)]
    tensors = np.asarray(problem.coefficient(sample))
    d = grid.dimension
    reference = float(np.mean([tensors[:, i, i, a, a].mean() for i, a in product(range(d), range(d))]))
    return StokesSystem(
        grid=grid,
        stiffness=stiffness,
        coupling=coupling,
        momentum_rhs=momentum,
        continuity_rhs=continuity,
        boundary_values=fb,
        divergence_values=g,
        compatibility_defect=defect,
        reference_scale=max(reference, np.finfo(float).tiny),
    )


def _solve_direct(system: StokesSystem) -> tuple[np.ndarray, np.ndarray, dict]:
    nu = system.stiffness.shape[0]
    npress = system.coupling.shape[0]
    mean = sparse.csr_matrix(np.full((npress, 1), system.grid.cell_volume))
    matrix = sparse.bmat(
        [
            [system.stiffness, system.coupling.T, None],
            [system.coupling, None, mean],
            [None, mean.T, None],
        ],
        format="csc",
    )
    rhs = np.concatenate([system.momentum_rhs, system.continuity_rhs, [0.0]])
    solution = spsolve(matrix, rhs)
    return solution[:nu], solution[nu : nu + npress], {"method": "direct", "iterations": 1}


def _solve_krylov(
    system: StokesSystem,
    *,
    tol: float,
    max_iter: int,
    symmetric: bool,
    x0: np.ndarray | None,
) -> tuple[np.ndarray, np.ndarray, dict]:
    nu = system.stiffness.shape[0]
    npress = system.coupling.shape[0]
    stiffness, coupling = system.stiffness, system.coupling

    def project(pressure: np.ndarray) -> np.ndarray:
        return pressure - pressure.mean()

    def matvec(vector: np.ndarray) -> np.ndarray:
        u, p = vector[:nu], project(vector[nu:])
        return np.concatenate([stiffness @ u + coupling.T @ p, project(coupling @ u)])

    hierarchy = pyamg.smoothed_aggregation_solver(
        stiffness, symmetry="symmetric" if symmetric else "nonsymmetric"
    )
    velocity_block = hierarchy.aspreconditioner(cycle="V")
    pressure_scale = system.reference_scale / system.grid.cell_volume

    def precondition(vector: np.ndarray) -> np.ndarray:
        return np.concatenate([velocity_block.matvec(vector[:nu]), project(pressure_scale * vector[nu:])])

    size = nu + npress
    operator = LinearOperator((size, size), matvec=matvec, dtype=float)
    preconditioner = LinearOperator((size, size), matvec=precondition, dtype=float)
    rhs = np.concatenate([system.momentum_rhs, project(system.continuity_rhs)])
    history: list[float] = []
    if symmetric:
        counter = {"n": 0}

        def tick(_xk: np.ndarray) -> None:
            counter["n"] += 1

        solution, info = minres(
            operator, rhs, x0=x0, rtol=tol, maxiter=max_iter, M=preconditioner, callback=tick
        )
        iterations = counter["n"]
        method = "minres"
    else:
        solution, info = gmres(
            operator,
            rhs,
            x0=x0,
            rtol=tol,
            atol=0.0,
            restart=60,
            maxiter=max(1, max_iter // 60),
            M=preconditioner,
            callback=history.append,
            callback_type="pr_norm",
        )
        iterations = len(history)
        method = "gmres"
    if info != 0:
        residual = float(np.linalg.norm(matvec(solution) - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny))
        raise ConvergenceError(
            f"{method} stopped with info={info} at relative residual {residual:.3e}",
            residual=residual,
            history=history or [residual],
        )
    return solution[:nu], project(solution[nu:]), {"method": method, "iterations": iterations}


def _choose_method(system: StokesSystem, settings: Settings, requested: str | None) -> str:
    method = requested or settings.box.method
    if method != "auto":
        return method
    unknowns = system.stiffness.shape[0] + system.coupling.shape[0]
    if system.grid.dimension == 2 or unknowns <= settings.box.direct_max_unknowns:
        return "direct"
    return "krylov"


def solve_stokes(
    problem: StokesProblem,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
    method: str | None = None,
    x0: np.ndarray | None = None,
) -> StokesSolution:
    """Solve the Dirichlet problem and return velocity and mean-zero pressure.

    Raises:
        CompatibilityError: incompatible divergence and boundary data.
        ConvergenceError: the Krylov solver stops before ``tol``.
    """

    resolved = settings or get_settings()
    tolerance = tol if tol is not None else resolved.box.tol
    obs = get_observability(component="stokes", settings=resolved)
    started = time.perf_counter()

    system = assemble_system(problem)
    grid = system.grid
    chosen = _choose_method(system, resolved, method)
    rhs_norm = float(np.hypot(np.linalg.norm(system.momentum_rhs), np.linalg.norm(system.continuity_rhs)))
    if rhs_norm == 0.0:
        u_int = np.zeros(system.stiffness.shape[0])
        pressure = np.zeros(grid.cell_count)
        stats = {"method": chosen, "iterations": 0}
    elif chosen == "direct":
        u_int, pressure, stats = _solve_direct(system)
    else:
        u_int, pressure, stats = _solve_krylov(
            system,
            tol=tolerance,
            max_iter=resolved.box.max_iter,
            symmetric=problem.is_symmetric,
            x0=x0,
        )
    pressure = pressure - pressure.mean()

    velocity = np.zeros(grid.size)
    velocity[grid.interior] = u_int
    velocity[grid.boundary] = system.boundary_values

    momentum = system.stiffness @ u_int + system.coupling.T @ pressure - system.momentum_rhs
    continuity = system.coupling @ u_int - system.continuity_rhs
    residual = float(np.hypot(np.linalg.norm(momentum), np.linalg.norm(continuity)) / max(rhs_norm, 1.0))
    divergence = grid.divergence @ velocity
    div_residual = float(np.max(np.abs(divergence - system.divergence_values))) if divergence.size else 0.0

    elapsed_ms = (time.perf_counter() - started) * 1000.0
    stats.update(
        {
            "unknowns": int(system.stiffness.shape[0] + system.coupling.shape[0]),
            "compatibility_defect": system.compatibility_defect,
            "elapsed_ms": round(elapsed_ms, 3),
        }
    )
    obs.record_timing("solve", elapsed_ms, tags={"method": stats["method"], "d": str(grid.dimension)})
    obs.increment("solves", tags={"method": stats["method"]})
    LOGGER.debug(
        "Stokes solve label=%s method=%s unknowns=%s residual=%.3e",
        problem.label,
        stats["method"],
        stats["unknowns"],
        residual,
    )
    return StokesSolution(
        domain=problem.domain,
        velocity=velocity,
        pressure=pressure.reshape(grid.cell_shape),
        residual=residual,
        divergence_residual=div_residual,
        stats=stats,
    )


def solve_homogenized(
    problem: StokesProblem,
    a_hat: np.ndarray | None = None,
    tol: float | None = None,
    *,
    settings: Settings | None = None,
    method: str | None = None,
) -> StokesSolution:
    """Solve the constant-coefficient problem with the effective tensor ``a_hat``.

    ``problem`` may already carry a constant tensor, in which case ``a_hat`` is optional.
    """

    target = problem.homogenized(a_hat) if a_hat is not None else problem
    if target.tensor is None:
        raise ValueError("solve_homogenized needs a constant tensor (pass a_hat)")
    return solve_stokes(target, tol, settings=settings, method=method)


__all__ = [
    "StokesSystem",
    "assemble_system",
    "check_compatibility",
    "solve_homogenized",
    "solve_stokes",
    "stiffness_matrix",
]
