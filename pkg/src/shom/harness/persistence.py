"""Snapshot conversion for corrector sets and Stokes solutions, plus CSV slices of solutions."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from shom.harness.models import Table
from shom.harness.report import write_csv
from shom.snapshot import Snapshot, SnapshotFormatError, read_snapshot, write_snapshot
from shom.stokes.grid import BoxDomain
from shom.stokes.problem import StokesSolution
from shom.torus.grid import TorusGrid
from shom.torus.models import CorrectorSet

LOGGER = logging.getLogger(__name__)

_OPTIONAL_CORRECTOR_ARRAYS = ("a_hat", "b", "phi", "q")


def correctors_snapshot(correctors: CorrectorSet) -> Snapshot:
    arrays = {
        "chi": correctors.chi,
        "pi": correctors.pi,
        "residuals": correctors.residuals,
        "iterations": np.asarray(correctors.iterations, dtype=float),
    }
    for name in _OPTIONAL_CORRECTOR_ARRAYS:
        value = getattr(correctors, name)
        if value is not None:
            arrays[name] = np.asarray(value, dtype=float)
    return Snapshot(
        dimension=correctors.dimension,
        arrays=arrays,
        grid={"kind": "torus", "size": correctors.grid.size},
        metadata={
            "kind": "correctors",
            "family": correctors.family,
            "params": dict(correctors.params),
            "dealias": correctors.dealias,
        },
    )


def correctors_from_snapshot(snapshot: Snapshot) -> CorrectorSet:
    """Rebuild a :class:`CorrectorSet`; raises SnapshotFormatError for other snapshot kinds."""

    if snapshot.metadata.get("kind") != "correctors" or snapshot.grid.get("kind") != "torus":
        raise SnapshotFormatError("snapshot does not hold cell correctors")
    optional = {name: snapshot.arrays[name] for name in _OPTIONAL_CORRECTOR_ARRAYS if name in snapshot.arrays}
    return CorrectorSet(
        grid=TorusGrid(dimension=snapshot.dimension, size=int(snapshot.grid["size"])),
        chi=snapshot["chi"],
        pi=snapshot["pi"],
        residuals=snapshot["residuals"],
        iterations=snapshot["iterations"].astype(int),
        dealias=bool(snapshot.metadata.get("dealias", True)),
        family=str(snapshot.metadata.get("family", "custom")),
        params=snapshot.metadata.get("params", {}),
        **optional,
    )


def solution_snapshot(solution: StokesSolution, **metadata) -> Snapshot:
    domain = solution.domain
    return Snapshot(
        dimension=solution.dimension,
        arrays={"velocity": solution.velocity, "pressure": solution.pressure},
        grid={"kind": "box", "lengths": list(domain.lengths), "cells": list(domain.cells)},
        metadata={
            "kind": "stokes",
            "residual": solution.residual,
            "divergence_residual": solution.divergence_residual,
            "stats": dict(solution.stats),
            **metadata,
        },
    )


def solution_from_snapshot(snapshot: Snapshot) -> StokesSolution:
    if snapshot.metadata.get("kind") != "stokes" or snapshot.grid.get("kind") != "box":
        raise SnapshotFormatError("snapshot does not hold a Stokes solution")
    domain = BoxDomain(
        dimension=snapshot.dimension,
        lengths=tuple(snapshot.grid["lengths"]),
        cells=tuple(snapshot.grid["cells"]),
    )
    return StokesSolution(
        domain=domain,
        velocity=snapshot["velocity"],
        pressure=snapshot["pressure"].reshape(domain.cell_shape),
        residual=float(snapshot.metadata.get("residual", 0.0)),
        divergence_residual=float(snapshot.metadata.get("divergence_residual", 0.0)),
        stats=dict(snapshot.metadata.get("stats", {})),
    )


def save_correctors(path: Path, correctors: CorrectorSet) -> Path:
    target = write_snapshot(path, correctors_snapshot(correctors))
    LOGGER.info("Saved correctors N=%s to %s", correctors.grid.size, target)
    return target


def load_correctors(path: Path) -> CorrectorSet:
    return correctors_from_snapshot(read_snapshot(path))


def save_solution(path: Path, solution: StokesSolution, **metadata) -> Path:
    target = write_snapshot(path, solution_snapshot(solution, **metadata))
    LOGGER.info("Saved Stokes solution cells=%s to %s", solution.domain.cells, target)
    return target


def load_solution(path: Path) -> StokesSolution:
    return solution_from_snapshot(read_snapshot(path))


def solution_slice(solution: StokesSolution, axis: int, index: int) -> Table:
    """Cell-center velocity and pressure on the layer ``index`` of cells along ``axis``."""

    domain = solution.domain
    d = solution.dimension
    if not 0 <= axis < d:
        raise ValueError(f"axis must be in [0, {d}) (got {axis})")
    if not 0 <= index < domain.cells[axis]:
        raise ValueError(f"index must be in [0, {domain.cells[axis]}) along axis {axis} (got {index})")
    points = np.take(domain.center_points(), index, axis=axis).reshape(-1, d)
    velocity = np.take(solution.velocity_at_centers(), index, axis=axis + 1).reshape(d, -1)
    pressure = np.take(np.asarray(solution.pressure).reshape(domain.cells), index, axis=axis).ravel()
    coordinates = [f"x{k}" for k in range(d)]
    table = Table(columns=coordinates + [f"u{k}" for k in range(d)] + ["p"])
    for row in range(points.shape[0]):
        table.append([*points[row].tolist(), *velocity[:, row].tolist(), float(pressure[row])])
    return table


def write_solution_slice(path: Path, solution: StokesSolution, axis: int, index: int) -> Path:
    target = write_csv(Path(path), solution_slice(solution, axis, index))
    LOGGER.info("Wrote solution slice axis=%s index=%s to %s", axis, index, target)
    return target


__all__ = [
    "correctors_from_snapshot",
    "correctors_snapshot",
    "load_correctors",
    "load_solution",
    "save_correctors",
    "save_solution",
    "solution_from_snapshot",
    "solution_slice",
    "solution_snapshot",
    "write_solution_slice",
]
