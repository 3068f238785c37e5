"""On-disk cache of Green columns.

Layout under ``green.cache_dir``::

    <family>/<digest>.shom

where ``digest`` is the SHA-256 of the canonical JSON key
``{family, params, eps, tensor, lengths, cells, source_cell, component, adjoint}``.
Each file is a SHOMv1 snapshot holding ``velocity`` (extended face vector)
and ``pressure`` (cell centers). Writes go through a process-local lock and
an atomic rename, so concurrent writers never leave partial files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from pathlib import Path
from typing import Any

import numpy as np

from shom.green.columns import GreenColumn
from shom.observability import get_observability, to_builtin
from shom.settings import Settings, get_settings
from shom.snapshot import Snapshot, SnapshotFormatError, read_snapshot, write_snapshot
from shom.stokes.problem import StokesProblem

LOGGER = logging.getLogger(__name__)


def column_key(
    problem: StokesProblem, source_cell: tuple[int, ...], component: int, *, adjoint: bool
) -> dict[str, Any]:
    """Canonical JSON-safe cache key of one column."""

    if problem.field is not None:
        family, params, eps, tensor = problem.field.family, dict(problem.field.params), problem.eps, None
    else:
        family, params, eps, tensor = "constant-tensor", {}, None, np.asarray(problem.tensor).round(15).tolist()
    payload = to_builtin(
        {
            "family": family,
            "params": params,
            "eps": eps,
            "tensor": tensor,
            "lengths": list(problem.domain.lengths),
            "cells": list(problem.domain.cells),
            "source_cell": list(source_cell),
            "component": component,
            "adjoint": adjoint,
        }
    )
    return json.loads(json.dumps(payload, sort_keys=True))


class ColumnCache:
    """Persist and reload :class:`GreenColumn` solves keyed by problem, source and component."""

    def __init__(self, root: Path | None = None, *, settings: Settings | None = None) -> None:
        resolved = settings or get_settings()
        self.root = Path(root) if root is not None else Path(resolved.green.cache_dir)
        self._lock = threading.Lock()
        self._obs = get_observability(component="green-cache", settings=resolved)

    def path_for(self, key: dict[str, Any]) -> Path:
        digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode("utf-8")).hexdigest()
        family = str(key["family"]).replace("/", "_").replace("*", "-adj")
        return self.root / family / f"{digest}.shom"

    def load(
        self, problem: StokesProblem, source_cell: tuple[int, ...], component: int, *, adjoint: bool
    ) -> GreenColumn | None:
        key = column_key(problem, source_cell, component, adjoint=adjoint)
        path = self.path_for(key)
        if not path.exists():
            self._obs.increment("miss")
            return None
        try:
            snapshot = read_snapshot(path)
        except (OSError, SnapshotFormatError) as exc:
            LOGGER.warning("Ignoring unreadable cached column %s: %s", path, exc)
            self._obs.increment("miss")
            return None
        if snapshot.metadata.get("key") != key:
            LOGGER.warning("Cached column %s does not match its key; ignoring", path)
            self._obs.increment("miss")
            return None
        self._obs.increment("hit")
        h = problem.domain.spacing
        return GreenColumn(
            problem=problem,
            source=(np.asarray(source_cell, dtype=float) + 0.5) * h,
            source_cell=tuple(source_cell),
            component=component,
            velocity=snapshot["velocity"],
            pressure=snapshot["pressure"].reshape(problem.domain.cell_shape),
            adjoint=adjoint,
            stats=dict(snapshot.metadata.get("stats", {}), cached=True),
        )

    def store(self, column: GreenColumn) -> Path:
        key = column_key(column.problem, column.source_cell, column.component, adjoint=column.adjoint)
        path = self.path_for(key)
        snapshot = Snapshot(
            dimension=column.dimension,
            arrays={"velocity": column.velocity, "pressure": column.pressure},
            grid=column.domain.describe(),
            metadata={"key": key, "stats": column.stats, "kind": "green-column"},
        )
        with self._lock:
            write_snapshot(path, snapshot)
        self._obs.increment("store")
        return path


__all__ = ["ColumnCache", "column_key"]
