"""Unit tests for structured events and the in-process metrics backend."""

from __future__ import annotations

import json
import logging

import numpy as np

from shom.observability import get_observability, metrics_snapshot, to_builtin


def test_counters_and_timings_aggregate_per_component(settings) -> None:
    """Counters sum per scoped name and timings report count, mean and max."""

    obs = get_observability(component="stokes", settings=settings)
    obs.increment("solves")
    obs.increment("solves", value=2.0)
    obs.record_timing("assemble", 4.0)
    obs.record_timing("assemble", 6.0)

    snapshot = metrics_snapshot()
    assert snapshot["stokes.solves"] == {"count": 2, "total": 3.0}
    assert snapshot["stokes.assemble.ms"]["mean"] == 5.0
    assert snapshot["stokes.assemble.ms"]["max"] == 6.0


def test_tags_are_sorted_into_metric_name(settings) -> None:
    """Tags become part of the metric key in sorted order."""

    obs = get_observability(component="green", settings=settings)
    obs.increment("columns", tags={"source": "cache", "d": "2"})

    assert "green.columns[d=2,source=cache]" in metrics_snapshot()


def test_timed_block_records_timing(settings) -> None:
    """The timed context manager records one timing sample."""

    obs = get_observability(component="torus", settings=settings)
    with obs.timed("cell_solve"):
        pass

    assert metrics_snapshot()["torus.cell_solve.ms"]["count"] == 1


def test_emit_event_writes_json_payload(settings, caplog) -> None:
    """Structured events are logged as JSON with numpy values converted."""

    obs = get_observability(component="harness", settings=settings)
    with caplog.at_level(logging.INFO, logger="shom.observability"):
        obs.emit_event("experiment_finished", slope=np.float64(1.5), shape=np.array([2, 3]))

    payload = json.loads(caplog.records[-1].getMessage())
    assert payload["event"] == "experiment_finished"
    assert payload["component"] == "harness"
    assert payload["slope"] == 1.5
    assert payload["shape"] == [2, 3]


def test_to_builtin_converts_nested_numpy_values() -> None:
    """Nested containers with numpy scalars and arrays become JSON-ready builtins."""

    converted = to_builtin({"a": np.int64(3), "b": [np.array([1.0, 2.0])], 4: (np.float32(0.5),)})

    assert converted == {"a": 3, "b": [[1.0, 2.0]], "4": (0.5,)}
    json.dumps(converted)
