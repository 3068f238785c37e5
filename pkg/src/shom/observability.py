"""Observability helpers for structured logging and in-process solver metrics."""

from __future__ import annotations

import json
import logging
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterator, Mapping

import numpy as np

from shom.settings import Settings, get_settings

_LOGGER = logging.getLogger("shom.observability")
_METRICS_BACKEND_LOCK = threading.Lock()
_SHARED_METRICS: "_InMemoryMetricsBackend | None" = None


class Observability:
    """Emit structured logs and record counters/timings for solver runs."""

    def __init__(
        self,
        *,
        settings: Settings,
        component: str | None = None,
        metrics_backend: "_InMemoryMetricsBackend | None" = None,
        logger: logging.Logger | None = None,
    ) -> None:
        self.settings = settings
        self.component = component or "core"
        self._logger = logger or _LOGGER
        self._structured_logging = bool(settings.observability.structured_logging)
        self._metrics = metrics_backend

    def emit_event(self, event: str, **fields: Any) -> None:
        """Emit a structured log if enabled."""

        payload = {
            "event": event,
            "component": self.component,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            **_sanitize_dict(fields),
        }
        if self._structured_logging:
            message = json.dumps(payload, default=to_builtin)
            self._logger.info(message)
        else:
            self._logger.info("%s | %s", event, payload)

    def increment(self, metric: str, *, value: float = 1.0, tags: Mapping[str, str] | None = None) -> None:
        """Increment a counter-style metric."""

        if not self._metrics:
            return
        self._metrics.increment(self._scoped(metric), value=value, tags=_normalize_tags(tags))

    def record_timing(self, metric: str, value_ms: float, *, tags: Mapping[str, str] | None = None) -> None:
        """Record a timing metric in milliseconds."""

        if not self._metrics:
            return
        self._metrics.record_timing(self._scoped(metric), value_ms=value_ms, tags=_normalize_tags(tags))

    @contextmanager
    def timed(self, metric: str, *, tags: Mapping[str, str] | None = None) -> Iterator[None]:
        """Time the wrapped block and record it under ``metric``."""

        started = time.perf_counter()
        try:
            yield
        finally:
            self.record_timing(metric, (time.perf_counter() - started) * 1000.0, tags=tags)

    def _scoped(self, metric: str) -> str:
        return f"{self.component}.{metric}"


def get_observability(*, component: str | None = None, settings: Settings | None = None) -> Observability:
    """Return an :class:`Observability` instance for the requested component."""

    resolved = settings or get_settings()
    backend = _build_shared_metrics_backend()
    return Observability(settings=resolved, component=component, metrics_backend=backend, logger=_LOGGER)


def metrics_snapshot() -> dict[str, dict[str, float]]:
    """Return aggregated counters and timings recorded since the last reset."""

    backend = _build_shared_metrics_backend()
    return backend.snapshot()


def reset_observability_cache() -> None:
    """Reset cached metrics backends (used in tests and between harness runs)."""

    global _SHARED_METRICS
    with _METRICS_BACKEND_LOCK:
        _SHARED_METRICS = None


# ---------------------------------------------------------------------------
# Metrics backend
# ---------------------------------------------------------------------------


@dataclass
class _MetricAggregate:
    count: int = 0
    total: float = 0.0
    maximum: float = 0.0

    def add(self, value: float) -> None:
        self.count += 1
        self.total += value
        self.maximum = max(self.maximum, value)


@dataclass
class _InMemoryMetricsBackend:
    """Thread-safe aggregation of counters and timings inside one process."""

    counters: dict[str, _MetricAggregate] = field(default_factory=dict)
    timings: dict[str, _MetricAggregate] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()

    def increment(self, metric: str, *, value: float, tags: Mapping[str, str] | None) -> None:
        with self._lock:
            self.counters.setdefault(_tagged(metric, tags), _MetricAggregate()).add(value)

    def record_timing(self, metric: str, *, value_ms: float, tags: Mapping[str, str] | None) -> None:
        with self._lock:
            self.timings.setdefault(_tagged(metric, tags), _MetricAggregate()).add(value_ms)

    def snapshot(self) -> dict[str, dict[str, float]]:
        with self._lock:
            summary: dict[str, dict[str, float]] = {}
            for name, agg in sorted(self.counters.items()):
                summary[name] = {"count": agg.count, "total": agg.total}
            for name, agg in sorted(self.timings.items()):
                summary[f"{name}.ms"] = {
                    "count": agg.count,
                    "total": round(agg.total, 3),
                    "mean": round(agg.total / agg.count, 3) if agg.count else 0.0,
                    "max": round(agg.maximum, 3),
                }
            return summary


def _build_shared_metrics_backend() -> _InMemoryMetricsBackend:
    global _SHARED_METRICS
    with _METRICS_BACKEND_LOCK:
        if _SHARED_METRICS is None:
            _SHARED_METRICS = _InMemoryMetricsBackend()
        return _SHARED_METRICS


# ---------------------------------------------------------------------------
# Serialization helpers
# ---------------------------------------------------------------------------


def to_builtin(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, list):
        return [to_builtin(item) for item in value]
    if isinstance(value, tuple):
        return tuple(to_builtin(item) for item in value)
    if isinstance(value, dict):
        return {str(key): to_builtin(val) for key, val in value.items()}
    return str(value)


def _tagged(metric: str, tags: Mapping[str, str] | None) -> str:
    if not tags:
        return metric
    tag_block = ",".join(f"{key}={val}" for key, val in sorted(tags.items()))
    return f"{metric}[{tag_block}]"


def _normalize_tags(tags: Mapping[str, str] | None) -> Mapping[str, str] | None:
    if not tags:
        return None
    normalized: dict[str, str] = {}
    for key, value in tags.items():
        if value is None:
            continue
        normalized[str(key)] = str(value)
    return normalized or None


def _sanitize_dict(payload: Mapping[str, Any]) -> Mapping[str, Any]:
    sanitized: dict[str, Any] = {}
    for key, value in payload.items():
        if isinstance(value, Mapping):
            sanitized[str(key)] = _sanitize_dict(value)
        else:
            sanitized[str(key)] = value
    return sanitized


__all__ = ["Observability", "get_observability", "metrics_snapshot", "reset_observability_cache", "to_builtin"]
