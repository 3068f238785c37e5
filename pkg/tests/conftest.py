"""Shared fixtures for the shom test suite."""

from __future__ import annotations

import pytest

from shom.observability import reset_observability_cache
from shom.settings import reload_settings


@pytest.fixture()
def settings(tmp_path, monkeypatch):
    """Fresh settings with output, snapshot and cache directories under ``tmp_path``."""

    monkeypatch.setenv("SHOM_RUNTIME__OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("SHOM_RUNTIME__SNAPSHOT_DIR", str(tmp_path / "snapshots"))
    monkeypatch.setenv("SHOM_GREEN__CACHE_DIR", str(tmp_path / "green_cache"))
    monkeypatch.setenv("SHOM_TORUS__GRID_SIZE", "16")
    monkeypatch.delenv("SHOM_SETTINGS_FILE", raising=False)
    yield reload_settings(env="test")
    reload_settings()


@pytest.fixture(autouse=True)
def _fresh_metrics():
    reset_observability_cache()
    yield
    reset_observability_cache()
