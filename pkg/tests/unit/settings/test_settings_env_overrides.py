"""Unit tests covering environment variable and TOML overrides for settings."""

from __future__ import annotations

import textwrap

import pytest
from pydantic import ValidationError

from shom.settings.config import PROJECT_ROOT, reload_settings


def _clear_env(monkeypatch: object, *names: str) -> None:
    """Remove env vars for every alias and prefixed variant."""

    for name in names:
        monkeypatch.delenv(name, raising=False)
        if name.startswith("SHOM_"):
            monkeypatch.delenv(name.removeprefix("SHOM_"), raising=False)
        else:
            monkeypatch.delenv(f"SHOM_{name}", raising=False)


@pytest.fixture(autouse=True)
def _restore_settings():
    yield
    reload_settings()


def test_torus_grid_size_env_override(monkeypatch: object) -> None:
    """The torus grid size follows SHOM_TORUS__GRID_SIZE."""

    _clear_env(monkeypatch, "SHOM_TORUS__GRID_SIZE", "TORUS_GRID_SIZE", "SHOM_SETTINGS_FILE")

    default_settings = reload_settings(env="dev")
    assert default_settings.torus.grid_size == 64

    monkeypatch.setenv("SHOM_TORUS__GRID_SIZE", "128")
    overridden = reload_settings(env="dev")
    assert overridden.torus.grid_size == 128


def test_torus_grid_size_must_be_power_of_two(monkeypatch: object) -> None:
    """Grid sizes that are not powers of two are rejected."""

    _clear_env(monkeypatch, "SHOM_TORUS__GRID_SIZE", "TORUS_GRID_SIZE", "SHOM_SETTINGS_FILE")
    monkeypatch.setenv("SHOM_TORUS__GRID_SIZE", "100")

    with pytest.raises(ValidationError):
        reload_settings(env="dev")


def test_box_method_rejects_unknown_solver(monkeypatch: object) -> None:
    """Only auto, direct and krylov are accepted solver methods."""

    _clear_env(monkeypatch, "SHOM_BOX__METHOD", "BOX_METHOD", "SHOM_SETTINGS_FILE")
    monkeypatch.setenv("SHOM_BOX__METHOD", "multigrid")

    with pytest.raises(ValidationError):
        reload_settings(env="dev")


def test_verdict_thresholds_env_override(monkeypatch: object) -> None:
    """Verdict thresholds keep their defaults until overridden."""

    _clear_env(monkeypatch, "SHOM_VERDICTS__RATE_MIN_SLOPE", "VERDICTS__RATE_MIN_SLOPE", "SHOM_SETTINGS_FILE")

    default_settings = reload_settings(env="dev")
    assert default_settings.verdicts.rate_min_slope == pytest.approx(0.9)
    assert default_settings.verdicts.halving_factor_min == pytest.approx(1.6)
    assert default_settings.verdicts.halving_factor_max == pytest.approx(2.6)

    monkeypatch.setenv("SHOM_VERDICTS__RATE_MIN_SLOPE", "0.75")
    overridden = reload_settings(env="dev")
    assert overridden.verdicts.rate_min_slope == pytest.approx(0.75)


def test_relative_output_paths_resolve_under_project_root(monkeypatch: object) -> None:
    """Relative runtime and cache directories are anchored at the project root."""

    _clear_env(monkeypatch, "SHOM_RUNTIME__OUTPUT_DIR", "OUTPUT_DIR", "SHOM_GREEN__CACHE_DIR", "SHOM_SETTINGS_FILE")
    monkeypatch.setenv("SHOM_RUNTIME__OUTPUT_DIR", "data/custom_runs")

    settings = reload_settings(env="dev")
    assert settings.runtime.output_dir == (PROJECT_ROOT / "data" / "custom_runs").resolve()
    assert settings.green.cache_dir.is_absolute()


def test_settings_file_override(tmp_path, monkeypatch: object) -> None:
    """TOML config files populate settings without manual env vars."""

    _clear_env(
        monkeypatch,
        "SHOM_TORUS__GRID_SIZE",
        "TORUS_GRID_SIZE",
        "SHOM_RUNTIME__THREADS",
        "THREADS",
        "SHOM_VERDICTS__RATIO_DRIFT_MAX",
    )

    settings_file = tmp_path / "settings.local.toml"
    settings_file.write_text(
        textwrap.dedent(
            """
            [runtime]
            threads = 3

            [torus]
            grid_size = 32

            [verdicts]
            ratio_drift_max = 2.5
            """
        ).strip(),
        encoding="utf-8",
    )
    monkeypatch.setenv("SHOM_SETTINGS_FILE", str(settings_file))

    settings = reload_settings(env="dev")
    assert settings.runtime.threads == 3
    assert settings.torus.grid_size == 32
    assert settings.verdicts.ratio_drift_max == pytest.approx(2.5)
    assert settings_file in settings.config_files
