"""Configuration loader for shom solvers and experiments using Pydantic settings."""

from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from pydantic import AliasChoices, Field, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]

ENV_VAR_NAME = "SHOM_ENV"
DEFAULT_ENV = "local"
PROJECT_ROOT = Path(__file__).resolve().parents[3]
CONFIG_DIR = PROJECT_ROOT / "config"
DEFAULT_CONFIG_FILE = CONFIG_DIR / "settings.default.toml"
LOCAL_CONFIG_FILE = CONFIG_DIR / "settings.local.toml"
SETTINGS_FILE_ENV_VAR = "SHOM_SETTINGS_FILE"


def _resolve_env(explicit_env: str | None = None) -> str:
    """Return the active environment name.

    Args:
        explicit_env: Environment value supplied directly by the caller.

    Returns:
        A stripped environment name, falling back to ``DEFAULT_ENV``.
    """

    env = explicit_env or os.getenv(ENV_VAR_NAME) or DEFAULT_ENV
    return env.strip()


def _env_file_candidates(env: str) -> list[Path]:
    """List candidate ``.env`` files used during settings resolution."""

    return [
        PROJECT_ROOT / ".env",
        PROJECT_ROOT / f".env.{env}",
        PROJECT_ROOT / ".env.local",
    ]


def _resolve_config_path(raw_path: str | None) -> Path | None:
    """Return an absolute config path from user input."""

    if not raw_path:
        return None
    candidate = Path(raw_path).expanduser()
    if not candidate.is_absolute():
        candidate = (PROJECT_ROOT / candidate).resolve()
    return candidate


def _config_file_priority(include_missing: bool = False) -> tuple[Path, ...]:
    """Return config files in descending precedence order."""

    ordered: list[Path] = []
    env_override = _resolve_config_path(os.getenv(SETTINGS_FILE_ENV_VAR))
    if env_override:
        ordered.append(env_override)
    ordered.append(LOCAL_CONFIG_FILE)
    ordered.append(DEFAULT_CONFIG_FILE)
    if include_missing:
        return tuple(ordered)
    return tuple(path for path in ordered if path.exists())


def _is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0


class TomlConfigSettingsSource(PydanticBaseSettingsSource):
    """Pydantic settings source that loads values from a TOML file."""

    def __init__(self, settings_cls: type[BaseSettings], path: Path) -> None:
        super().__init__(settings_cls)
        self.path = path
        self._data: dict[str, Any] | None = None

    def _load(self) -> dict[str, Any]:
        if self._data is not None:
            return self._data
        if not self.path.exists():
            self._data = {}
            return self._data
        try:
            with self.path.open("rb") as handle:
                self._data = tomllib.load(handle)
        except tomllib.TOMLDecodeError as exc:  # pragma: no cover - invalid files surface immediately
            raise ValueError(f"Invalid TOML syntax in {self.path}") from exc
        return self._data

    def __call__(self) -> dict[str, Any]:  # pragma: no cover - trivial wrapper
        return self._load()

    def get_field_value(self, field_name: str, field):  # pragma: no cover - passthrough helper
        data = self._load()
        return data.get(field_name), field_name in data


class RuntimeSettings(BaseSettings):
    """Process-level runtime controls."""

    model_config = SettingsConfigDict(extra="ignore", populate_by_name=True)

    log_level: str = Field(
        default="INFO",
        validation_alias=AliasChoices("LOG_LEVEL", "RUNTIME__LOG_LEVEL"),
    )
    threads: int = Field(
        default=1,
        ge=1,
        validation_alias=AliasChoices("THREADS", "RUNTIME__THREADS"),
    )
    seed: int = Field(
        default=20170601,
        validation_alias=AliasChoices("SEED", "RUNTIME__SEED"),
    )
    output_dir: Path = Field(
        default=PROJECT_ROOT / "data" / "runs",
        validation_alias=AliasChoices("OUTPUT_DIR", "RUNTIME__OUTPUT_DIR"),
    )
    snapshot_dir: Path = Field(
        default=PROJECT_ROOT / "data" / "snapshots",
        validation_alias=AliasChoices("SNAPSHOT_DIR", "RUNTIME__SNAPSHOT_DIR"),
    )


class TorusSettings(BaseSettings):
    """Cell-problem discretization on the unit torus."""

    model_config = SettingsConfigDict(extra="ignore", populate_by_name=True)

    grid_size: int = Field(
        default=64,
        validation_alias=AliasChoices("TORUS_GRID_SIZE", "TORUS__GRID_SIZE"),
    )
    tol: float = Field(
        default=1e-8,
        validation_alias=AliasChoices("TORUS_TOL", "TORUS__TOL"),
    )
    max_iter: int = Field(
        default=500,
        ge=1,
        validation_alias=AliasChoices("TORUS_MAX_ITER", "TORUS__MAX_ITER"),
    )
    dealias: bool = Field(
        default=True,
        validation_alias=AliasChoices("TORUS_DEALIAS", "TORUS__DEALIAS"),
    )

    @model_validator(mode="after")
    def _validate_grid(self) -> "TorusSettings":
        """Grid sizes must be powers of two no smaller than eight."""

        if self.grid_size < 8 or not _is_power_of_two(self.grid_size):
            raise ValueError(f"torus.grid_size must be a power of two >= 8 (got {self.grid_size})")
        if self.tol <= 0:
            raise ValueError(f"torus.tol must be positive (got {self.tol})")
        return self


class BoxSettings(BaseSettings):
    """Staggered-grid Stokes solver controls for box domains."""

    model_config = SettingsConfigDict(extra="ignore", populate_by_name=True)

    tol: float = Field(
        default=1e-9,
        validation_alias=AliasChoices("BOX_TOL", "BOX__TOL"),
    )
    max_iter: int = Field(
        default=2000,
        ge=1,
        validation_alias=AliasChoices("BOX_MAX_ITER", "BOX__MAX_ITER"),
    )
    method: Literal["auto", "direct", "krylov"] = Field(
        default="auto",
        validation_alias=AliasChoices("BOX_METHOD", "BOX__METHOD"),
    )
    direct_max_unknowns: int = Field(
        default=60_000,
        ge=0,
        validation_alias=AliasChoices("BOX_DIRECT_MAX_UNKNOWNS", "BOX__DIRECT_MAX_UNKNOWNS"),
    )
    interior_margin_cells: int = Field(
        default=4,
        ge=0,
        validation_alias=AliasChoices("BOX_INTERIOR_MARGIN_CELLS", "BOX__INTERIOR_MARGIN_CELLS"),
    )
    corner_margin_fraction: float = Field(
        default=0.125,
        validation_alias=AliasChoices("BOX_CORNER_MARGIN_FRACTION", "BOX__CORNER_MARGIN_FRACTION"),
    )
    points_per_eps: int = Field(
        default=8,
        ge=1,
        validation_alias=AliasChoices("BOX_POINTS_PER_EPS", "BOX__POINTS_PER_EPS"),
    )

    @model_validator(mode="after")
    def _validate_box(self) -> "BoxSettings":
        """Tolerances must be positive and margins a proper fraction."""

        if self.tol <= 0:
            raise ValueError(f"box.tol must be positive (got {self.tol})")
        if not 0 <= self.corner_margin_fraction < 0.5:
            raise ValueError(f"box.corner_margin_fraction must lie in [0, 0.5) (got {self.corner_margin_fraction})")
        return self


class GreenSettings(BaseSettings):
    """Green's function and fundamental-solution measurement controls."""

    model_config = SettingsConfigDict(extra="ignore", populate_by_name=True)

    cache_dir: Path = Field(
        default=PROJECT_ROOT / "data" / "green_cache",
        validation_alias=AliasChoices("GREEN_CACHE_DIR", "GREEN__CACHE_DIR"),
    )
    use_cache: bool = Field(
        default=False,
        validation_alias=AliasChoices("GREEN_USE_CACHE", "GREEN__USE_CACHE"),
    )
    min_separation_cells: int = Field(
        default=4,
        ge=1,
        validation_alias=AliasChoices("GREEN_MIN_SEPARATION_CELLS", "GREEN__MIN_SEPARATION_CELLS"),
    )
    shell_inner_fraction: float = Field(
        default=0.25,
        validation_alias=AliasChoices("GREEN_SHELL_INNER_FRACTION", "GREEN__SHELL_INNER_FRACTION"),
    )
    shell_outer_fraction: float = Field(
        default=1.0 / 3.0,
        validation_alias=AliasChoices("GREEN_SHELL_OUTER_FRACTION", "GREEN__SHELL_OUTER_FRACTION"),
    )

    @model_validator(mode="after")
    def _validate_shell(self) -> "GreenSettings":
        """The far-field shell must be a non-empty band inside the box."""

        if not 0 < self.shell_inner_fraction < self.shell_outer_fraction <= 0.5:
            raise ValueError(
                "green shell fractions must satisfy 0 < inner < outer <= 0.5 "
                f"(got {self.shell_inner_fraction}, {self.shell_outer_fraction})"
            )
        return self


class CoeffSettings(BaseSettings):
    """Coefficient sampling controls."""

    model_config = SettingsConfigDict(extra="ignore", populate_by_name=True)

    ellipticity_samples: int = Field(
        default=4096,
        ge=1,
        validation_alias=AliasChoices("COEFF_ELLIPTICITY_SAMPLES", "COEFF__ELLIPTICITY_SAMPLES"),
    )
    ellipticity_seed: int = Field(
        default=1729,
        validation_alias=AliasChoices("COEFF_ELLIPTICITY_SEED", "COEFF__ELLIPTICITY_SEED"),
    )


class VerdictSettings(BaseSettings):
    """Versioned acceptance thresholds consumed by the experiment harness."""

    model_config = SettingsConfigDict(extra="ignore", populate_by_name=True)

    schema_version: str = Field(
        default="1",
        validation_alias=AliasChoices("VERDICTS_SCHEMA_VERSION", "VERDICTS__SCHEMA_VERSION"),
    )
    degeneracy_tol: float = Field(default=1e-8, validation_alias=AliasChoices("VERDICTS__DEGENERACY_TOL"))
    cell_residual_tol: float = Field(default=1e-8, validation_alias=AliasChoices("VERDICTS__CELL_RESIDUAL_TOL"))
    dual_identity_tol: float = Field(default=1e-8, validation_alias=AliasChoices("VERDICTS__DUAL_IDENTITY_TOL"))
    manufactured_order: float = Field(default=2.0, validation_alias=AliasChoices("VERDICTS__MANUFACTURED_ORDER"))
    manufactured_order_window: float = Field(
        default=0.2, validation_alias=AliasChoices("VERDICTS__MANUFACTURED_ORDER_WINDOW")
    )
    rate_min_slope: float = Field(default=0.9, validation_alias=AliasChoices("VERDICTS__RATE_MIN_SLOPE"))
    corrected_rate_min_slope: float = Field(
        default=0.85, validation_alias=AliasChoices("VERDICTS__CORRECTED_RATE_MIN_SLOPE")
    )
    decay_window_value: float = Field(default=0.25, validation_alias=AliasChoices("VERDICTS__DECAY_WINDOW_VALUE"))
    decay_window_gradient: float = Field(
        default=0.3, validation_alias=AliasChoices("VERDICTS__DECAY_WINDOW_GRADIENT")
    )
    decay_window_mixed: float = Field(default=0.35, validation_alias=AliasChoices("VERDICTS__DECAY_WINDOW_MIXED"))
    halving_factor_min: float = Field(default=1.6, validation_alias=AliasChoices("VERDICTS__HALVING_FACTOR_MIN"))
    halving_factor_max: float = Field(default=2.6, validation_alias=AliasChoices("VERDICTS__HALVING_FACTOR_MAX"))
    ratio_drift_max: float = Field(default=2.0, validation_alias=AliasChoices("VERDICTS__RATIO_DRIFT_MAX"))
    max_principle_drift_max: float = Field(
        default=1.5, validation_alias=AliasChoices("VERDICTS__MAX_PRINCIPLE_DRIFT_MAX")
    )
    corrector_drift_max: float = Field(default=1.5, validation_alias=AliasChoices("VERDICTS__CORRECTOR_DRIFT_MAX"))
    symmetry_rel_tol: float = Field(default=0.05, validation_alias=AliasChoices("VERDICTS__SYMMETRY_REL_TOL"))
    stokeslet_velocity_rel_tol: float = Field(
        default=0.10, validation_alias=AliasChoices("VERDICTS__STOKESLET_VELOCITY_REL_TOL")
    )
    stokeslet_pressure_rel_tol: float = Field(
        default=0.15, validation_alias=AliasChoices("VERDICTS__STOKESLET_PRESSURE_REL_TOL")
    )
    divergence_growth_eta: float = Field(default=0.5, validation_alias=AliasChoices("VERDICTS__DIVERGENCE_GROWTH_ETA"))

    @model_validator(mode="after")
    def _validate_thresholds(self) -> "VerdictSettings":
        """Thresholds must be positive and the halving window ordered."""

        for field_name, value in self.model_dump().items():
            if isinstance(value, float) and value <= 0:
                raise ValueError(f"verdicts.{field_name} must be positive (got {value})")
        if self.halving_factor_min >= self.halving_factor_max:
            raise ValueError(
                "verdicts.halving_factor_min must be below halving_factor_max "
                f"(got {self.halving_factor_min} >= {self.halving_factor_max})"
            )
        return self


class ObservabilitySettings(BaseSettings):
    """Logging and metrics configuration."""

    model_config = SettingsConfigDict(extra="ignore", populate_by_name=True)

    structured_logging: bool = Field(
        default=True,
        validation_alias=AliasChoices("OBS_STRUCTURED_LOGGING", "OBSERVABILITY__STRUCTURED_LOGGING"),
    )
    service_name: str = Field(
        default="shom",
        validation_alias=AliasChoices("OBS_SERVICE_NAME", "OBSERVABILITY__SERVICE_NAME"),
    )


class Settings(BaseSettings):
    """Top-level configuration model with nested sections for each subsystem."""

    env: str = Field(
        default_factory=lambda: _resolve_env(),
        validation_alias=AliasChoices("ENV", "ENVIRONMENT", "RUNTIME__ENV"),
    )
    project_root: Path = Field(default=PROJECT_ROOT)
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)
    torus: TorusSettings = Field(default_factory=TorusSettings)
    box: BoxSettings = Field(default_factory=BoxSettings)
    green: GreenSettings = Field(default_factory=GreenSettings)
    coeff: CoeffSettings = Field(default_factory=CoeffSettings)
    verdicts: VerdictSettings = Field(default_factory=VerdictSettings)
    observability: ObservabilitySettings = Field(default_factory=ObservabilitySettings)
    env_files: tuple[Path, ...] = Field(default_factory=tuple, exclude=True)
    config_files: tuple[Path, ...] = Field(default_factory=tuple, exclude=True)

    model_config = SettingsConfigDict(
        env_prefix="SHOM_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
        populate_by_name=True,
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings,
        env_settings,
        dotenv_settings,
        file_secret_settings,
    ):
        """Extend settings sources with TOML-based config files."""

        config_sources = [TomlConfigSettingsSource(settings_cls, path) for path in _config_file_priority()]
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            *config_sources,
            file_secret_settings,
        )

    @model_validator(mode="after")
    def _resolve_paths(self) -> "Settings":
        """Normalize relative paths once the model is initialised."""

        runtime_updates = {}
        if not self.runtime.output_dir.is_absolute():
            runtime_updates["output_dir"] = (self.project_root / self.runtime.output_dir).resolve()
        if not self.runtime.snapshot_dir.is_absolute():
            runtime_updates["snapshot_dir"] = (self.project_root / self.runtime.snapshot_dir).resolve()
        if runtime_updates:
            object.__setattr__(self, "runtime", self.runtime.model_copy(update=runtime_updates))

        if not self.green.cache_dir.is_absolute():
            green_update = {"cache_dir": (self.project_root / self.green.cache_dir).resolve()}
            object.__setattr__(self, "green", self.green.model_copy(update=green_update))
        return self

    @property
    def log_level(self) -> str:
        """str: Effective logging level for the running process."""

        return self.runtime.log_level

    @property
    def is_local(self) -> bool:
        """bool: True when the active environment is ``local``."""

        return self.env.lower() == "local"


def _load_settings(env: str | None = None) -> Settings:
    """Load settings with optional environment override.

    Args:
        env: Environment name supplied programmatically.

    Returns:
        Fully parsed :class:`Settings` instance with env files applied.
    """

    resolved_env = _resolve_env(env)
    candidate_files = [path for path in _env_file_candidates(resolved_env) if path.exists()]
    config_files = _config_file_priority()
    return Settings(
        _env_file=[str(path) for path in candidate_files],
        _env_file_encoding="utf-8",
        env=resolved_env,
        env_files=tuple(candidate_files),
        config_files=config_files,
    )


@lru_cache(maxsize=1)
def get_settings(env: str | None = None) -> Settings:
    """Return cached settings for the requested environment."""

    return _load_settings(env)


def reload_settings(env: str | None = None) -> Settings:
    """Clear the cached settings and reload from disk."""

    get_settings.cache_clear()
    return get_settings(env)


__all__ = [
    "Settings",
    "get_settings",
    "reload_settings",
    "PROJECT_ROOT",
    "ENV_VAR_NAME",
]
