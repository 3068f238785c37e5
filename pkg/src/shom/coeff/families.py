"""Built-in coefficient families and the ``make_coefficient`` factory.

The families are artifact choices (the theory fixes no concrete examples) and
every field built here is flagged ``artifact_choice=True`` in its metadata.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from shom.errors import EllipticityViolationError, MalformedTensorError
from shom.settings import Settings, get_settings

from .ellipticity import ellipticity_report, elasticity_reduce, periodicity_defect
from .fields import CoefficientField, ElasticityTensor, constant_field, identity_tensor, swap_tensor, trace_tensor

LOGGER = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi


class TrigMode(BaseModel):
    """One term c * cos(2 pi k . y) of a trigonometric polynomial."""

    model_config = ConfigDict(frozen=True)

    coefficient: float
    wavevector: list[int]


def _default_modes() -> list[TrigMode]:
    # cos(2 pi y1) cos(2 pi y2) = (cos(2 pi (y1 + y2)) + cos(2 pi (y1 - y2))) / 2
    return [TrigMode(coefficient=0.5, wavevector=[1, 1]), TrigMode(coefficient=0.5, wavevector=[1, -1])]


class ConstantParams(BaseModel):
    """Either a multiple of the identity tensor or an explicit d^4 tensor."""

    model_config = ConfigDict(extra="forbid")

    scale: float = 1.0
    tensor: list | None = None

    @model_validator(mode="after")
    def _validate_scale(self) -> "ConstantParams":
        if self.tensor is None and self.scale <= 0:
            raise ValueError(f"scale must be positive (got {self.scale})")
        return self


class TrigParams(BaseModel):
    """a(y) = (1 + rho * s(y)) * identity with s a cosine polynomial of sup norm <= 1."""

    model_config = ConfigDict(extra="forbid")

    rho: float = 0.5
    modes: list[TrigMode] = Field(default_factory=_default_modes)

    @field_validator("modes", mode="after")
    @classmethod
    def _validate_modes(cls, value: list[TrigMode]) -> list[TrigMode]:
        total = sum(abs(mode.coefficient) for mode in value)
        if total > 1.0 + 1e-12:
            raise ValueError(f"sum of |coefficients| must not exceed 1 (got {total})")
        return value


class CheckerboardParams(BaseModel):
    """a(y) = (1 + rho * prod_k tanh(sin(2 pi y_k) / width)) * identity."""

    model_config = ConfigDict(extra="forbid")

    rho: float = 0.5
    width: float = Field(default=0.1, gt=0)


class ElasticityParams(BaseModel):
    """Isotropic Lame-type tensor lam * trace + shear * (identity + swap), optionally modulated."""

    model_config = ConfigDict(extra="forbid")

    lam: float = Field(default=1.0, ge=0)
    shear: float = Field(default=1.0, gt=0)
    rho: float = 0.0
    modes: list[TrigMode] = Field(default_factory=_default_modes)


def trig_profile(modes: list[TrigMode], d: int) -> Callable[[np.ndarray], np.ndarray]:
    """Return y -> s(y) for the cosine polynomial described by ``modes``."""

    vectors = []
    for mode in modes:
        wave = list(mode.wavevector)[:d]
        wave += [0] * (d - len(wave))
        vectors.append(wave)
    wavevectors = np.asarray(vectors, dtype=float).reshape(len(modes), d)
    coefficients = np.asarray([mode.coefficient for mode in modes], dtype=float)

    def profile(y: np.ndarray) -> np.ndarray:
        phase = _TWO_PI * np.tensordot(np.asarray(y, dtype=float), wavevectors, axes=([-1], [1]))
        return np.cos(phase) @ coefficients

    return profile


def _scalar_field(
    profile: Callable[[np.ndarray], np.ndarray],
    *,
    d: int,
    lo: float,
    hi: float,
    family: str,
    params: Mapping[str, Any],
) -> CoefficientField:
    eye = identity_tensor(d)

    def evaluator(y: np.ndarray) -> np.ndarray:
        return profile(y)[..., None, None, None, None] * eye

    mu = min(lo, 1.0 / hi) if lo > 0 else lo
    if mu <= 0:
        # mu itself must be positive to build the field; the sampled scan below reports the witness.
        mu = np.finfo(float).tiny
    return CoefficientField(dimension=d, evaluator=evaluator, mu=mu, family=family, params=dict(params))


def _build_constant(params: ConstantParams, d: int) -> CoefficientField:
    if params.tensor is None:
        scale = params.scale
        return constant_field(scale * identity_tensor(d), mu=min(scale, 1.0 / scale), params=params.model_dump())
    tensor = np.asarray(params.tensor, dtype=float)
    if tensor.shape != (d, d, d, d):
        raise MalformedTensorError(f"constant tensor must have shape {(d, d, d, d)}, got {tensor.shape}")
    matrix = tensor.transpose(0, 2, 1, 3).reshape(d * d, d * d)
    eig = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    mu = min(eig[0], 1.0 / eig[-1]) if eig[0] > 0 else np.finfo(float).tiny
    return constant_field(tensor, mu=mu, params={"tensor": tensor.tolist()})


def _build_trig(params: TrigParams, d: int) -> CoefficientField:
    profile = trig_profile(params.modes, d)
    amplitude = abs(params.rho) * sum(abs(mode.coefficient) for mode in params.modes)
    family = "trig"
    if amplitude == 0:
        field = constant_field(identity_tensor(d), mu=1.0, family=family, params=params.model_dump())
        return field
    return _scalar_field(
        lambda y: 1.0 + params.rho * profile(y),
        d=d,
        lo=1.0 - amplitude,
        hi=1.0 + amplitude,
        family=family,
        params=params.model_dump(),
    )


def _build_checkerboard(params: CheckerboardParams, d: int) -> CoefficientField:
    def profile(y: np.ndarray) -> np.ndarray:
        phase = np.tanh(np.sin(_TWO_PI * np.asarray(y, dtype=float)) / params.width)
        return 1.0 + params.rho * np.prod(phase, axis=-1)

    amplitude = abs(params.rho)
    return _scalar_field(
        profile,
        d=d,
        lo=1.0 - amplitude,
        hi=1.0 + amplitude,
        family="smoothed-checkerboard",
        params=params.model_dump(),
    )


def isotropic_elasticity(params: ElasticityParams, d: int) -> ElasticityTensor:
    """Build the (optionally modulated) isotropic elasticity tensor."""

    base = params.lam * trace_tensor(d) + params.shear * (identity_tensor(d) + swap_tensor(d))
    profile = trig_profile(params.modes, d)
    amplitude = abs(params.rho) * sum(abs(mode.coefficient) for mode in params.modes)
    lower = (1.0 - amplitude) * 2.0 * params.shear
    upper = (1.0 + amplitude) * (2.0 * params.shear + d * params.lam)
    if lower <= 0:
        raise EllipticityViolationError(
            "elasticity modulation makes the shear modulus non-positive",
            y=np.zeros(d),
            xi=np.eye(d) / np.sqrt(d),
            value=lower,
        )

    def evaluator(y: np.ndarray) -> np.ndarray:
        return (1.0 + params.rho * profile(y))[..., None, None, None, None] * base

    metadata = params.model_dump()
    metadata.update({"family": "isotropic-elasticity", "constant": amplitude == 0})
    return ElasticityTensor(dimension=d, evaluator=evaluator, mu=min(lower, 1.0 / upper), params=metadata)


def _build_elasticity(params: ElasticityParams, d: int) -> CoefficientField:
    return elasticity_reduce(isotropic_elasticity(params, d))


_FAMILIES: dict[str, tuple[type[BaseModel], Callable[[Any, int], CoefficientField]]] = {
    "constant": (ConstantParams, _build_constant),
    "trig": (TrigParams, _build_trig),
    "smoothed-checkerboard": (CheckerboardParams, _build_checkerboard),
    "isotropic-elasticity": (ElasticityParams, _build_elasticity),
}


def available_families() -> list[str]:
    """Names accepted by :func:`make_coefficient`."""

    return sorted(_FAMILIES)


def make_coefficient(
    family: str,
    params: Mapping[str, Any] | None = None,
    d: int = 2,
    *,
    settings: Settings | None = None,
) -> CoefficientField:
    """Instantiate a built-in coefficient family and verify its invariants.

    Raises:
        MalformedTensorError: unknown family or malformed explicit tensor.
        EllipticityViolationError: the sampled scan finds a non-positive
            quadratic form; the exception carries the witness point.
        pydantic.ValidationError: parameters rejected by the family schema.
    """

    normalized = family.strip().lower()
    if normalized not in _FAMILIES:
        raise MalformedTensorError(f"unknown coefficient family '{family}' (known: {', '.join(available_families())})")
    if d not in (2, 3):
        raise MalformedTensorError(f"dimension must be 2 or 3 (got {d})")
    schema, builder = _FAMILIES[normalized]
    parsed = schema.model_validate(dict(params or {}))
    field = builder(parsed, d)

    resolved = settings or get_settings()
    samples = min(resolved.coeff.ellipticity_samples, 4096 if d == 2 else 1728)
    report = ellipticity_report(field, samples, settings=resolved)
    if report.mu_lo <= 0:
        raise EllipticityViolationError(
            f"family '{normalized}' with params {dict(params or {})} is not strongly elliptic",
            y=report.witness_y,
            xi=report.witness_xi,
            value=report.mu_lo,
        )
    defect = periodicity_defect(field)
    if defect > 1e-9:
        raise MalformedTensorError(f"family '{normalized}' is not 1-periodic (defect {defect:.3e})")
    LOGGER.info(
        "Built coefficient family=%s d=%s mu_lo=%.4g mu_hi=%.4g", normalized, d, report.mu_lo, report.mu_hi
    )
    return field


def load_family_config(path: Path) -> dict[str, Any]:
    """Read a JSON family definition ``{"family": ..., "params": {...}, "dimension": d}``."""

    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if "family" not in payload:
        raise ValueError(f"family definition {path} is missing the 'family' key")
    return payload


def coefficient_from_config(payload: Mapping[str, Any], *, settings: Settings | None = None) -> CoefficientField:
    """Build a coefficient from a parsed family definition."""

    return make_coefficient(
        str(payload["family"]),
        payload.get("params") or {},
        int(payload.get("dimension", 2)),
        settings=settings,
    )


__all__ = [
    "CheckerboardParams",
    "ConstantParams",
    "ElasticityParams",
    "TrigMode",
    "TrigParams",
    "available_families",
    "coefficient_from_config",
    "isotropic_elasticity",
    "load_family_config",
    "make_coefficient",
    "trig_profile",
]
