"""Discrete Green's functions, fundamental solutions and their decay measurements."""

from shom.green.cache import ColumnCache, column_key
from shom.green.columns import (
    ALTERNATE_SHELL,
    FundamentalColumn,
    GreenColumn,
    adjoint_green_column,
    delta_faces,
    dy_green_column,
    far_field_consistency,
    far_field_constant,
    far_field_decay,
    fundamental_column,
    green_column,
    regular_part,
    source_cell,
    stokeslet,
    stokeslet_check,
)
from shom.green.decay import (
    DECAY_COLUMNS,
    DecaySample,
    decay_profile,
    dyadic_probes,
    pressure_oscillation,
    representation_check,
    symmetry_error,
)

__all__ = [
    "ALTERNATE_SHELL",
    "DECAY_COLUMNS",
    "ColumnCache",
    "DecaySample",
    "FundamentalColumn",
    "GreenColumn",
    "adjoint_green_column",
    "column_key",
    "decay_profile",
    "delta_faces",
    "dy_green_column",
    "dyadic_probes",
    "far_field_consistency",
    "far_field_constant",
    "far_field_decay",
    "fundamental_column",
    "green_column",
    "pressure_oscillation",
    "regular_part",
    "representation_check",
    "source_cell",
    "stokeslet",
    "stokeslet_check",
    "symmetry_error",
]
