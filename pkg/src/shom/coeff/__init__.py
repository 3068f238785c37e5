"""Periodic coefficient tensors, built-in families, and their validation."""

from shom.coeff.ellipticity import (
    EllipticityReport,
    check_ellipticity,
    elasticity_reduce,
    ellipticity_report,
    periodicity_defect,
)
from shom.coeff.families import (
    available_families,
    coefficient_from_config,
    isotropic_elasticity,
    load_family_config,
    make_coefficient,
)
from shom.coeff.fields import CoefficientField, ElasticityTensor, constant_field, identity_tensor

__all__ = [
    "CoefficientField",
    "ElasticityTensor",
    "EllipticityReport",
    "available_families",
    "check_ellipticity",
    "coefficient_from_config",
    "constant_field",
    "elasticity_reduce",
    "ellipticity_report",
    "identity_tensor",
    "isotropic_elasticity",
    "load_family_config",
    "make_coefficient",
    "periodicity_defect",
]
