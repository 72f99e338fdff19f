"""Explicit quasisymmetric magnetic fields in asymmetric toroidal domains, with residual checks."""

from . import charpit, coordinates, dual, fields, solutions, verify
from .errors import ConfigError, QuasisymError
from .solutions import (QsSolution, axisym_torus_field, chart_qs_displacement, elliptic_translational,
                        flux_aligned_qs, helical_selfqs, local_qs)
from .verify import ResidualReport, isometry_scan, qs_residuals

__version__ = "0.1.0"

__all__ = [
    "charpit", "coordinates", "dual", "fields", "solutions", "verify",
    "ConfigError", "QuasisymError", "QsSolution", "ResidualReport",
    "axisym_torus_field", "chart_qs_displacement", "elliptic_translational", "flux_aligned_qs",
    "helical_selfqs", "local_qs", "isometry_scan", "qs_residuals",
]
