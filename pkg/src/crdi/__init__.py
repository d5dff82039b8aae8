"""Covariant inversion of the Dirac equation: from a spinor ansatz to the electromagnetic potential it solves."""

from ._backend import jax  # noqa: F401  (enables 64-bit floats before anything else runs)
from .errors import (
    ConfigError,
    ConstraintViolation,
    CRDIError,
    DomainError,
    IntegrationError,
    NotARotor,
    NotNormalizable,
    PathDisagreement,
    SingularSpinor,
)
from .geometry import Chart, ChartPoint, Geometry, Tetrad, TetradField
from .inversion import Constants, PotentialField, SpinorField, invert_cartesian, invert_covariant, r_tensor
from .solutions import Solution, SolutionConfig, build_solution, fields_from_potential, hydrogen_profiles, rest_frame
from .spinor import Bilinears, MatrixSpinor, bilinears, polar, to_matrix
from .verify import GridSpec, ResidualReport, dirac_residual, grid_report, normalize

__version__ = "0.1.0"

__all__ = [
    "Bilinears",
    "CRDIError",
    "Chart",
    "ChartPoint",
    "ConfigError",
    "ConstraintViolation",
    "Constants",
    "DomainError",
    "Geometry",
    "GridSpec",
    "IntegrationError",
    "MatrixSpinor",
    "NotARotor",
    "NotNormalizable",
    "PathDisagreement",
    "PotentialField",
    "ResidualReport",
    "SingularSpinor",
    "Solution",
    "SolutionConfig",
    "SpinorField",
    "Tetrad",
    "TetradField",
    "bilinears",
    "build_solution",
    "dirac_residual",
    "fields_from_potential",
    "grid_report",
    "hydrogen_profiles",
    "invert_cartesian",
    "invert_covariant",
    "normalize",
    "polar",
    "r_tensor",
    "rest_frame",
    "to_matrix",
]
