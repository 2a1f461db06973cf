"""Constructive solution of the heat-equation Dirichlet problem.

Exact caloric polynomial extensions, certified solves on caloric bowls,
heat-kernel verification tools and Perron sweeps on bounded domains.
"""

__version__ = "0.1.0"

from .bowl import BoundaryData, BowlSolution, CaloricBowl, approximate_h_f, solve_bowl
from .expr import Expression, ExpressionError
from .grid import DomainSpec, GridFunction, Lattice
from .heatball import build_heat_ball_quadrature, mean_value
from .kernels import CaloricDisk, caloric_norm, gw_kernel, reproduce
from .perron import (
    PerronReport,
    SweepConfig,
    caloric_regularize,
    classify_supercaloric,
    perron_lower,
    perron_solve,
    perron_upper,
)
from .poly import (
    Polynomial,
    apply_heat,
    build_correction_system,
    caloric_extension,
    format_polynomial,
    parse_polynomial,
    substitute_paraboloid,
)

__all__ = [
    "BoundaryData",
    "BowlSolution",
    "CaloricBowl",
    "CaloricDisk",
    "DomainSpec",
    "Expression",
    "ExpressionError",
    "GridFunction",
    "Lattice",
    "PerronReport",
    "Polynomial",
    "SweepConfig",
    "apply_heat",
    "approximate_h_f",
    "build_correction_system",
    "build_heat_ball_quadrature",
    "caloric_extension",
    "caloric_norm",
    "caloric_regularize",
    "classify_supercaloric",
    "format_polynomial",
    "gw_kernel",
    "mean_value",
    "parse_polynomial",
    "perron_lower",
    "perron_solve",
    "perron_upper",
    "reproduce",
    "solve_bowl",
    "substitute_paraboloid",
]
