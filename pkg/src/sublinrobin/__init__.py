"""Positive solutions of sublinear indefinite elliptic problems with a
parameter-dependent Robin (or Neumann-plus-linear) term: grids, spectra,
nonlinear solvers, continuation and reports."""

from .domain_grid import Domain, Weight, build_domain, integrate_boundary, integrate_volume, make_weight, weight_stats
from .elliptic import ProblemSpec, apply_K_boundary, apply_K_Omega, assemble, fixed_point_map, residual
from .errors import ConfigError, SolverError

__all__ = [
    "ConfigError",
    "Domain",
    "ProblemSpec",
    "SolverError",
    "Weight",
    "apply_K_Omega",
    "apply_K_boundary",
    "assemble",
    "build_domain",
    "fixed_point_map",
    "integrate_boundary",
    "integrate_volume",
    "make_weight",
    "residual",
    "weight_stats",
]

__version__ = "0.1.0"
