"""KdV with singular step-like Miura initial data by Hankel-operator inverse scattering.

The pipeline runs profile -> m-function -> reflection coefficient -> Hankel
operator on a shifted contour -> ``q(x, t) = -2 d^2/dx^2 log det(I + H)``.
"""
from .certify import Check, run_suite
from .dyson import (
    DysonError,
    ParabolicDomain,
    SolutionSample,
    SolveOptions,
    kdv_residual,
    pole_free_certificate,
    q_grid,
    q_value,
)
from .hankel import (
    HankelError,
    OscillatorySymbol,
    build_galerkin,
    build_nystrom,
    lambda_rule,
    norm_bound,
    optimize_h,
    xi,
)
from .kernels import BACKEND
from .profiles import MiuraProfile, ProfileError, catalog, mollify, profile_from_config
from .refsolver import compare, solve_classical
from .scattering import ReflectionTable, ScatteringError, build_table, reflection
from .weyl import WeylError, m_function, propagate, weyl_disk

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Check",
    "DysonError",
    "HankelError",
    "MiuraProfile",
    "OscillatorySymbol",
    "ParabolicDomain",
    "ProfileError",
    "ReflectionTable",
    "ScatteringError",
    "SolutionSample",
    "SolveOptions",
    "WeylError",
    "build_galerkin",
    "build_nystrom",
    "build_table",
    "catalog",
    "compare",
    "kdv_residual",
    "lambda_rule",
    "m_function",
    "mollify",
    "norm_bound",
    "optimize_h",
    "pole_free_certificate",
    "profile_from_config",
    "propagate",
    "q_grid",
    "q_value",
    "reflection",
    "run_suite",
    "solve_classical",
    "weyl_disk",
    "xi",
]
