"""Inexact augmented Lagrangian method for ``min phi(x) + g(Phi(x))`` s.t. ``Bx = b``.

``g`` is a convex piecewise linear-quadratic function. The package bundles the
PLQ primitives, a catalog of proximal operators, the augmented Lagrangian and
its inner/outer solvers, second-order diagnostics and a benchmark harness.
"""
from .alm import AlmConfig, Fixed, Geometric, RunReport, VRule, alm_solve, estimate_qfactor, penalty_update
from .bench import BenchEntry, builtin_suite, run_benchmark
from .diagnostics import aug_epi_d2, check_kkt, fit_error_bound_constant, growth_probe, sosc_probe
from .inner import InnerConfig, solve_subproblem
from .lagrangian import (
    AffineSet,
    CompositeProblem,
    PrimalDualPoint,
    SmoothOracle,
    auglag_value,
    kkt_residual,
    lagrangian_value,
)
from .plq import PlqFunction, PlqPiece, Polyhedron, plq_eval, plq_second_subderivative
from .problems import BUILTIN_IDS, builtin, dump_problem, load_problem
from .prox import (
    ExtendedLQ,
    L1Norm,
    LInfNorm,
    MaxFunction,
    OrthantIndicator,
    moreau_env_grad,
    moreau_env_value,
    prox,
)

__version__ = "0.1.0"

__all__ = [
    "AffineSet", "AlmConfig", "BUILTIN_IDS", "BenchEntry", "CompositeProblem", "ExtendedLQ", "Fixed",
    "Geometric", "InnerConfig", "L1Norm", "LInfNorm", "MaxFunction", "OrthantIndicator", "PlqFunction",
    "PlqPiece", "Polyhedron", "PrimalDualPoint", "RunReport", "SmoothOracle", "VRule", "alm_solve",
    "aug_epi_d2", "auglag_value", "builtin", "builtin_suite", "check_kkt", "dump_problem", "estimate_qfactor",
    "fit_error_bound_constant", "growth_probe", "kkt_residual", "lagrangian_value", "load_problem",
    "moreau_env_grad", "moreau_env_value", "penalty_update", "plq_eval", "plq_second_subderivative", "prox",
    "run_benchmark", "solve_subproblem", "sosc_probe",
]
