"""Synthesized first-order methods for equality-constrained strongly convex problems.

The package designs a three-sequence iteration by loop transformation and
interpolation, certifies it on frequency and parameter grids, and compares
it with gradient descent ascent on seeded random instances.
"""

from .errors import (ContractError, DivergenceError, EqsynthError, InfeasibleConstraintError,
                     InsufficientDataError, ParameterError, RateConditionError, UnsupportedError)
from .problems import (ConvexityProfile, OracleObjective, Problem, QuadraticInstance,
                       generate_constraint, generate_quadratic, kkt_solve, make_problem,
                       paper_instances)
from .preprocess import check_rate_condition, preprocess
from .synthesis import SynthesisParams, certify, rho_gda, rho_syn
from .solvers import Stop, run
from .analysis import compare, fit_rate, iteration_matrix

__version__ = "0.1.0"

__all__ = [
    "ContractError", "DivergenceError", "EqsynthError", "InfeasibleConstraintError",
    "InsufficientDataError", "ParameterError", "RateConditionError", "UnsupportedError",
    "ConvexityProfile", "OracleObjective", "Problem", "QuadraticInstance", "generate_constraint",
    "generate_quadratic", "kkt_solve", "make_problem", "paper_instances",
    "check_rate_condition", "preprocess", "SynthesisParams", "certify", "rho_gda", "rho_syn",
    "Stop", "run", "compare", "fit_rate", "iteration_matrix",
]
