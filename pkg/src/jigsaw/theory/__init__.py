"""Numerical constants and bound functions: special functions, quadrature, crossing probabilities."""
from .constants import (g_sigma, grow_lower_bound_theta2, lambda_sigma, lb2d_infimum,
                        lb2d_objective, nu_sigma, nu_sigma_quadrature)
from .crossing import MonteCarlo, PhiSpec, log_phi, phi, ub2d_bound
from .quadrature import ConvergenceError, QuadratureSpec, QuadResult
from .special import gamma, zeta

__all__ = [
    "g_sigma", "grow_lower_bound_theta2", "lambda_sigma", "lb2d_infimum", "lb2d_objective",
    "nu_sigma", "nu_sigma_quadrature", "MonteCarlo", "PhiSpec", "log_phi", "phi", "ub2d_bound",
    "ConvergenceError", "QuadratureSpec", "QuadResult", "gamma", "zeta",
]
