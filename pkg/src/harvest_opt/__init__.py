"""Optimal ergodic harvesting of populations driven by one-dimensional diffusions."""

from .calculus import DEFAULT_QUAD, Quadrature, ScaleSpeed
from .discounted import DiscountedSolution, abelian_sweep, psi_solve, solve_discounted, stationary_density, value
from .ergodic import ErgodicSolution, audit_as_conditions, solve_ergodic, u_prime, volatility_sweep, yield_at
from .errors import AssumptionViolation, DomainError, HarvestError, InvalidParameter, NumericalError
from .model import DiffusionModel, audit_assumptions, make_builtin, make_custom, x_zero, xhat
from .sim import SimConfig, average_yield, mc_expected_yield, occupation_histogram, simulate_reflected

__all__ = [
    "DEFAULT_QUAD", "Quadrature", "ScaleSpeed",
    "DiscountedSolution", "abelian_sweep", "psi_solve", "solve_discounted", "stationary_density", "value",
    "ErgodicSolution", "audit_as_conditions", "solve_ergodic", "u_prime", "volatility_sweep", "yield_at",
    "AssumptionViolation", "DomainError", "HarvestError", "InvalidParameter", "NumericalError",
    "DiffusionModel", "audit_assumptions", "make_builtin", "make_custom", "x_zero", "xhat",
    "SimConfig", "average_yield", "mc_expected_yield", "occupation_histogram", "simulate_reflected",
]
