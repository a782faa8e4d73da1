"""Importance sampling for option prices in exponential Levy models.

Optimal path-dependent Esscher tilts are found by convex duality and used
to reweight Monte Carlo paths of a variance gamma model.
"""
from .errors import (BracketingFailure, ConfigError, DegenerateVariance, DomainError, DomainExit,
                     GridMismatch, LevyISampError, MaxIterations, NoInteriorPoint, RangeError,
                     SolverError)
from .levy_models import LevyModel, VarianceGammaModel, cgf, cgf_grad, esscher_tilt, martingale_drift
from .mc_engine import (EstimateReport, price_importance, price_standard, simulate_batch,
                        sweep_theta, variance_ratio)
from .measures import TiltMeasure, log_likelihood_ratio, log_mgf_path, tail_function
from .optimal_tilt import TiltSolution, dual_objective, solve, solve_asian_bvp, solve_asian_direct, solve_european
from .payoffs import PayoffKind, PayoffSpec, conjugate_asian, conjugate_basket, log_payoff

__version__ = "0.1.0"
