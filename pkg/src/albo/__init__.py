"""Augmented-Lagrangian Bayesian optimization with GP constraint surrogates."""

from .auglag import ALState, KKTReport, Variant, al_saddle_check, al_value, kkt_residual
from .gp import GPModel, gp_fit, gp_predict, lhs_sample
from .lmc import LMCModel, correlation_estimate, lmc_fit, lmc_predict, lmc_sample
from .problems import (
    BoxDomain,
    ConstrainedProblem,
    evaluate,
    get_problem,
    make_counterexample_1d,
    make_toy_original,
    make_version,
    slack_linearize,
)
from .strategies import StrategyConfig, Trajectory, bo_auglag, random_search

__version__ = "0.1.0"
