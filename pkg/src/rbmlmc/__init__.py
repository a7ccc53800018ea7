"""Multilevel Monte Carlo for SDEs driven by random numbers or random bits.

The package couples fine and coarse Euler (and truncated Milstein) paths
through one of four increment constructions, including a random-bit
Brownian bridge driver whose coarse draws match the next-coarser fine
draws in law, and wraps them in an adaptive multilevel estimator with
exact accounting of random bits and random number calls.
"""

from .bitcore import BitSource, CostLedger, FixedBits
from .drivers import (
    CoupledIncrements,
    SchauderIndex,
    bernoulli_coupled_increments,
    bit_budget,
    bridge_skeleton,
    classic_coupled_increments,
    iid_coupled_increments,
    lc_coupled_increments,
    schauder_increment,
    total_bits,
)
from .harness import (
    CostFitResult,
    ExperimentConfig,
    PairedCostFit,
    fit_cost_curve,
    fit_cost_pair,
    parse_eps_grid,
    run_levels,
    run_rmse,
)
from .mlmc import (
    LevelStats,
    MlmcConfig,
    MlmcResult,
    NonConvergenceError,
    RunningMoments,
    bias_converged,
    estimate_level,
    fit_weak_rate,
    optimal_replications,
    run_adaptive,
)
from .models import ModelSpec, cir_model, gbm_model, get_model, ou_model
from .rbnormal import (
    DyadicGrid,
    RbNormalTable,
    dyadic_grid,
    inv_normal_cdf,
    rb_normal_table,
    round_down,
    sample_bit_normal,
)
from .schemes import (
    CoupledPayoffSample,
    NumericalFailure,
    PathSkeleton,
    coupled_payoff,
    euler_path,
    evaluate_payoff,
    milstein_trunc_path,
    milstein_trunc_step,
)
from .selftest import run_selftest

__version__ = "0.1.0"

__all__ = [
    "BitSource",
    "CostLedger",
    "FixedBits",
    "CoupledIncrements",
    "SchauderIndex",
    "bernoulli_coupled_increments",
    "bit_budget",
    "bridge_skeleton",
    "classic_coupled_increments",
    "iid_coupled_increments",
    "lc_coupled_increments",
    "schauder_increment",
    "total_bits",
    "CostFitResult",
    "ExperimentConfig",
    "PairedCostFit",
    "fit_cost_curve",
    "fit_cost_pair",
    "parse_eps_grid",
    "run_levels",
    "run_rmse",
    "LevelStats",
    "MlmcConfig",
    "MlmcResult",
    "NonConvergenceError",
    "RunningMoments",
    "bias_converged",
    "estimate_level",
    "fit_weak_rate",
    "optimal_replications",
    "run_adaptive",
    "ModelSpec",
    "cir_model",
    "gbm_model",
    "get_model",
    "ou_model",
    "DyadicGrid",
    "RbNormalTable",
    "dyadic_grid",
    "inv_normal_cdf",
    "rb_normal_table",
    "round_down",
    "sample_bit_normal",
    "CoupledPayoffSample",
    "NumericalFailure",
    "PathSkeleton",
    "coupled_payoff",
    "euler_path",
    "evaluate_payoff",
    "milstein_trunc_path",
    "milstein_trunc_step",
    "run_selftest",
]
