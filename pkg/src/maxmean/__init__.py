"""Maximum-mean estimators (LEM, AE, MLCB, HAVER, DE, WE) with Monte-Carlo
MSE experiments, a tabular Q-learning harness and an MCTS harness."""
from .arm_stats import ArmSummary, from_samples, merge, update, variance_unbiased
from .estimators import (
    EstimatorInput,
    EstimatorKind,
    EstimatorParams,
    avg_estimator,
    double_estimator,
    estimate,
    haver_components,
    haver_practical,
    haver_theoretical,
    lem,
    mlcb,
    oracle,
    weighted_estimator,
)
from .instances import InstanceRecipe, InstanceSpec, sample, sample_summaries
from .mse_lab import MseReport, corollary7_bound, good_sets, run_trials, sweep

__version__ = "0.1.0"
