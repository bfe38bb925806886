"""Belief-based multiuser scheduling for uplink MIMO status-update networks.

A discrete-time simulator and policy toolkit for a base station that
schedules up to M of N devices per slot, observes device freshness only
partially, and aims to minimize the expected weighted sum age of
information (EWSAoI).  Includes belief tracking in a compact three-integer
form, drift-minimizing schedulers, performance bound calculators, and the
empirical validation machinery for the belief model.
"""

from .channel import ChannelParams, success_prob, success_prob_table
from .belief import BeliefTriple, Observation, belief_pmf, active_probability, expected_age_gap, evolve
from .drift import ActionSet, DriftWeights, conditional_success_prob, lyapunov_drift, enumerate_actions
from .policy import PolicySpec, ds_schedule, fs_schedule, mwa_schedule, random_schedule, compute_n_star
from .bounds import (
    XiDistribution,
    BoundReport,
    psi_from_xi,
    upper_bound,
    optimize_xi,
    universal_lower_bound,
    symmetric_upper_bound,
    bound_report,
    XiOptimizationError,
)
from .simcore import NetworkConfig, DeviceTruth, RunResult, MonteCarloResult, step, run, monte_carlo

__all__ = [
    "ChannelParams",
    "success_prob",
    "success_prob_table",
    "BeliefTriple",
    "Observation",
    "belief_pmf",
    "active_probability",
    "expected_age_gap",
    "evolve",
    "ActionSet",
    "DriftWeights",
    "conditional_success_prob",
    "lyapunov_drift",
    "enumerate_actions",
    "PolicySpec",
    "ds_schedule",
    "fs_schedule",
    "mwa_schedule",
    "random_schedule",
    "compute_n_star",
    "XiDistribution",
    "BoundReport",
    "psi_from_xi",
    "upper_bound",
    "optimize_xi",
    "universal_lower_bound",
    "symmetric_upper_bound",
    "bound_report",
    "XiOptimizationError",
    "NetworkConfig",
    "DeviceTruth",
    "RunResult",
    "MonteCarloResult",
    "step",
    "run",
    "monte_carlo",
]
