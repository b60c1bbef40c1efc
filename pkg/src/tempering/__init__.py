"""Generalized parallel tempering MCMC samplers and their verification oracle."""

from .core import (
    Ensemble,
    Permutation,
    PermutationSet,
    TemperatureLadder,
    build_ladder,
    enumerate_permutations,
    log_joint_density,
    permute_ensemble,
)
from .kernels import KernelSpec, StepStats, pcn_step, product_step, rwm_step
from .swaps import (
    SwapPolicy,
    SwapProbVector,
    WeightedSample,
    is_weights,
    pt_pair_swap,
    pt_sweep,
    psdpt_step,
    ugpt_step,
    uw_swap_ratio,
    uw_swap_step,
    wgpt_step,
    wgpt_weights,
)
from .estimators import ChainTrace, RunSummary, aggregate_runs, ergodic_estimate, weighted_estimate
from .targets import (
    DataSet,
    TargetModel,
    circle_target,
    elliptic_target,
    gaussfield_target,
    gen_data_elliptic,
    gen_data_wave1d,
    poisson_forward,
    wave1d_forward,
    wave1d_target,
)

__version__ = "0.1.0"
