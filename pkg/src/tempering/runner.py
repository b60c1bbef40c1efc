"""Multi-run experiment orchestration with deterministic parallelism.

Runs are farmed out to worker processes; every random draw is keyed by
(master seed, algorithm, run, chain), so the outputs are bit-identical no
matter how many workers execute them.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ExperimentConfig, KNOWN_ALGORITHMS, UNTEMPERED
from .core import PermutationSet, enumerate_permutations
from .estimators import ChainTrace, RunSummary, aggregate_runs, ergodic_estimate, weighted_estimate
from .kernels import KernelSpec, StepStats, init_ensemble, pcn_step, product_step, rwm_step
from .rng import chain_stream, swap_stream
from .swaps import SwapPolicy, psdpt_step, pt_sweep, ugpt_step, wgpt_step
from .targets import (
    TargetModel,
    circle_posterior_mean_quadrature,
    circle_target,
    elliptic_target,
    gaussfield_target,
    gen_data_elliptic,
    gen_data_wave1d,
    wave1d_posterior_mean_quadrature,
    wave1d_target,
)

_target_cache: dict[str, TargetModel] = {}


def _gaussfield_modes(params: dict) -> tuple[int, np.ndarray, float]:
    d = int(params.get("dim", 100))
    offset = float(params.get("mode_offset", 2.0))
    s = float(params.get("mixture_sd", 1.0))
    m = np.zeros(d)
    m[0] = offset
    return d, np.stack([m, -m]), s


def build_target(cfg: ExperimentConfig) -> TargetModel:
    key = json.dumps([cfg.target, cfg.data_seed, cfg.target_params], sort_keys=True)
    if key in _target_cache:
        return _target_cache[key]
    if cfg.target == "circle":
        t = circle_target()
    elif cfg.target == "elliptic":
        grid_n = int(cfg.target_params.get("grid_n", 64))
        t = elliptic_target(gen_data_elliptic(cfg.data_seed, grid_n=grid_n), grid_n=grid_n)
    elif cfg.target == "wave1d":
        t = wave1d_target(gen_data_wave1d(cfg.data_seed))
    elif cfg.target == "gaussfield":
        d, modes, s = _gaussfield_modes(cfg.target_params)
        t = gaussfield_target(d, list(modes), s=s)
    else:
        raise ValueError(f"unknown target {cfg.target!r}")
    _target_cache[key] = t
    return t


def compute_truth(cfg: ExperimentConfig) -> dict[str, float] | None:
    """Reference posterior means where an independent oracle exists.

    circle/wave1d: quadrature. gaussfield: closed form (two symmetric-mode
    Gaussian mixture conjugate with the normal prior). elliptic: none here;
    callers substitute a long reference run and must flag it as
    self-referential.
    """
    if cfg.target == "circle":
        m = circle_posterior_mean_quadrature()
        return {"theta1": m, "theta2": m}
    if cfg.target == "wave1d":
        return {"theta": wave1d_posterior_mean_quadrature(gen_data_wave1d(cfg.data_seed))}
    if cfg.target == "gaussfield":
        d, modes, s = _gaussfield_modes(cfg.target_params)
        post_var = s**2 / (1.0 + s**2)
        post_mean_sq = float(modes[0] @ modes[0]) / (1.0 + s**2) ** 2
        return {"theta1": 0.0, "norm_sq": d * post_var + post_mean_sq}
    return None


def _algo_index(algo: str) -> int:
    return KNOWN_ALGORITHMS.index(algo)


def _tempered_specs(cfg: ExperimentConfig) -> list[KernelSpec]:
    return [KernelSpec(cfg.base_kind, s) for s in cfg.steps]


def _perm_set(cfg: ExperimentConfig) -> PermutationSet:
    return enumerate_permutations(
        cfg.K, cfg.perm_scheme, window=cfg.perm_window, include_identity=cfg.include_identity
    )


def run_single(cfg: ExperimentConfig, algo: str, run: int, keep_trace: bool = False):
    """Execute one MCMC run; returns (RunSummary, ChainTrace or None)."""
    target = build_target(cfg)
    ai = _algo_index(algo)
    t0 = time.perf_counter()

    if algo in UNTEMPERED:
        n_iters = cfg.N * (cfg.K if cfg.cost_parity else 1)
        rng = chain_stream(cfg.seed, ai, run, 0)
        stats = StepStats.for_K(1)
        theta = target.sample_prior(rng)
        pot = target.potential_one(theta)
        lp = target.log_prior_one(theta)
        stats.n_evals_init += 1
        step = rwm_step if algo == "rwm" else pcn_step
        spec = KernelSpec(algo, cfg.base_step)
        states = np.empty((n_iters, target.dim))
        for n in range(n_iters):
            stats.proposed[0] += 1
            theta, pot, lp, acc, ev = step(theta, pot, lp, 1.0, target, spec, rng)
            stats.accepted[0] += int(acc)
            stats.n_evals += ev
            states[n] = theta
        trace = ChainTrace(algo, chain1=states, stats=stats)
    else:
        K = cfg.K
        specs = _tempered_specs(cfg)
        chain_rngs = [chain_stream(cfg.seed, ai, run, k) for k in range(K)]
        s_rng = swap_stream(cfg.seed, ai, run)
        stats = StepStats.for_K(K)
        e = init_ensemble(target, K, chain_rngs, stats)
        needs_perms = algo in ("ugpt", "wgpt")
        policy = SwapPolicy(algo, n_s=cfg.n_s, perm_set=_perm_set(cfg) if needs_perms else None)
        n_iters = cfg.N
        if policy.kind == "wgpt":
            ensembles = np.empty((n_iters, K, target.dim))
            weights = np.empty((n_iters, policy.perm_set.size))
        else:
            states = np.empty((n_iters, target.dim))
        for n in range(n_iters):
            if policy.kind == "ugpt":
                e = ugpt_step(e, cfg.ladder, specs, target, policy.perm_set,
                              chain_rngs, s_rng, stats)
            elif policy.kind == "wgpt":
                e, ws = wgpt_step(e, cfg.ladder, specs, target, policy.perm_set,
                                  chain_rngs, s_rng, stats)
                ensembles[n] = ws.states
                weights[n] = ws.weights
            elif policy.kind == "pt":
                e = product_step(e, cfg.ladder, specs, target, chain_rngs, stats)
                if (n + 1) % policy.n_s == 0:
                    e = pt_sweep(e, cfg.ladder, s_rng)
            elif policy.kind == "rpt":
                if n % policy.n_s == 0:
                    e = pt_sweep(e, cfg.ladder, s_rng)
                e = product_step(e, cfg.ladder, specs, target, chain_rngs, stats)
                if (n + 1) % policy.n_s == 0:
                    e = pt_sweep(e, cfg.ladder, s_rng, reverse=True)
            elif policy.kind == "psdpt":
                e = product_step(e, cfg.ladder, specs, target, chain_rngs, stats)
                e = psdpt_step(e, cfg.ladder, s_rng)
            else:
                raise ValueError(f"unknown algorithm {algo!r}")
            if policy.kind != "wgpt":
                states[n] = e.states[0]
        if policy.kind == "wgpt":
            trace = ChainTrace(algo, ensembles=ensembles, weights=weights,
                               perm_first=np.array(policy.perm_set.index_matrix[:, 0]),
                               stats=stats)
        else:
            trace = ChainTrace(algo, chain1=states, stats=stats)

    estimates = {}
    for name, q in target.qois.items():
        if algo == "wgpt":
            estimates[name] = weighted_estimate(trace, q, cfg.burn_frac)
        else:
            estimates[name] = ergodic_estimate(trace, q, cfg.burn_frac)
    summary = RunSummary(
        algorithm=algo, run=run, estimates=estimates, n_iters=trace.n_iters,
        burn_frac=cfg.burn_frac, seed=cfg.seed, nominal_n=cfg.N,
        n_evals=stats.n_evals, n_proposals=int(stats.proposed.sum()),
        n_evals_init=stats.n_evals_init,
        acceptance=tuple(float(a) for a in stats.acceptance_rates()),
        seconds=time.perf_counter() - t0,
    )
    return summary, (trace if keep_trace else None)


def _run_task(raw_cfg: dict, algo: str, run: int, keep_trace: bool):
    cfg = ExperimentConfig.from_dict(raw_cfg)
    summary, trace = run_single(cfg, algo, run, keep_trace)
    return summary, trace


@dataclass
class ResultBundle:
    """Everything one `run` invocation produced, minus the big traces."""

    config: dict
    summaries: list[RunSummary]
    rows: list[dict]
    truth: dict[str, float] | None
    baseline: str | None
    meta: dict = field(default_factory=dict)
    traces: dict[str, ChainTrace] = field(default_factory=dict, repr=False)


def default_baseline(algorithms) -> str | None:
    for cand in UNTEMPERED:
        if cand in algorithms:
            return cand
    return None


def run_experiment(cfg: ExperimentConfig, threads: int | None = None,
                   keep_traces: bool = True) -> ResultBundle:
    """Run every (algorithm, run) pair, aggregate, and bundle the results.

    Output is identical for any worker count; tasks are dispatched to a
    process pool unless threads == 1.
    """
    tasks = [(a, r) for a in cfg.algorithms for r in range(cfg.n_runs)]
    keep = {(a, 0): keep_traces for a in cfg.algorithms}
    results: dict[tuple[str, int], RunSummary] = {}
    traces: dict[str, ChainTrace] = {}

    if threads == 1 or len(tasks) == 1:
        for a, r in tasks:
            summary, trace = run_single(cfg, a, r, keep.get((a, r), False))
            results[(a, r)] = summary
            if trace is not None:
                traces[a] = trace
    else:
        workers = threads or os.cpu_count() or 2
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {
                pool.submit(_run_task, cfg.raw, a, r, keep.get((a, r), False)): (a, r)
                for a, r in tasks
            }
            for fut, (a, r) in futs.items():
                summary, trace = fut.result()
                results[(a, r)] = summary
                if trace is not None:
                    traces[a] = trace

    summaries = [results[(a, r)] for a in cfg.algorithms for r in range(cfg.n_runs)]
    truth = compute_truth(cfg)
    baseline = default_baseline(cfg.algorithms)
    if cfg.n_runs >= 2:
        rows = aggregate_runs(summaries, truth, baseline=baseline)
    else:
        rows = []
    meta = {"package_version": __version__, "numpy_version": np.__version__}
    return ResultBundle(config=dict(cfg.raw), summaries=summaries, rows=rows,
                        truth=truth, baseline=baseline, meta=meta, traces=traces)
