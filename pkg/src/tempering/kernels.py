"""Base Markov transition kernels (RWM, pCN) and the product step.

Acceptance is computed fully in log space: a uniform u is compared against
log(alpha) via log(u). Off-domain proposals skip the potential evaluation
entirely and count as rejections, which is what makes uniform priors on
boxes work. Exactly one potential evaluation happens per in-domain proposal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Ensemble, Permutation, TemperatureLadder


@dataclass(frozen=True)
class KernelSpec:
    """Proposal settings for one chain: kind 'rwm' or 'pcn', step rho > 0.

    `scale` is the diagonal proposal scale (problem units); all experiments
    here use diagonal covariances.
    """

    kind: str
    step: float
    scale: np.ndarray | float = 1.0

    def __post_init__(self):
        if self.kind not in ("rwm", "pcn"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.kind == "pcn" and not (0 < self.step < 1):
            raise ValueError("pcn step must lie in (0, 1)")


@dataclass
class StepStats:
    """Proposal/acceptance counters per temperature index plus eval counts."""

    proposed: np.ndarray
    accepted: np.ndarray
    n_evals: int = 0
    n_evals_init: int = 0

    @classmethod
    def for_K(cls, K: int) -> "StepStats":
        return cls(np.zeros(K, dtype=np.int64), np.zeros(K, dtype=np.int64))

    def acceptance_rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(self.proposed > 0, self.accepted / np.maximum(self.proposed, 1), np.nan)


def _accept(log_alpha: float, rng: np.random.Generator) -> bool:
    """Log-space Metropolis coin flip; draws one uniform per proposal."""
    u = rng.random()
    if log_alpha >= 0.0 or u == 0.0:
        return True
    return np.log(u) < log_alpha


def rwm_step(theta, pot, logprior, beta, target, spec: KernelSpec, rng):
    """One random-walk Metropolis step on the tempered density e^{-beta Phi} pi_pr.

    Returns (theta', Phi', logprior', accepted, n_evals).
    """
    xi = rng.standard_normal(theta.shape[0])
    prop = theta + spec.step * (np.asarray(spec.scale) * xi)
    lp_prop = target.log_prior_one(prop)
    if not np.isfinite(lp_prop):
        _ = rng.random()  # keep the per-step draw pattern fixed
        return theta, pot, logprior, False, 0
    pot_prop = target.potential_one(prop)
    log_alpha = -beta * (pot_prop - pot) + (lp_prop - logprior)
    if _accept(log_alpha, rng):
        return prop, pot_prop, lp_prop, True, 1
    return theta, pot, logprior, False, 1


def pcn_step(theta, pot, logprior, beta, target, spec: KernelSpec, rng):
    """Preconditioned Crank-Nicolson step; prior-reversible for normal priors.

    The acceptance reduces to the tempered likelihood ratio.
    """
    scale = target.normal_prior_scale
    if scale is None:
        raise ValueError("pcn requires a target with a centered normal prior")
    rho = spec.step
    xi = rng.standard_normal(theta.shape[0])
    prop = np.sqrt(1.0 - rho * rho) * theta + rho * (scale * xi)
    pot_prop = target.potential_one(prop)
    log_alpha = -beta * (pot_prop - pot)
    if _accept(log_alpha, rng):
        return prop, pot_prop, target.log_prior_one(prop), True, 1
    return theta, pot, logprior, False, 1


def _step_one(kind):
    return rwm_step if kind == "rwm" else pcn_step


def product_step(
    e: Ensemble,
    ladder: TemperatureLadder,
    specs: list[KernelSpec],
    target,
    chain_rngs: list[np.random.Generator],
    stats: StepStats | None = None,
    perm: Permutation | None = None,
) -> Ensemble:
    """Advance all K chains independently by one kernel step each.

    Chain k uses the kernel spec and inverse temperature of index perm(k)
    (identity by default; WGPT supplies a permutation to swap the dynamics).
    Potential evaluations for all in-domain proposals are batched into a
    single target call; each chain's draws come from its own stream, so the
    result is identical however the chains are scheduled.
    """
    K, d = e.K, e.dim
    betas = ladder.betas
    which = perm.map if perm is not None else tuple(range(K))

    props = np.empty((K, d))
    us = np.empty(K)
    kinds = []
    for k in range(K):
        spec = specs[which[k]]
        xi = chain_rngs[k].standard_normal(d)
        if spec.kind == "rwm":
            props[k] = e.states[k] + spec.step * (np.asarray(spec.scale) * xi)
        else:
            scale = target.normal_prior_scale
            if scale is None:
                raise ValueError("pcn requires a target with a centered normal prior")
            rho = spec.step
            props[k] = np.sqrt(1.0 - rho * rho) * e.states[k] + rho * (scale * xi)
        us[k] = chain_rngs[k].random()
        kinds.append(spec.kind)

    lp_props = target.log_prior(props)
    in_dom = np.isfinite(lp_props)
    pot_props = np.full(K, np.inf)
    if np.any(in_dom):
        pot_props[in_dom] = target.potential(props[in_dom])

    new_states = np.array(e.states)
    new_pots = np.array(e.potentials)
    new_lps = np.array(e.logpriors)
    n_evals = int(np.count_nonzero(in_dom))
    for k in range(K):
        t_idx = which[k]
        if stats is not None:
            stats.proposed[t_idx] += 1
        if not in_dom[k]:
            continue
        log_alpha = -betas[t_idx] * (pot_props[k] - e.potentials[k])
        if kinds[k] == "rwm":
            log_alpha += lp_props[k] - e.logpriors[k]
        if log_alpha >= 0.0 or us[k] == 0.0 or np.log(us[k]) < log_alpha:
            new_states[k] = props[k]
            new_pots[k] = pot_props[k]
            new_lps[k] = lp_props[k]
            if stats is not None:
                stats.accepted[t_idx] += 1
    if stats is not None:
        stats.n_evals += n_evals
    return Ensemble(new_states, new_pots, new_lps)


def init_ensemble(target, K: int, chain_rngs, stats: StepStats | None = None) -> Ensemble:
    """Draw the K initial states from the prior (theta_k^(1) ~ mu_pr)."""
    states = np.stack([target.sample_prior(chain_rngs[k]) for k in range(K)])
    e = Ensemble.from_states(states, target)
    if stats is not None:
        stats.n_evals_init += K
    return e
