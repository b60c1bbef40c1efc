"""Swap and interaction kernels acting on the joint ensemble.

Everything here runs off the K cached potentials: no swap operation ever
evaluates the model. Permutation sampling is inverse-CDF over the set's
fixed lexicographic order, so one uniform decides the draw.

Implemented kernels:
  pairwise PT swap and the composed sweep, its palindromic (reversible)
  variant, pairwise state-dependent PT, the rejection-free state-permutation
  swap with state-dependent ratios, and the dynamics-swapping mixture step
  whose output carries importance weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Ensemble, Permutation, PermutationSet, TemperatureLadder, permute_ensemble
from .kernels import KernelSpec, StepStats, product_step


def logsumexp(a: np.ndarray, axis=None, keepdims: bool = False) -> np.ndarray:
    """Max-shifted log-sum-exp; much cheaper than the scipy one on the tiny
    per-step logit vectors this module lives on."""
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if not keepdims and axis is not None:
        out = np.squeeze(out, axis=axis)
    return out if (keepdims or axis is not None) else float(out.reshape(()))


@dataclass(frozen=True)
class SwapPolicy:
    """Which interaction kernel a run uses: none, pt, rpt, psdpt, ugpt, wgpt."""

    kind: str
    n_s: int = 1
    perm_set: PermutationSet | None = None

    def __post_init__(self):
        if self.kind not in ("none", "pt", "rpt", "psdpt", "ugpt", "wgpt"):
            raise ValueError(f"unknown swap policy {self.kind!r}")
        if self.n_s < 1:
            raise ValueError("N_s must be >= 1")
        if self.kind in ("ugpt", "wgpt") and self.perm_set is None:
            raise ValueError(f"{self.kind} needs a permutation set")


@dataclass(frozen=True)
class SwapProbVector:
    """Log-weights over a permutation set and their normalized probabilities."""

    logits: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_logits(cls, logits: np.ndarray) -> "SwapProbVector":
        logits = np.asarray(logits, dtype=float)
        if np.all(np.isneginf(logits)):
            raise AssertionError("all swap logits are -inf; ensemble must be in-domain")
        probs = np.exp(logits - logsumexp(logits))
        probs /= probs.sum()
        return cls(logits, probs)

    def sample(self, u: float) -> int:
        """Inverse CDF at u over the deterministic set ordering."""
        cum = np.cumsum(self.probs)
        return min(int(np.searchsorted(cum, u, side="left")), self.probs.size - 1)


def _check_finite(e: Ensemble):
    if np.any(np.isinf(e.potentials)):
        raise AssertionError("swap kernel applied to an out-of-domain ensemble")


# ---------------------------------------------------------------------------
# log-density helpers on cached potentials (vectorized over permutation sets)

def permuted_joint_logits(pots: np.ndarray, betas: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """log pi(theta_sigma) for each sigma: -sum_k beta_k Phi_{sigma(k)}."""
    return -(pots[..., idx] @ betas)


def swapped_density_logits(pots: np.ndarray, betas: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """log pi_sigma(theta) for each sigma: -sum_k beta_{sigma(k)} Phi_k."""
    return -(pots @ np.transpose(betas[idx]))


def uw_swap_ratio(e: Ensemble, ladder: TemperatureLadder, perm_set: PermutationSet) -> SwapProbVector:
    """State-dependent proposal over S_K with r(theta, sigma) ~ pi(theta_sigma)."""
    _check_finite(e)
    logits = permuted_joint_logits(e.potentials, ladder.betas, perm_set.index_matrix)
    return SwapProbVector.from_logits(logits)


def generic_swap_log_alpha(
    e: Ensemble,
    ladder: TemperatureLadder,
    perm_set: PermutationSet,
    s: int,
    ratio_logits: np.ndarray | None = None,
) -> float:
    """Metropolis log-acceptance for proposing permutation s from ratio r.

    log alpha = log pi(theta_sigma) + log r(theta_sigma, sigma^-1)
              - log pi(theta)       - log r(theta, sigma)
    capped at 0. Specializing r to the state-permutation ratio makes this
    identically 0 whenever the set is a group.
    """
    betas, idx = ladder.betas, perm_set.index_matrix
    if ratio_logits is None:
        ratio_logits = permuted_joint_logits(e.potentials, betas, idx)
    lse_here = logsumexp(ratio_logits)
    pots_perm = e.potentials[idx[s]]
    logits_perm = permuted_joint_logits(pots_perm, betas, idx)
    lse_perm = logsumexp(logits_perm)
    s_inv = int(perm_set.inverse_index[s])
    log_pi = -(betas @ e.potentials)
    log_pi_sigma = ratio_logits[s]
    log_r_fwd = ratio_logits[s] - lse_here
    log_r_rev = logits_perm[s_inv] - lse_perm
    return min(0.0, (log_pi_sigma + log_r_rev) - (log_pi + log_r_fwd))


def uw_swap_step(
    e: Ensemble, ladder: TemperatureLadder, perm_set: PermutationSet, rng: np.random.Generator
) -> Ensemble:
    """Sample a permutation from the state-dependent ratio and apply it.

    For group sets the generic acceptance is recomputed and asserted to be 1
    (not assumed), so the swap is rejection-free; for inversion-closed sets
    that are not groups it falls back to an honest Metropolis correction.
    """
    ratio = uw_swap_ratio(e, ladder, perm_set)
    s = ratio.sample(rng.random())
    log_alpha = generic_swap_log_alpha(e, ladder, perm_set, s, ratio.logits)
    if perm_set.is_group:
        scale = max(1.0, float(np.max(np.abs(ratio.logits[np.isfinite(ratio.logits)]))))
        if not abs(log_alpha) <= 1e-12 + 1e-8 * scale:
            raise AssertionError(f"group swap acceptance deviates from 1: log alpha = {log_alpha}")
        return permute_ensemble(e, perm_set[s])
    u = rng.random()
    if log_alpha >= 0.0 or u == 0.0 or np.log(u) < log_alpha:
        return permute_ensemble(e, perm_set[s])
    return e


def ugpt_step(
    e: Ensemble,
    ladder: TemperatureLadder,
    specs: list[KernelSpec],
    target,
    perm_set: PermutationSet,
    chain_rngs,
    swap_rng,
    stats: StepStats | None = None,
) -> Ensemble:
    """Palindromic composition: swap, product step, swap."""
    e = uw_swap_step(e, ladder, perm_set, swap_rng)
    e = product_step(e, ladder, specs, target, chain_rngs, stats)
    return uw_swap_step(e, ladder, perm_set, swap_rng)


# ---------------------------------------------------------------------------
# standard (pairwise) parallel tempering

def pt_pair_log_alpha(e: Ensemble, ladder: TemperatureLadder, i: int, j: int) -> float:
    """log of min{1, exp((beta_i - beta_j)(Phi_i - Phi_j))} for 0-based i < j."""
    b = ladder.betas
    return min(0.0, (b[i] - b[j]) * (e.potentials[i] - e.potentials[j]))


def pt_pair_swap(
    e: Ensemble, ladder: TemperatureLadder, i: int, j: int, rng: np.random.Generator
) -> Ensemble:
    if not 0 <= i < j < e.K:
        raise ValueError(f"need 0 <= i < j < K, got ({i}, {j})")
    log_alpha = pt_pair_log_alpha(e, ladder, i, j)
    u = rng.random()
    if log_alpha >= 0.0 or u == 0.0 or np.log(u) < log_alpha:
        return permute_ensemble(e, Permutation.transposition(e.K, i, j))
    return e


def pt_sweep(
    e: Ensemble, ladder: TemperatureLadder, rng: np.random.Generator, reverse: bool = False
) -> Ensemble:
    """Attempt the adjacent swaps (1,2),(2,3),...,(K-1,K) in order (or reversed)."""
    pairs = range(e.K - 1)
    for i in (reversed(pairs) if reverse else pairs):
        e = pt_pair_swap(e, ladder, i, i + 1, rng)
    return e


def psdpt_step(e: Ensemble, ladder: TemperatureLadder, rng: np.random.Generator) -> Ensemble:
    """Pairwise state-dependent swap: pairs with similar energy are favoured.

    An unordered pair (i, j) is proposed with probability proportional to
    exp(-|Phi_i - Phi_j|) and accepted with the usual tempering ratio. The
    selection ratio is invariant under performing the swap, so the generic
    acceptance reduces to the pairwise PT one.
    """
    _check_finite(e)
    K = e.K
    if K < 2:
        raise ValueError("psdpt needs K >= 2")
    pairs = [(i, j) for i in range(K) for j in range(i + 1, K)]
    logits = np.array([-abs(e.potentials[i] - e.potentials[j]) for i, j in pairs])
    probs = SwapProbVector.from_logits(logits)
    i, j = pairs[probs.sample(rng.random())]
    return pt_pair_swap(e, ladder, i, j, rng)


# ---------------------------------------------------------------------------
# dynamics swapping with importance weights

def wgpt_weights(e: Ensemble, ladder: TemperatureLadder, perm_set: PermutationSet) -> SwapProbVector:
    """Swapping weights w_sigma(theta) ~ pi_sigma(theta).

    Distinct from the state-permutation ratio: in general
    pi_sigma(theta) != pi(theta_sigma).
    """
    _check_finite(e)
    logits = swapped_density_logits(e.potentials, ladder.betas, perm_set.index_matrix)
    return SwapProbVector.from_logits(logits)


def log_is_weights(pots: np.ndarray, betas: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """log of the importance weights w-hat(theta, sigma) for each sigma.

    w-hat(theta, sigma) = pi(theta_sigma) / pi_W(theta_sigma) with
    pi_W = |S_K|^{-1} sum_rho pi_rho. Entry [s, r] of the matrix below is
    log pi_rho_r(theta_sigma_s), assembled purely by composing index maps.
    """
    pots_perm = pots[..., idx]                      # (..., S, K)
    log_pi_perm = -(pots_perm @ betas)              # log pi(theta_sigma)
    mix = -(pots_perm @ np.transpose(betas[idx]))   # (..., S, S)
    log_pi_w = logsumexp(mix, axis=-1) - np.log(idx.shape[0])
    return log_pi_perm - log_pi_w


def is_weights(e: Ensemble, ladder: TemperatureLadder, perm_set: PermutationSet) -> np.ndarray:
    """Importance weights of one ensemble over S_K; bounded by |S_K| when
    the identity permutation is in the set."""
    _check_finite(e)
    return np.exp(log_is_weights(e.potentials, ladder.betas, perm_set.index_matrix))


@dataclass(frozen=True)
class WeightedSample:
    """One dynamics-swapped iteration: the new ensemble plus its weights."""

    states: np.ndarray   # (K, d)
    weights: np.ndarray  # (|S_K|,)


def wgpt_step(
    e: Ensemble,
    ladder: TemperatureLadder,
    specs: list[KernelSpec],
    target,
    perm_set: PermutationSet,
    chain_rngs,
    swap_rng,
    stats: StepStats | None = None,
) -> tuple[Ensemble, WeightedSample]:
    """Sample sigma from the swapping weights, advance with swapped dynamics.

    Chain k moves under the kernel spec and inverse temperature of index
    sigma(k). The emitted sample carries the post-move ensemble and its
    importance weights, ready for the weighted estimator.
    """
    w = wgpt_weights(e, ladder, perm_set)
    s = w.sample(swap_rng.random())
    e_new = product_step(e, ladder, specs, target, chain_rngs, stats, perm=perm_set[s])
    what = is_weights(e_new, ladder, perm_set)
    return e_new, WeightedSample(e_new.states, what)
