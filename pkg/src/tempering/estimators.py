"""Ergodic and weighted importance-sampling estimators plus run aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import StepStats


@dataclass
class ChainTrace:
    """Per-iteration record of one run.

    For single-target algorithms `chain1` holds the cold-chain states (N, d).
    Dynamics-swapping runs instead keep every chain's state (N, K, d) plus
    the |S_K| importance weights per iteration and the first-component map
    sigma(1) of each permutation, which is all the weighted estimator needs.
    """

    algorithm: str
    chain1: np.ndarray | None = None
    ensembles: np.ndarray | None = None
    weights: np.ndarray | None = None
    perm_first: np.ndarray | None = None
    stats: StepStats | None = None

    def __post_init__(self):
        if self.weights is not None:
            smax = self.weights.shape[1]
            if np.any(self.weights < -1e-12) or np.any(self.weights > smax + 1e-9):
                raise ValueError("importance weights outside [0, |S_K|]")

    @property
    def n_iters(self) -> int:
        if self.chain1 is not None:
            return self.chain1.shape[0]
        return self.ensembles.shape[0]


def _burn_index(n: int, burn_frac: float) -> int:
    if not 0.0 <= burn_frac < 1.0:
        raise ValueError("burn_frac must lie in [0, 1)")
    b = int(np.floor(burn_frac * n))
    if b >= n:
        raise ValueError("burn-in leaves no samples")
    return b


def ergodic_estimate(trace: ChainTrace, qoi, burn_frac: float = 0.2) -> float:
    """Average of Q over the cold chain after discarding the burn-in."""
    if trace.chain1 is None:
        raise ValueError("trace has no cold-chain record; use weighted_estimate")
    b = _burn_index(trace.n_iters, burn_frac)
    return float(np.mean(qoi(trace.chain1[b:])))


def weighted_estimate(trace: ChainTrace, qoi, burn_frac: float = 0.2) -> float:
    """Importance-weighted estimate over all chains of a dynamics-swapped run.

    (|S_K| (N-b))^-1 sum_n sum_sigma w-hat(theta^n, sigma) Q(theta^n_sigma(1)),
    aggregated per chain: sum_sigma w-hat Q(theta_sigma(1)) =
    sum_k Q(theta_k) W_k with W_k the total weight of permutations sending
    1 -> k. The estimator touches every chain's state, not just chain 1.
    """
    if trace.ensembles is None or trace.weights is None:
        raise ValueError("weighted_estimate needs a dynamics-swapped trace")
    b = _burn_index(trace.n_iters, burn_frac)
    ens = trace.ensembles[b:]          # (n, K, d)
    wts = trace.weights[b:]            # (n, S)
    n, K, d = ens.shape
    S = wts.shape[1]
    w_per_chain = np.zeros((n, K))
    for k in range(K):
        cols = np.nonzero(trace.perm_first == k)[0]
        if cols.size:
            w_per_chain[:, k] = wts[:, cols].sum(axis=1)
    qvals = qoi(ens.reshape(n * K, d)).reshape(n, K)
    return float(np.sum(qvals * w_per_chain) / (S * n))


@dataclass
class RunSummary:
    """One run's estimates and accounting."""

    algorithm: str
    run: int
    estimates: dict[str, float]
    n_iters: int
    burn_frac: float
    seed: int
    nominal_n: int = 0   # the comparison set's shared N for cost parity
    n_evals: int = 0      # actual potential evaluations (off-domain skipped)
    n_proposals: int = 0  # nominal evaluation budget: one per proposal
    n_evals_init: int = 0
    acceptance: tuple[float, ...] = ()
    seconds: float = 0.0


def aggregate_runs(
    summaries: list[RunSummary],
    truth: dict[str, float] | None = None,
    baseline: str | None = "rwm",
) -> list[dict]:
    """Collapse per-run summaries into the comparison-table rows.

    MSE against `truth` when given, else population variance across runs
    (ddof=0, so MSE = Var + bias^2 holds exactly). `ratio` is baseline
    error divided by the row's error.
    """
    if not summaries:
        raise ValueError("no run summaries")
    algos = list(dict.fromkeys(s.algorithm for s in summaries))
    qoi_names = list(summaries[0].estimates.keys())
    err: dict[tuple[str, str], float] = {}
    rows: list[dict] = []
    for algo in algos:
        runs = [s for s in summaries if s.algorithm == algo]
        if len(runs) < 2:
            raise ValueError(f"need >= 2 runs per algorithm, got {len(runs)} for {algo}")
        for q in qoi_names:
            est = np.array([s.estimates[q] for s in runs])
            mean = float(np.mean(est))
            if truth is not None and q in truth:
                e = float(np.mean((est - truth[q]) ** 2))
                kind = "mse"
            else:
                e = float(np.var(est))
                kind = "var"
            err[(algo, q)] = e
            rows.append({
                "algorithm": algo,
                "qoi": q,
                "mean": mean,
                "error": e,
                "error_kind": kind,
                "n_runs": len(runs),
                "evals_per_sample": float(np.mean([
                    (s.n_proposals or s.n_evals) / (s.nominal_n if s.nominal_n else s.n_iters)
                    for s in runs
                ])),
                "seconds": float(np.mean([s.seconds for s in runs])),
            })
    if baseline is not None:
        if baseline not in algos:
            raise ValueError(f"baseline algorithm {baseline!r} not among {algos}")
        for row in rows:
            base = err[(baseline, row["qoi"])]
            row["ratio_vs_baseline"] = base / row["error"] if row["error"] > 0 else np.inf
    return rows
