"""Foundational value types shared by every sampler.

Parameters are plain 1-D float arrays; everything here is an immutable value
after construction (arrays are marked read-only) and safe to share between
threads. All density arithmetic is done in log space on unnormalized
densities with respect to the product prior; normalizing constants are never
computed because they cancel in every ratio any algorithm uses.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Cap on K for full permutation sets: the K! permutation bookkeeping
# overtakes the K model evaluations per step near K ~ 9.
FULL_SCHEME_DEFAULT_CAP = 8


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=a.dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TemperatureLadder:
    """Inverse temperatures beta_k = 1/T_k with 1 = beta_1 > ... >= 0.

    beta_K = 0 encodes T_K = infinity: chain K targets the prior.
    """

    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=float)
        if b.ndim != 1 or b.size < 1:
            raise ValueError("betas must be a 1-D vector")
        if b[0] != 1.0:
            raise ValueError("beta_1 must be exactly 1 (T_1 = 1)")
        if b.size > 1 and not np.all(np.diff(b) < 0):
            raise ValueError("betas must be strictly decreasing")
        if b[-1] < 0:
            raise ValueError("betas must be nonnegative")
        object.__setattr__(self, "betas", _frozen(b))

    @classmethod
    def from_temperatures(cls, temps: Sequence[float]) -> "TemperatureLadder":
        t = np.asarray(temps, dtype=float)
        betas = np.where(np.isinf(t), 0.0, 1.0 / t)
        return cls(betas)

    @classmethod
    def unchecked(cls, betas: Sequence[float]) -> "TemperatureLadder":
        """Bypass monotonicity validation (degenerate equal-beta diagnostics)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "betas", _frozen(np.asarray(betas, dtype=float)))
        return obj

    @property
    def K(self) -> int:
        return self.betas.size

    @property
    def temperatures(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.betas > 0, 1.0 / self.betas, np.inf)


def build_ladder(a: float, K: int) -> TemperatureLadder:
    """Geometric ladder T_k = a^(k-1), i.e. betas a^(1-k)."""
    if a <= 1:
        raise ValueError(f"ladder ratio must satisfy a > 1, got {a}")
    if K < 2:
        raise ValueError(f"ladder needs K >= 2 temperatures, got {K}")
    betas = np.array([float(a) ** (-k) for k in range(K)])
    return TemperatureLadder(betas)


@dataclass(frozen=True)
class Permutation:
    """A bijection of {0..K-1}, stored as a forward map sigma(k).

    Indices are 0-based internally; 1-based only in configs and reports.
    """

    map: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.map) != list(range(len(self.map))):
            raise ValueError(f"not a permutation of 0..{len(self.map) - 1}: {self.map}")

    @classmethod
    def identity(cls, K: int) -> "Permutation":
        return cls(tuple(range(K)))

    @classmethod
    def transposition(cls, K: int, i: int, j: int) -> "Permutation":
        m = list(range(K))
        m[i], m[j] = m[j], m[i]
        return cls(tuple(m))

    @classmethod
    def from_one_based(cls, m: Sequence[int]) -> "Permutation":
        return cls(tuple(int(k) - 1 for k in m))

    @property
    def K(self) -> int:
        return len(self.map)

    @property
    def one_based(self) -> tuple[int, ...]:
        return tuple(k + 1 for k in self.map)

    @property
    def is_identity(self) -> bool:
        return all(m == k for k, m in enumerate(self.map))

    def __call__(self, k: int) -> int:
        return self.map[k]

    def inverse(self) -> "Permutation":
        inv = [0] * self.K
        for k, m in enumerate(self.map):
            inv[m] = k
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """(self o other)(k) = self(other(k))."""
        return Permutation(tuple(self.map[m] for m in other.map))


def _check_group(perms: Sequence[Permutation], scheme: str) -> bool:
    if scheme == "full" and len(perms) == math.factorial(perms[0].K):
        return True
    if len(perms) > 512:
        # closure check is O(|S|^2); refuse to guess for huge custom sets
        # (costs only the rejection-free fast path, never correctness)
        return False
    table = {p.map for p in perms}
    return all(a.compose(b).map in table for a in perms for b in perms)


@dataclass(frozen=True)
class PermutationSet:
    """An ordered, inversion-closed collection of permutations of {0..K-1}.

    Ordering is lexicographic on the forward maps, so categorical sampling by
    inverse CDF is deterministic. `is_group` upgrades guarantees elsewhere
    (the unweighted swap becomes provably rejection-free).
    """

    perms: tuple[Permutation, ...]
    scheme: str = "custom"
    index_matrix: np.ndarray = field(init=False, repr=False, compare=False)
    inverse_index: np.ndarray = field(init=False, repr=False, compare=False)
    is_group: bool = field(init=False, compare=False)

    def __post_init__(self):
        if not self.perms:
            raise ValueError("empty permutation set")
        K = self.perms[0].K
        maps = [p.map for p in self.perms]
        if any(p.K != K for p in self.perms):
            raise ValueError("permutations of mixed length")
        if len(set(maps)) != len(maps):
            raise ValueError("duplicate permutations in set")
        if maps != sorted(maps):
            raise ValueError("permutation set must be ordered lexicographically")
        lookup = {m: s for s, m in enumerate(maps)}
        inv = []
        for p in self.perms:
            im = p.inverse().map
            if im not in lookup:
                raise ValueError(f"set not closed under inversion: missing {im}")
            inv.append(lookup[im])
        object.__setattr__(self, "index_matrix", _frozen(np.array(maps, dtype=np.intp)))
        object.__setattr__(self, "inverse_index", _frozen(np.array(inv, dtype=np.intp)))
        object.__setattr__(self, "is_group", _check_group(self.perms, self.scheme))

    @property
    def size(self) -> int:
        return len(self.perms)

    @property
    def K(self) -> int:
        return self.perms[0].K

    def identity_position(self) -> int | None:
        ident = tuple(range(self.K))
        for s, p in enumerate(self.perms):
            if p.map == ident:
                return s
        return None

    def __iter__(self):
        return iter(self.perms)

    def __getitem__(self, s: int) -> Permutation:
        return self.perms[s]


def _ordered(perms: list[Permutation], scheme: str, include_identity: bool) -> PermutationSet:
    if not include_identity:
        perms = [p for p in perms if not p.is_identity]
    perms = sorted(set(perms), key=lambda p: p.map)
    return PermutationSet(tuple(perms), scheme=scheme)


def enumerate_permutations(
    K: int,
    scheme: str = "full",
    window: int = 1,
    custom: Sequence[Sequence[int]] | None = None,
    include_identity: bool = True,
    cap: int = FULL_SCHEME_DEFAULT_CAP,
) -> PermutationSet:
    """Build the swap set S_K for a named scheme.

    full            all K! permutations (K capped; override `cap` to exceed)
    adjacent-pairwise  identity plus the K-1 transpositions of neighbours
    adjacent-window    identity plus all transpositions sigma_{i,j}, |i-j| <= window
    custom          user list of 1-based forward maps, checked for closure
    """
    if K < 2:
        raise ValueError(f"need K >= 2 chains to swap, got K={K}")
    if scheme == "full":
        if K > cap:
            raise ValueError(f"full S_K with K={K} exceeds cap {cap} ({math.factorial(K)} permutations)")
        perms = [Permutation(p) for p in itertools.permutations(range(K))]
        return _ordered(perms, "full", include_identity)
    if scheme == "adjacent-pairwise":
        perms = [Permutation.identity(K)]
        perms += [Permutation.transposition(K, i, i + 1) for i in range(K - 1)]
        return _ordered(perms, scheme, include_identity)
    if scheme == "adjacent-window":
        if window < 1:
            raise ValueError("window must be >= 1")
        perms = [Permutation.identity(K)]
        perms += [
            Permutation.transposition(K, i, j)
            for i in range(K)
            for j in range(i + 1, min(K, i + window + 1))
        ]
        return _ordered(perms, scheme, include_identity)
    if scheme == "custom":
        if not custom:
            raise ValueError("custom scheme requires a permutation list")
        perms = [Permutation.from_one_based(m) for m in custom]
        return _ordered(perms, "custom", include_identity=True)
    raise ValueError(f"unknown permutation scheme {scheme!r}")


@dataclass(frozen=True)
class Ensemble:
    """Joint state of the K chains with cached potentials and log-priors.

    The cache-coherence contract: potentials[k] and logpriors[k] always hold
    Phi(states[k]; y) and log prior density of states[k] for the target that
    produced the ensemble. Out-of-domain states carry potential +inf and
    log-prior -inf; kernels then reject them naturally.
    """

    states: np.ndarray     # (K, d)
    potentials: np.ndarray  # (K,)
    logpriors: np.ndarray   # (K,)

    def __post_init__(self):
        st = np.atleast_2d(np.asarray(self.states, dtype=float))
        pot = np.asarray(self.potentials, dtype=float)
        lp = np.asarray(self.logpriors, dtype=float)
        if pot.shape != (st.shape[0],) or lp.shape != (st.shape[0],):
            raise ValueError("potentials/logpriors must have one entry per chain")
        if np.any(np.isnan(pot)):
            raise ValueError("NaN potential in ensemble")
        object.__setattr__(self, "states", _frozen(st))
        object.__setattr__(self, "potentials", _frozen(pot))
        object.__setattr__(self, "logpriors", _frozen(lp))

    @classmethod
    def from_states(cls, states: np.ndarray, target) -> "Ensemble":
        st = np.atleast_2d(np.asarray(states, dtype=float))
        return cls(st, target.potential(st), target.log_prior(st))

    @property
    def K(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]


def permute_ensemble(e: Ensemble, sigma: Permutation) -> Ensemble:
    """The swapped state theta_sigma: component k becomes theta_{sigma(k)}.

    Caches are permuted identically; no model re-evaluation.
    """
    idx = np.asarray(sigma.map, dtype=np.intp)
    return Ensemble(e.states[idx], e.potentials[idx], e.logpriors[idx])


def ensemble_to_json(e: Ensemble) -> str:
    """Checkpoint form: JSON arrays of reals, one row per chain."""
    import json

    return json.dumps({
        "states": e.states.tolist(),
        "potentials": e.potentials.tolist(),
        "logpriors": e.logpriors.tolist(),
    })


def ensemble_from_json(doc: str) -> Ensemble:
    import json

    d = json.loads(doc)
    return Ensemble(np.array(d["states"], dtype=float),
                    np.array(d["potentials"], dtype=float),
                    np.array(d["logpriors"], dtype=float))


def log_joint_density(
    e: Ensemble, ladder: TemperatureLadder, sigma: Permutation | None = None
) -> float:
    """Unnormalized log of the (swapped) product density pi_sigma.

    Returns -sum_k beta_{sigma(k)} Phi(theta_k) w.r.t. the product prior;
    -inf if any cached potential is the out-of-domain sentinel.
    """
    if np.any(np.isinf(e.potentials)):
        return -np.inf
    betas = ladder.betas
    if sigma is not None:
        betas = betas[np.asarray(sigma.map, dtype=np.intp)]
    return float(-(betas @ e.potentials))
