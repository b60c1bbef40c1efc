"""Benchmark posterior models: potential, prior, synthetic data, QoIs.

Each target exposes batch-vectorized `potential` and `log_prior` over rows
of parameter vectors; out-of-domain rows get potential +inf / log-prior
-inf, never exceptions, so Metropolis kernels reject them naturally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .rng import data_stream, normal_box_muller


@dataclass(frozen=True)
class TargetModel:
    """Abstract posterior: misfit potential Phi(theta; y) plus prior access.

    `potential` and `log_prior` map (n, dim) arrays to (n,) arrays;
    `sample_prior` draws a single (dim,) vector. `normal_prior_scale` is the
    diagonal covariance factor of a centered normal prior when one exists
    (required by pCN), else None.
    """

    name: str
    dim: int
    potential: Callable[[np.ndarray], np.ndarray]
    log_prior: Callable[[np.ndarray], np.ndarray]
    sample_prior: Callable[[np.random.Generator], np.ndarray]
    qois: dict[str, Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict)
    normal_prior_scale: np.ndarray | None = None

    def potential_one(self, theta: np.ndarray) -> float:
        return float(self.potential(np.atleast_2d(np.asarray(theta, dtype=float)))[0])

    def log_prior_one(self, theta: np.ndarray) -> float:
        return float(self.log_prior(np.atleast_2d(np.asarray(theta, dtype=float)))[0])


@dataclass(frozen=True)
class DataSet:
    """Synthetic observations; regeneration from the seed is bit-identical."""

    observations: np.ndarray
    noise_sd: float
    seed: int
    target_name: str


def save_dataset(ds: DataSet, csv_path: str | Path) -> None:
    csv_path = Path(csv_path)
    obs = np.atleast_2d(ds.observations)
    header = "row," + ",".join(f"c{j}" for j in range(obs.shape[1]))
    rows = np.column_stack([np.arange(obs.shape[0]), obs])
    np.savetxt(csv_path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
    sidecar = {"seed": ds.seed, "noise_sd": ds.noise_sd, "target_name": ds.target_name}
    csv_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def load_dataset(csv_path: str | Path) -> DataSet:
    csv_path = Path(csv_path)
    raw = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    obs = np.atleast_2d(raw)[:, 1:]
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    return DataSet(obs, float(meta["noise_sd"]), int(meta["seed"]), str(meta["target_name"]))


def _box_prior(lo: np.ndarray, hi: np.ndarray):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def log_prior(thetas: np.ndarray) -> np.ndarray:
        inside = np.all((thetas >= lo) & (thetas <= hi), axis=1)
        return np.where(inside, 0.0, -np.inf)

    def sample(rng: np.random.Generator) -> np.ndarray:
        return lo + (hi - lo) * rng.random(lo.size)

    return log_prior, sample


# ---------------------------------------------------------------------------
# quarter-circle manifold density

def circle_target() -> TargetModel:
    """Density concentrated over a quarter circle of radius 0.8 in [0,1]^2."""
    log_prior, sample = _box_prior([0.0, 0.0], [1.0, 1.0])

    def potential(thetas: np.ndarray) -> np.ndarray:
        inside = np.isfinite(log_prior(thetas))
        r2 = thetas[:, 0] ** 2 + thetas[:, 1] ** 2
        val = 1e4 * (r2 - 0.8**2) ** 2
        return np.where(inside, val, np.inf)

    qois = {"theta1": lambda t: t[:, 0], "theta2": lambda t: t[:, 1]}
    return TargetModel("circle", 2, potential, log_prior, sample, qois)


def _simpson_weights(n: int, h: float) -> np.ndarray:
    if n % 2 == 0:
        raise ValueError("Simpson quadrature needs an odd point count")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def circle_posterior_mean_quadrature(n: int = 4001) -> float:
    """E[theta_1] (= E[theta_2] by symmetry) by 2-D Simpson quadrature.

    Accumulated row by row so the full n x n grid never materializes.
    """
    xs = np.linspace(0.0, 1.0, n)
    w = _simpson_weights(n, xs[1] - xs[0])
    z = 0.0
    m1 = 0.0
    for i, x in enumerate(xs):
        row = np.exp(-1e4 * (x**2 + xs**2 - 0.64) ** 2) @ w
        z += w[i] * row
        m1 += w[i] * x * row
    return float(m1 / z)


# ---------------------------------------------------------------------------
# elliptic source inversion

class PoissonSolver:
    """Direct solver for Delta u = f on the unit square, u = 0 on the boundary.

    5-point stencil with spacing h = 1/grid_n; the sparse factorization is
    computed once (the matrix is theta-independent) and reused for every
    forcing, which is the dominant-cost optimization of the whole benchmark.
    Observations are bilinear interpolations at the obs_n x obs_n interior
    lattice (i/(obs_n+1), j/(obs_n+1)).
    """

    def __init__(self, grid_n: int = 64, obs_n: int = 64):
        if grid_n < 8:
            raise ValueError("grid_n must be >= 8")
        self.grid_n = grid_n
        self.obs_n = obs_n
        self.h = 1.0 / grid_n
        m = grid_n - 1
        self.m = m
        main = sp.diags([1.0, -4.0, 1.0], [-1, 0, 1], shape=(m, m), format="csr")
        off = sp.diags([1.0, 1.0], [-1, 1], shape=(m, m), format="csr")
        eye = sp.identity(m, format="csr")
        A = (sp.kron(eye, main) + sp.kron(off, eye)) / self.h**2
        self._A = A.tocsr()
        self._lu = spla.splu(A.tocsc())
        self.xs_int = np.arange(1, grid_n) * self.h
        self._obs_op = self._build_obs_operator()

    def _build_obs_operator(self) -> sp.csr_matrix:
        # Bilinear weights from the full node grid, restricted to interior
        # columns (boundary values are identically zero).
        n, m = self.grid_n, self.m
        pts = np.arange(1, self.obs_n + 1) / (self.obs_n + 1.0)
        rows, cols, vals = [], [], []
        for a, x in enumerate(pts):
            ix = min(int(np.floor(x / self.h)), n - 1)
            tx = x / self.h - ix
            for b, y in enumerate(pts):
                iy = min(int(np.floor(y / self.h)), n - 1)
                ty = y / self.h - iy
                r = a * self.obs_n + b
                for (gi, wx) in ((ix, 1 - tx), (ix + 1, tx)):
                    for (gj, wy) in ((iy, 1 - ty), (iy + 1, ty)):
                        if 1 <= gi <= n - 1 and 1 <= gj <= n - 1 and wx * wy != 0.0:
                            rows.append(r)
                            cols.append((gi - 1) * m + (gj - 1))
                            vals.append(wx * wy)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.obs_n**2, m * m))

    def solve_interior(self, f_flat: np.ndarray) -> np.ndarray:
        """Solve for the interior nodes given forcing values there (flat, possibly multi-rhs)."""
        return self._lu.solve(f_flat)

    def residual_inf_norm(self, u_flat: np.ndarray, f_flat: np.ndarray) -> float:
        return float(np.max(np.abs(self._A @ u_flat - f_flat)))

    def gaussian_forcing(self, thetas: np.ndarray) -> np.ndarray:
        """f(x, theta) = exp(-1000 |x - theta|^2) on the interior nodes, (m^2, n) layout."""
        X, Y = np.meshgrid(self.xs_int, self.xs_int, indexing="ij")
        th = np.atleast_2d(thetas)
        dx = X.ravel()[:, None] - th[:, 0][None, :]
        dy = Y.ravel()[:, None] - th[:, 1][None, :]
        return np.exp(-1000.0 * (dx**2 + dy**2))

    def forward(self, thetas: np.ndarray) -> np.ndarray:
        """Observed field for each source location; returns (n, obs_n, obs_n)."""
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        if np.any((th < 0) | (th > 1)):
            raise ValueError("source location outside the unit square")
        u = self.solve_interior(self.gaussian_forcing(th))
        if u.ndim == 1:
            u = u[:, None]
        obs = self._obs_op @ u
        return obs.T.reshape(th.shape[0], self.obs_n, self.obs_n)

    def forward_from_forcing(self, f_interior: np.ndarray) -> np.ndarray:
        """Observations for an arbitrary interior forcing field (m, m)."""
        u = self.solve_interior(np.asarray(f_interior, dtype=float).ravel())
        return (self._obs_op @ u).reshape(self.obs_n, self.obs_n)


_solver_cache: dict[tuple[int, int], PoissonSolver] = {}


def get_poisson_solver(grid_n: int = 64, obs_n: int = 64) -> PoissonSolver:
    key = (grid_n, obs_n)
    if key not in _solver_cache:
        _solver_cache[key] = PoissonSolver(grid_n, obs_n)
    return _solver_cache[key]


def poisson_forward(theta: np.ndarray, grid_n: int = 64) -> np.ndarray:
    """Observation-lattice solution for a single Gaussian source at theta."""
    return get_poisson_solver(grid_n).forward(np.asarray(theta, dtype=float))[0]


ELLIPTIC_TRUE_SOURCES = np.array([[0.2, 0.2], [0.2, 0.8], [0.8, 0.2], [0.8, 0.8]])
ELLIPTIC_NOISE_SD = 3.2e-6


def gen_data_elliptic(seed: int, noise_sd: float = ELLIPTIC_NOISE_SD, grid_n: int = 64) -> DataSet:
    """Observations from the four true sources plus i.i.d. normal noise.

    The four-bump forcing is one linear solve; noise comes from a dedicated
    data stream via Box-Muller, so the bytes depend only on the seed.
    """
    solver = get_poisson_solver(grid_n)
    X, Y = np.meshgrid(solver.xs_int, solver.xs_int, indexing="ij")
    f = np.zeros_like(X)
    for s in ELLIPTIC_TRUE_SOURCES:
        f += np.exp(-1000.0 * ((X - s[0]) ** 2 + (Y - s[1]) ** 2))
    clean = solver.forward_from_forcing(f)
    noise = normal_box_muller(data_stream(seed), clean.size).reshape(clean.shape)
    return DataSet(clean + noise_sd * noise, noise_sd, seed, "elliptic")


def elliptic_target(data: DataSet, grid_n: int = 64) -> TargetModel:
    """Single-source model fit to four-source data: a four-modal posterior.

    Phi(theta) = 0.5 * (64 eta)^-2 ||y - F(theta)||_F^2, uniform prior on
    the unit square.
    """
    if data.observations.shape != (64, 64):
        raise ValueError(f"elliptic data must be 64x64, got {data.observations.shape}")
    solver = get_poisson_solver(grid_n)
    y = data.observations
    inv_norm = 1.0 / (64.0 * data.noise_sd) ** 2
    log_prior, sample = _box_prior([0.0, 0.0], [1.0, 1.0])

    def potential(thetas: np.ndarray) -> np.ndarray:
        th = np.atleast_2d(thetas)
        inside = np.isfinite(log_prior(th))
        out = np.full(th.shape[0], np.inf)
        if np.any(inside):
            pred = solver.forward(th[inside])
            resid = pred - y[None, :, :]
            out[inside] = 0.5 * inv_norm * np.sum(resid**2, axis=(1, 2))
        return out

    qois = {"theta1": lambda t: t[:, 0], "theta2": lambda t: t[:, 1]}
    return TargetModel("elliptic", 2, potential, log_prior, sample, qois)


# ---------------------------------------------------------------------------
# 1-D wave source inversion

WAVE_RECEIVERS = np.linspace(-5.0, 5.0, 11)
WAVE_TIMES = np.arange(1, 1001) * (5.0 / 1000.0)   # 1000 instants on (0, 5]
WAVE_NOISE_SD = 0.01
_PULSE_OFFSETS = (-0.5, 0.0, 0.5)
# Beyond this radius every pulse term is < 1e-24 of its peak.
_PULSE_SUPPORT = 1.25


_OFFSETS_COL = np.array(_PULSE_OFFSETS)[:, None]


def wave_pulse(z: np.ndarray) -> np.ndarray:
    """Triple-Gaussian pulse shape centred at zero."""
    z = np.asarray(z, dtype=float)
    flat = np.exp(-100.0 * (z.reshape(1, -1) - _OFFSETS_COL) ** 2).sum(axis=0)
    return flat.reshape(z.shape)


def dalembert(h: Callable[[np.ndarray], np.ndarray], x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """u(x, t) = (h(x - t) + h(x + t)) / 2 for the 1-D wave equation."""
    return 0.5 * (h(x - t) + h(x + t))


def wave1d_forward(theta: float) -> np.ndarray:
    """Receiver-by-time field of a single pulse initial condition at theta."""
    if not -5.0 <= theta <= 5.0:
        raise ValueError(f"theta must lie in [-5, 5], got {theta}")
    X = WAVE_RECEIVERS[:, None]
    T = WAVE_TIMES[None, :]
    return dalembert(lambda z: wave_pulse(z - theta), X, T)


def gen_data_wave1d(seed: int, noise_sd: float = WAVE_NOISE_SD) -> DataSet:
    """Two-pulse data (true pulses at -3 and 3, half amplitude) plus noise."""
    def h_true(x):
        return 0.5 * (wave_pulse(x - (-3.0)) + wave_pulse(x - 3.0))

    clean = dalembert(h_true, WAVE_RECEIVERS[:, None], WAVE_TIMES[None, :])
    noise = normal_box_muller(data_stream(seed), clean.size).reshape(clean.shape)
    return DataSet(clean + noise_sd * noise, noise_sd, seed, "wave1d")


class _WaveMisfit:
    """Misfit sums restricted to the numerical support of the pulses.

    Expanding ||y - F(theta)||^2 separates into sums over the left- and
    right-moving characteristics z = x -/+ t - theta plus one localized
    cross term; each sum only receives contributions from |z| <= support
    radius, found by bisection in presorted coordinate arrays.
    """

    def __init__(self, y: np.ndarray):
        A = WAVE_RECEIVERS[:, None] - WAVE_TIMES[None, :]
        B = WAVE_RECEIVERS[:, None] + WAVE_TIMES[None, :]
        self._sort_a = np.argsort(A.ravel())
        self._za = A.ravel()[self._sort_a]
        self._ya = y.ravel()[self._sort_a]
        self._sort_b = np.argsort(B.ravel())
        self._zb = B.ravel()[self._sort_b]
        self._yb = y.ravel()[self._sort_b]
        self._sum_y2 = float(np.sum(y**2))
        # cross-term superset: g(A-theta) g(B-theta) != 0 needs t <= support
        jmax = int(np.searchsorted(WAVE_TIMES, _PULSE_SUPPORT, side="right"))
        self._A_cross = A[:, :jmax]
        self._B_cross = B[:, :jmax]

    def _window_sums(self, z: np.ndarray, yv: np.ndarray, theta: float) -> tuple[float, float]:
        lo = np.searchsorted(z, theta - _PULSE_SUPPORT)
        hi = np.searchsorted(z, theta + _PULSE_SUPPORT)
        g = wave_pulse(z[lo:hi] - theta)
        return float(yv[lo:hi] @ g), float(g @ g)

    def misfit_sq(self, theta: float) -> float:
        """||y - F(theta)||_F^2 (plain Frobenius, no noise scaling)."""
        ya_g, aa = self._window_sums(self._za, self._ya, theta)
        yb_g, bb = self._window_sums(self._zb, self._yb, theta)
        rows = np.abs(WAVE_RECEIVERS - theta) <= _PULSE_SUPPORT
        if np.any(rows):
            ga = wave_pulse(self._A_cross[rows] - theta)
            gb = wave_pulse(self._B_cross[rows] - theta)
            cross = float(np.sum(ga * gb))
        else:
            cross = 0.0
        sum_yf = 0.5 * (ya_g + yb_g)
        sum_ff = 0.25 * (aa + bb + 2.0 * cross)
        return self._sum_y2 - 2.0 * sum_yf + sum_ff


def wave1d_target(data: DataSet) -> TargetModel:
    """Highly multi-modal 1-D posterior with minima near theta = +/-3."""
    if data.observations.shape != (11, 1000):
        raise ValueError(f"wave1d data must be 11x1000, got {data.observations.shape}")
    misfit = _WaveMisfit(data.observations)
    # Misfit normalization (sqrt(#samples) * eta)^-2, the same convention the
    # elliptic problem's (64 eta)^-2 Frobenius norm uses; with it the
    # potential spans O(30..130) and the +/-3 mode families stay comparably
    # weighted across noise realizations.
    inv_norm = 1.0 / (np.sqrt(data.observations.size) * data.noise_sd) ** 2
    log_prior, sample = _box_prior([-5.0], [5.0])

    def potential(thetas: np.ndarray) -> np.ndarray:
        th = np.atleast_2d(thetas)
        inside = np.isfinite(log_prior(th))
        out = np.full(th.shape[0], np.inf)
        for i in np.nonzero(inside)[0]:
            out[i] = 0.5 * inv_norm * misfit.misfit_sq(float(th[i, 0]))
        return out

    return TargetModel("wave1d", 1, potential, log_prior, sample, {"theta": lambda t: t[:, 0]})


def wave1d_posterior_mean_quadrature(data: DataSet, n: int = 4001) -> float:
    """E[theta] by trapezoid quadrature of the unnormalized posterior."""
    if n < 4001:
        raise ValueError("use at least 4001 quadrature points")
    target = wave1d_target(data)
    xs = np.linspace(-5.0, 5.0, n)
    pots = target.potential(xs[:, None])
    w = np.exp(-(pots - pots.min()))
    w[0] *= 0.5
    w[-1] *= 0.5
    return float(np.sum(xs * w) / np.sum(w))


# ---------------------------------------------------------------------------
# synthetic high-dimensional Gaussian-prior target (pCN exercise)

def gaussfield_target(d: int, modes: list[np.ndarray], s: float = 1.0) -> TargetModel:
    """Gaussian-mixture potential under a standard normal prior in dimension d."""
    if d < 2:
        raise ValueError("gaussfield needs d >= 2")
    M = np.atleast_2d(np.asarray(modes, dtype=float))
    if M.shape[1] != d:
        raise ValueError(f"modes must have dimension {d}")
    if len({tuple(m) for m in M}) != M.shape[0]:
        raise ValueError("modes must be distinct")
    from scipy.special import logsumexp

    def potential(thetas: np.ndarray) -> np.ndarray:
        th = np.atleast_2d(thetas)
        d2 = np.sum((th[:, None, :] - M[None, :, :]) ** 2, axis=2)
        return -logsumexp(-d2 / (2.0 * s**2), axis=1)

    def log_prior(thetas: np.ndarray) -> np.ndarray:
        th = np.atleast_2d(thetas)
        return -0.5 * np.sum(th**2, axis=1)

    def sample(rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(d)

    qois = {"theta1": lambda t: t[:, 0], "norm_sq": lambda t: np.sum(t**2, axis=1)}
    return TargetModel("gaussfield", d, potential, log_prior, sample, qois,
                       normal_prior_scale=np.ones(d))
