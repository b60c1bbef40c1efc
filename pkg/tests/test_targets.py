import math

import numpy as np
import pytest

from tempering.targets import (
    ELLIPTIC_TRUE_SOURCES,
    PoissonSolver,
    WAVE_RECEIVERS,
    WAVE_TIMES,
    DataSet,
    circle_posterior_mean_quadrature,
    circle_target,
    dalembert,
    elliptic_target,
    gaussfield_target,
    gen_data_elliptic,
    gen_data_wave1d,
    get_poisson_solver,
    load_dataset,
    poisson_forward,
    save_dataset,
    wave_pulse,
    wave1d_forward,
    wave1d_posterior_mean_quadrature,
    wave1d_target,
)


class TestCircleTarget:
    def test_on_manifold_zero(self):
        t = circle_target()
        assert t.potential_one([0.8, 0.0]) == 0.0

    def test_origin_value(self):
        assert circle_target().potential_one([0.0, 0.0]) == pytest.approx(4096.0, abs=1e-9)

    def test_off_domain_sentinel(self):
        t = circle_target()
        assert t.potential_one([1.1, 0.0]) == np.inf
        assert t.log_prior_one([1.1, 0.0]) == -np.inf

    def test_prior_sampler_in_domain(self, rng):
        t = circle_target()
        draws = np.stack([t.sample_prior(rng) for _ in range(50)])
        assert np.all((draws >= 0) & (draws <= 1))
        assert np.all(np.isfinite(t.potential(draws)))

    def test_quadrature_mean_converged(self):
        m1 = circle_posterior_mean_quadrature(2001)
        m2 = circle_posterior_mean_quadrature(4001)
        assert m1 == pytest.approx(m2, abs=1e-6)
        assert 0.49 < m2 < 0.53  # arc-uniform heuristic gives 0.8*2/pi = 0.509


class TestPoissonSolver:
    def test_symmetric_source_symmetric_field(self):
        u = poisson_forward(np.array([0.5, 0.5]))
        assert u.shape == (64, 64)
        assert np.max(np.abs(u - u.T)) < 1e-12
        assert np.max(np.abs(u - u[::-1, :])) < 1e-12
        assert np.max(np.abs(u - u[:, ::-1])) < 1e-12

    def test_manufactured_solution_second_order(self):
        # u* = sin(pi x) sin(pi y), f = -2 pi^2 u*: error shrinks ~4x per refinement
        errs = {}
        for n in (32, 64):
            s = PoissonSolver(n)
            X, Y = np.meshgrid(s.xs_int, s.xs_int, indexing="ij")
            ustar = np.sin(np.pi * X) * np.sin(np.pi * Y)
            u = s.solve_interior((-2 * np.pi**2 * ustar).ravel())
            errs[n] = np.max(np.abs(u - ustar.ravel()))
        assert errs[32] / errs[64] == pytest.approx(4.0, abs=0.5)

    def test_zero_forcing_zero_solution(self):
        s = get_poisson_solver(64)
        assert np.all(s.solve_interior(np.zeros(63 * 63)) == 0.0)

    def test_discrete_residual_small(self, rng):
        s = get_poisson_solver(64)
        f = rng.normal(size=63 * 63)
        u = s.solve_interior(f)
        assert s.residual_inf_norm(u, f) <= 1e-10

    def test_rejects_off_domain_source(self):
        with pytest.raises(ValueError):
            poisson_forward(np.array([1.2, 0.5]))

    def test_rejects_tiny_grid(self):
        with pytest.raises(ValueError):
            PoissonSolver(4)


class TestEllipticTarget:
    def test_data_shape_and_grid(self):
        ds = gen_data_elliptic(0)
        assert ds.observations.shape == (64, 64)

    def test_rejects_mismatched_data(self):
        ds = gen_data_elliptic(0)
        bad = DataSet(ds.observations[:32, :32], ds.noise_sd, 0, "elliptic")
        with pytest.raises(ValueError):
            elliptic_target(bad)

    def test_noise_scale_quarters_potential(self):
        ds = gen_data_elliptic(0)
        doubled = DataSet(ds.observations, 2 * ds.noise_sd, ds.seed, ds.target_name)
        t1, t2 = elliptic_target(ds), elliptic_target(doubled)
        th = np.array([0.3, 0.6])
        assert t2.potential_one(th) == pytest.approx(t1.potential_one(th) / 4.0, rel=1e-12)

    def test_misfit_invariant_under_joint_permutation(self):
        # reflecting both the data and the source leaves the misfit unchanged
        ds = gen_data_elliptic(0)
        t1 = elliptic_target(ds)
        refl = DataSet(ds.observations[::-1, :].copy(), ds.noise_sd, ds.seed, ds.target_name)
        t2 = elliptic_target(refl)
        for th in ([0.3, 0.6], [0.72, 0.15]):
            mirrored = [1.0 - th[0], th[1]]
            assert t2.potential_one(mirrored) == pytest.approx(t1.potential_one(th), rel=1e-10)

    def test_off_domain_sentinel(self):
        t = elliptic_target(gen_data_elliptic(0))
        assert t.potential_one([1.2, 0.5]) == np.inf

    @pytest.mark.xfail(
        reason="with the specified solution-field misfit the scan minimum sits at the "
        "domain centre, not at the true sources (total-charge far field dominates "
        "the Frobenius norm); see the project notes for the full analysis",
        strict=True,
    )
    def test_true_source_near_scan_minimum(self):
        t = elliptic_target(gen_data_elliptic(0, noise_sd=0.0))
        xs = np.linspace(1 / 33, 32 / 33, 32)
        grid = np.stack(np.meshgrid(xs, xs, indexing="ij"), -1).reshape(-1, 2)
        pots = t.potential(grid)
        best = grid[np.argmin(pots)]
        near_a_source = min(np.linalg.norm(best - s) for s in ELLIPTIC_TRUE_SOURCES)
        assert near_a_source < 0.1
        assert t.potential_one(ELLIPTIC_TRUE_SOURCES[0]) <= pots.min() * 1.05


class TestWaveForward:
    def test_initial_condition_limit(self):
        xs = np.linspace(-4, 4, 41)
        h = lambda z: wave_pulse(z - 1.3)
        assert dalembert(h, xs, 0.0) == pytest.approx(h(xs), abs=0)

    def test_single_gaussian_sanity(self):
        # u(1,1) = (e^0 + e^-400)/2 for a unit Gaussian pulse
        u = dalembert(lambda z: np.exp(-100.0 * z**2), np.array([1.0]), np.array([1.0]))
        assert u[0] == pytest.approx(0.5 * (1.0 + np.exp(-400.0)), rel=1e-15)

    def test_translation_equivariance(self, rng):
        theta = 0.7
        for _ in range(20):
            x = rng.uniform(-3, 3)
            t = rng.uniform(0.1, 2.0)
            u_shift = dalembert(lambda z: wave_pulse(z - theta), np.array([x]), np.array([t]))
            u_zero = dalembert(wave_pulse, np.array([x - theta]), np.array([t]))
            assert u_shift[0] == pytest.approx(u_zero[0], rel=1e-12, abs=1e-300)

    def test_forward_shape_and_domain(self):
        f = wave1d_forward(0.5)
        assert f.shape == (11, 1000)
        with pytest.raises(ValueError):
            wave1d_forward(5.5)

    def test_exactness_vs_direct_dalembert(self, rng):
        # cross-check against a scalar-math evaluation at random (receiver, time)
        theta = -1.25
        F = wave1d_forward(theta)
        for _ in range(50):
            i = rng.integers(11)
            j = rng.integers(1000)
            x, t = WAVE_RECEIVERS[i], WAVE_TIMES[j]
            direct = 0.5 * sum(
                math.exp(-100.0 * (z - theta - c) ** 2)
                for z in (x - t, x + t)
                for c in (-0.5, 0.0, 0.5)
            )
            assert F[i, j] == pytest.approx(direct, rel=1e-13, abs=1e-300)

    def test_time_grid_convention(self):
        assert WAVE_TIMES[0] == pytest.approx(0.005)
        assert WAVE_TIMES[-1] == 5.0
        assert len(WAVE_TIMES) == 1000


class TestWaveTarget:
    def test_fast_misfit_matches_direct_field(self, rng):
        ds = gen_data_wave1d(3)
        t = wave1d_target(ds)
        c = 1.0 / (np.sqrt(ds.observations.size) * ds.noise_sd) ** 2
        for th in rng.uniform(-5, 5, 12):
            direct = 0.5 * c * np.sum((ds.observations - wave1d_forward(th)) ** 2)
            assert t.potential_one([th]) == pytest.approx(direct, rel=1e-10)

    def test_deepest_minima_near_true_pulses(self):
        t = wave1d_target(gen_data_wave1d(3))
        xs = np.linspace(-5, 5, 2001)
        pots = t.potential(xs[:, None])
        interior = (pots[1:-1] < pots[:-2]) & (pots[1:-1] < pots[2:])
        mins = [(pots[i + 1], xs[i + 1]) for i in np.nonzero(interior)[0]]
        mins.sort()
        two_deepest = sorted(x for _, x in mins[:2])
        assert two_deepest[0] == pytest.approx(-3.0, abs=0.05)
        assert two_deepest[1] == pytest.approx(3.0, abs=0.05)

    def test_nonnegative_everywhere(self):
        t = wave1d_target(gen_data_wave1d(3))
        xs = np.linspace(-5, 5, 801)
        assert np.all(t.potential(xs[:, None]) >= 0.0)

    def test_quadrature_mean_reference_value(self):
        # the posterior mean swings with the noise realization; this pins the
        # shipped data seed's value near the 0.08211 reference
        m = wave1d_posterior_mean_quadrature(gen_data_wave1d(3))
        assert m == pytest.approx(0.08211, abs=2e-3)

    def test_quadrature_requires_enough_points(self):
        with pytest.raises(ValueError):
            wave1d_posterior_mean_quadrature(gen_data_wave1d(3), n=1001)


class TestGaussfield:
    def test_symmetric_modes_symmetric_potential(self, rng):
        m = np.zeros(5)
        m[0] = 2.0
        t = gaussfield_target(5, [m, -m])
        for _ in range(20):
            th = rng.standard_normal(5)
            assert t.potential_one(th) == pytest.approx(t.potential_one(-th), rel=1e-12)

    def test_single_mode_at_origin_rotationally_symmetric(self, rng):
        t = gaussfield_target(3, [np.zeros(3)])
        th = rng.standard_normal(3)
        flipped = th * np.array([-1, 1, -1])
        assert t.potential_one(th) == pytest.approx(t.potential_one(flipped), rel=1e-12)

    def test_is_weights_bounded_at_high_dimension(self, rng):
        # the importance weights stay within [0, |S_K|] as dimension grows
        from tempering.core import Ensemble, enumerate_permutations
        from tempering.core import TemperatureLadder
        from tempering.swaps import is_weights

        d = 100
        m = np.zeros(d)
        m[0] = 2.0
        t = gaussfield_target(d, [m, -m])
        lad = TemperatureLadder.from_temperatures([1.0, 4.57, 20.89, 100.0])
        sk = enumerate_permutations(4, "full")
        for _ in range(200):
            states = np.stack([t.sample_prior(rng) for _ in range(4)])
            what = is_weights(Ensemble.from_states(states, t), lad, sk)
            assert np.all(what >= 0.0)
            assert np.all(what <= sk.size + 1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            gaussfield_target(1, [np.zeros(1)])
        with pytest.raises(ValueError):
            gaussfield_target(3, [np.zeros(3), np.zeros(3)])

    def test_prior_interface_for_pcn(self):
        t = gaussfield_target(4, [np.ones(4)])
        assert t.normal_prior_scale is not None
        assert np.array_equal(t.normal_prior_scale, np.ones(4))


class TestDataGeneration:
    def test_bit_identical_regeneration(self):
        a = gen_data_wave1d(7)
        b = gen_data_wave1d(7)
        assert a.observations.tobytes() == b.observations.tobytes()
        c = gen_data_elliptic(7)
        d = gen_data_elliptic(7)
        assert c.observations.tobytes() == d.observations.tobytes()

    def test_zero_noise_equals_clean_forward(self):
        ds = gen_data_wave1d(0, noise_sd=0.0)
        def h_true(x):
            return 0.5 * (wave_pulse(x + 3.0) + wave_pulse(x - 3.0))
        clean = dalembert(h_true, WAVE_RECEIVERS[:, None], WAVE_TIMES[None, :])
        assert np.array_equal(ds.observations, clean)

    def test_seeds_differ(self):
        assert not np.array_equal(gen_data_wave1d(0).observations,
                                  gen_data_wave1d(1).observations)

    def test_csv_roundtrip(self, tmp_path):
        ds = gen_data_wave1d(3)
        path = tmp_path / "wave.csv"
        save_dataset(ds, path)
        back = load_dataset(path)
        assert np.array_equal(back.observations, ds.observations)
        assert back.noise_sd == ds.noise_sd
        assert back.seed == ds.seed
        assert back.target_name == "wave1d"
        header = path.read_text().splitlines()[0]
        assert header.startswith("row,c0,")


class TestTargetInvariants:
    @pytest.mark.parametrize("make", [
        circle_target,
        lambda: elliptic_target(gen_data_elliptic(0)),
        lambda: wave1d_target(gen_data_wave1d(3)),
        lambda: gaussfield_target(6, [np.ones(6)]),
    ])
    def test_finite_prior_implies_finite_potential(self, make, rng):
        t = make()
        draws = np.stack([t.sample_prior(rng) for _ in range(25)])
        lp = t.log_prior(draws)
        pot = t.potential(draws)
        assert np.all(np.isfinite(lp))
        assert np.all(np.isfinite(pot))
