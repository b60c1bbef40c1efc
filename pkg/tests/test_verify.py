import numpy as np
import pytest

from tempering.core import Ensemble, TemperatureLadder, enumerate_permutations
from tempering.rng import substream
from tempering.swaps import uw_swap_step
from tempering.verify import (
    DiscreteSpace,
    base_matrix,
    check_invariance,
    check_reversibility,
    check_row_stochastic,
    make_space,
    min_pairwise_overlap,
    overlap,
    product_matrix,
    psdpt_step_matrix,
    pt_step_matrix,
    pt_sweep_matrix,
    rpt_step_matrix,
    run_oracle_suite,
    spectral_gap,
    stationary,
    swap_matrix_uw,
    swapped_product_matrix,
    ugpt_matrix,
    variance_bound_check,
    weighted_estimator_exactness,
    wgpt_gap_bound_check,
    wgpt_matrix,
    _symmetrized_contraction,
)


class TestBaseMatrix:
    def test_uniform_target_is_proposal(self):
        space = DiscreteSpace(np.zeros(3), TemperatureLadder(np.array([1.0, 0.5])))
        P = base_matrix(space, 0)
        expected = np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]])
        assert np.array_equal(P, expected)

    def test_two_state_gap_closed_form(self):
        # flip probabilities p = q = 0.25: eigenvalues {1, 1-p-q} = {1, 0.5}
        P = np.array([[0.75, 0.25], [0.25, 0.75]])
        assert spectral_gap(P, np.array([0.5, 0.5])) == pytest.approx(0.5, abs=1e-12)

    def test_rows_sum_to_one(self, rng):
        space = make_space(4, 2, rng)
        for k in range(2):
            assert check_row_stochastic(base_matrix(space, k)) < 1e-15

    def test_detailed_balance_by_construction(self, rng):
        space = make_space(4, 3, rng)
        for k in range(3):
            P = base_matrix(space, k)
            assert check_reversibility(P, space.chain_dist(k)) <= 1e-14


class TestCheckFunctions:
    def test_cyclic_permutation_residual(self):
        P = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
        pi = np.full(3, 1 / 3)
        assert check_reversibility(P, pi) == pytest.approx(1 / 3, abs=1e-15)

    def test_identity_gap_zero(self):
        pi = np.array([0.2, 0.3, 0.5])
        assert spectral_gap(np.eye(3), pi) == pytest.approx(0.0, abs=1e-12)

    def test_stationary_errors_on_reducible(self):
        with pytest.raises(ValueError, match="reducible"):
            stationary(np.eye(3))

    def test_spectral_gap_rejects_non_reversible(self, rng):
        space = make_space(3, 3, rng)
        P = pt_sweep_matrix(space)  # composed sweep is not mu-reversible
        with pytest.raises(ValueError, match="not reversible"):
            spectral_gap(P, space.joint_target())

    def test_invariance_of_any_dist_under_identity(self):
        pi = np.array([0.1, 0.9])
        assert check_invariance(pi, np.eye(2)) == 0.0


class TestOverlap:
    def test_identical_densities(self):
        p = np.array([0.3, 0.7])
        assert overlap(p, p) == pytest.approx(1.0)

    def test_worked_example(self):
        assert overlap(np.array([0.5, 0.5]), np.array([0.8, 0.2])) == pytest.approx(0.7)

    def test_l1_identity(self, rng):
        a = rng.random(6)
        a /= a.sum()
        b = rng.random(6)
        b /= b.sum()
        assert overlap(a, b) == pytest.approx(1 - 0.5 * np.abs(a - b).sum(), abs=1e-14)

    def test_disjoint_supports(self):
        assert overlap(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


class TestSwapMatrices:
    def test_identity_set_gives_identity_matrix(self, rng):
        space = make_space(3, 2, rng)
        only_id = enumerate_permutations(2, "custom", custom=[[1, 2]])
        assert np.array_equal(swap_matrix_uw(space, only_id), np.eye(9))

    def test_uw_rows_supported_on_orbit(self, rng):
        space = make_space(3, 2, rng)
        sk = enumerate_permutations(2, "full")
        P = swap_matrix_uw(space, sk)
        assert check_row_stochastic(P) < 1e-12
        tuples = space.joint_tuples()
        for I in range(9):
            orbit = {int(np.ravel_multi_index(tuples[I][list(p.map)], (3, 3))) for p in sk}
            assert set(np.nonzero(P[I])[0]) <= orbit

    def test_pt_sweep_is_ordered_product_of_pairs(self, rng):
        space = make_space(2, 3, rng)
        from tempering.verify import swap_matrix_pt_pair

        M = swap_matrix_pt_pair(space, 0, 1) @ swap_matrix_pt_pair(space, 1, 2)
        assert np.allclose(pt_sweep_matrix(space), M, atol=1e-15)

    def test_pt_not_reversible_rpt_reversible(self, rng):
        space = make_space(3, 3, rng)
        mu = space.joint_target()
        assert check_reversibility(pt_step_matrix(space), mu) > 1e-8
        assert check_reversibility(rpt_step_matrix(space), mu) <= 1e-12
        assert check_invariance(mu, pt_step_matrix(space)) <= 1e-12

    def test_psdpt_invariant(self, rng):
        space = make_space(3, 3, rng)
        assert check_invariance(space.joint_target(), psdpt_step_matrix(space)) <= 1e-12

    def test_wgpt_matrix_row_stochastic_and_reversible(self, rng):
        space = make_space(3, 2, rng)
        sk = enumerate_permutations(2, "full")
        P = wgpt_matrix(space, sk)
        assert check_row_stochastic(P) < 1e-12
        assert check_reversibility(P, space.mu_w(sk)) <= 1e-12

    def test_gap_of_palindromic_composition_not_worse(self, rng):
        for _ in range(5):
            space = make_space(3, 2, rng)
            sk = enumerate_permutations(2, "full")
            mu = space.joint_target()
            prod = swapped_product_matrix(space, np.arange(2))
            assert spectral_gap(ugpt_matrix(space, sk), mu) >= spectral_gap(prod, mu) - 1e-10


class TestBounds:
    def test_variance_bound_random_instances(self, rng):
        for _ in range(4):
            space = make_space(3, 2, rng)
            sk = enumerate_permutations(2, "full")
            res = variance_bound_check(space, sk, 250, rng)
            assert res.lower_slack >= -1e-10
            assert res.upper_slack >= -1e-10
            assert 0 < res.lambda_m <= 1

    def test_degenerate_equal_temperatures(self, rng):
        # all temperatures equal: Lambda_m = 1, bound = 1, avg variance = 1
        pots = rng.standard_normal(3)
        space = DiscreteSpace(pots, TemperatureLadder.unchecked([1.0, 1.0]))
        sk = enumerate_permutations(2, "full")
        assert min_pairwise_overlap(space, sk) == pytest.approx(1.0, abs=1e-12)
        res = variance_bound_check(space, sk, 100, rng)
        assert res.lower_slack == pytest.approx(0.0, abs=1e-10)
        assert res.upper_slack == pytest.approx(0.0, abs=1e-10)

    def test_identity_operator_contraction_is_one(self):
        pi = np.array([0.2, 0.5, 0.3])
        assert _symmetrized_contraction(np.eye(3), pi) == pytest.approx(1.0, abs=1e-12)

    def test_wgpt_gap_bound_slack(self, rng):
        for _ in range(4):
            space = make_space(3, 2, rng)
            sk = enumerate_permutations(2, "full")
            assert wgpt_gap_bound_check(space, sk) >= -1e-10

    def test_estimator_exactness(self, rng):
        for _ in range(4):
            space = make_space(3, 2, rng)
            sk = enumerate_permutations(2, "full")
            assert weighted_estimator_exactness(space, sk, rng) <= 1e-10


def _simulate_ugpt_distribution(space, sk, n_draws, seed):
    """One-step frequencies of the real composed step from a fixed start.

    The swap halves run through uw_swap_step itself; the product move is the
    lattice MH analogue of the continuous product step (same accept rule).
    """
    rng = substream(seed, 99)
    m, K = space.m, space.K
    lad = space.ladder
    start_tuple = np.array([0] * K)
    pots = space.potentials
    counts = np.zeros(space.joint_size, dtype=np.int64)
    start = Ensemble(start_tuple[:, None].astype(float), pots[start_tuple], np.zeros(K))
    for _ in range(n_draws):
        e = uw_swap_step(start, lad, sk, rng)
        idx = e.states[:, 0].astype(int).copy()
        cur = pots[idx]
        for k in range(K):
            j = idx[k] + (1 if rng.random() < 0.5 else -1)
            if not 0 <= j < m:
                j = idx[k]  # reflected proposal: stay
            log_alpha = -lad.betas[k] * (pots[j] - cur[k])
            u = rng.random()
            if log_alpha >= 0.0 or u == 0.0 or np.log(u) < log_alpha:
                idx[k] = j
                cur[k] = pots[j]
        e = Ensemble(idx[:, None].astype(float), cur, np.zeros(K))
        e = uw_swap_step(e, lad, sk, rng)
        final = e.states[:, 0].astype(int)
        counts[int(np.ravel_multi_index(tuple(final), (m,) * K))] += 1
    return counts


@pytest.mark.parametrize("n_draws", [100_000])
def test_ugpt_matrix_matches_simulation(n_draws, rng):
    """Q P Q matrix row vs simulated one-step frequencies, 3-sigma bands."""
    space = make_space(2, 2, np.random.default_rng(5), allow_prior_chain=False)
    sk = enumerate_permutations(2, "full")
    P = ugpt_matrix(space, sk)
    row = P[0]
    counts = _simulate_ugpt_distribution(space, sk, n_draws, seed=17)
    for J in range(space.joint_size):
        p = row[J]
        sd = np.sqrt(max(n_draws * p * (1 - p), 1e-12))
        assert abs(counts[J] - n_draws * p) <= 3.0 * sd + 1e-9, (
            f"state {J}: simulated {counts[J]}, expected {n_draws * p:.1f} +/- {sd:.1f}"
        )


@pytest.mark.slow
def test_ugpt_matrix_matches_simulation_million_draws():
    space = make_space(3, 2, np.random.default_rng(11), allow_prior_chain=False)
    sk = enumerate_permutations(2, "full")
    P = ugpt_matrix(space, sk)
    row = P[0]
    n = 1_000_000
    counts = _simulate_ugpt_distribution(space, sk, n, seed=23)
    for J in range(space.joint_size):
        p = row[J]
        sd = np.sqrt(max(n * p * (1 - p), 1e-12))
        assert abs(counts[J] - n * p) <= 3.0 * sd + 1e-9


class TestOracleSuite:
    def test_all_checks_pass(self):
        results = run_oracle_suite(seed=3, n_states=4000, n_f=400)
        failed = [r for r in results if not r.ok]
        assert not failed, f"failed checks: {[(r.name, r.value) for r in failed]}"

    def test_cap_respected(self):
        with pytest.raises(ValueError, match="cap"):
            DiscreteSpace(np.zeros(9), TemperatureLadder(np.array([1.0, 0.5, 0.25, 0.1])), cap=4096)
