import math
from itertools import combinations

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from chaoscover.chain import (
    Chain,
    build_chain,
    cover_time_samples,
    exact_cover_time,
    fresh_appearance_samples,
    harmonic,
    hitting_matrix,
    hitting_times,
    is_irreducible,
    matthews_lower,
    matthews_upper,
    mc_cover_time,
    mc_fast_hit_probability,
    mc_hitting_time,
    min_transitions,
    reachability_positive,
    sample_cover_time,
    theta_bound,
    verify_stationary,
)
from chaoscover.errors import BudgetExceededError, CensoredSampleError, InvalidInputError
from chaoscover.ifs import exponent_t
from chaoscover.partition import build_partition, length_bounds


@pytest.fixture
def chain9(sier):
    return build_chain(build_partition(sier, 0.25))


@pytest.fixture
def chain4(halves):
    return build_chain(build_partition(halves, 0.25))


def fundamental_hitting(chain):
    """E_i tau_j from the fundamental matrix Z = (I - P + 1 pi)^-1."""
    P = chain.matrix.toarray()
    pi = chain.stationary
    n = len(pi)
    Z = np.linalg.inv(np.eye(n) - P + np.outer(np.ones(n), pi))
    return (np.diag(Z)[None, :] - Z) / pi[None, :]


def cover_by_iteration(chain, start, sweeps=20_000):
    """Expected cover time by Gauss-Seidel sweeps over (visited set, state) pairs."""
    P = chain.matrix.toarray()
    n = len(P)
    full = (1 << n) - 1
    E = np.zeros((full + 1, n))
    for _ in range(sweeps):
        change = 0.0
        for mask in range(full - 1, 0, -1):
            for s in range(n):
                if not mask >> s & 1:
                    continue
                val = 1.0 + sum(P[s, k] * E[mask | 1 << k, k] for k in range(n) if P[s, k] > 0)
                change = max(change, abs(val - E[mask, s]))
                E[mask, s] = val
        if change < 1e-13:
            break
    return E[1 << start, start]


class TestStructure:
    def test_nine_state_rows(self, chain9):
        labels = [chain9.label(i) for i in range(9)]
        row = chain9.partition.position((1, 2))
        targets = sorted(chain9.label(t) for _, t, _ in chain9.transitions(row))
        assert targets == ["11", "21", "31"]
        assert np.allclose(chain9.weights, 1 / 3)
        assert labels[0] == "11"

    def test_two_ratio_row(self, two_ratio):
        ch = build_chain(build_partition(two_ratio, 0.3))
        row = ch.partition.position((2, 1))
        assert [(s, ch.label(t), p) for s, t, p in ch.transitions(row)] == [(1, "12", 0.5), (2, "22", 0.5)]
        assert np.allclose(ch.stationary, 0.25)

    def test_perturbed_residual(self, chain9):
        w = chain9.weights.copy()
        w[0, 0] += 1e-3
        w[0, 1] -= 1e-3
        bad = Chain(chain9.table, w, chain9.stationary, chain9.partition)
        assert verify_stationary(bad) >= 1e-4
        assert verify_stationary(chain9) <= 1e-15

    def test_reducible_fixture(self):
        table = np.array([[0, 0], [0, 1]])
        ch = Chain(table, np.full((2, 2), 0.5))
        assert not is_irreducible(ch)

    @pytest.mark.parametrize("delta", [2**-3, 2**-4, 0.11])
    def test_scc_cross_check(self, sier_skewed, delta):
        ch = build_chain(build_partition(sier_skewed, delta))
        ncomp, _ = connected_components(ch.matrix, directed=True, connection="strong")
        assert ncomp == 1 and is_irreducible(ch)

    def test_power_positivity(self, chain9, two_ratio):
        assert reachability_positive(chain9, 2)
        assert not reachability_positive(chain9, 1)
        ch = build_chain(build_partition(two_ratio, 0.1))
        _, ell_max = length_bounds(ch.partition)
        assert reachability_positive(ch, ell_max)

    def test_min_prob_against_exponent(self, sier_skewed, two_ratio, half_quarter):
        for sys_, delta in ((sier_skewed, 2**-5), (two_ratio, 0.03), (half_quarter, 0.01)):
            part = build_partition(sys_, delta)
            t = exponent_t(sys_)[0]
            assert min(w.prob for w in part.words) >= (delta * sys_.r_min) ** t * (1 - 1e-12)


class TestHitting:
    def test_fundamental_matrix(self, two_ratio, sier_skewed):
        for ch in (build_chain(build_partition(two_ratio, 0.1)),
                   build_chain(build_partition(sier_skewed, 2**-3))):
            H = hitting_matrix(ch)
            assert np.allclose(H, fundamental_hitting(ch), rtol=1e-9, atol=1e-9)

    def test_target_zero_and_return(self, chain9):
        prof = hitting_times(chain9, 0)
        assert prof.expected_hit[0] == 0.0
        assert prof.expected_return == pytest.approx(9.0, rel=1e-12)

    def test_return_times(self, two_ratio):
        ch = build_chain(build_partition(two_ratio, 0.05))
        for j in range(ch.state_count):
            assert hitting_times(ch, j).expected_return * ch.stationary[j] == pytest.approx(1.0, rel=1e-8)

    def test_monte_carlo(self, two_ratio):
        ch = build_chain(build_partition(two_ratio, 0.2))
        H = hitting_matrix(ch)
        for i, j in [(0, 4), (4, 0), (2, 1), (3, 3)]:
            mean, se = mc_hitting_time(ch, i, j, 100_000, master_seed=7 + i + 10 * j)
            assert abs(mean - H[i, j]) <= max(0.01 * H[i, j], 3 * se)

    def test_bad_target(self, chain9):
        with pytest.raises(InvalidInputError):
            hitting_times(chain9, 9)

    def test_solve_limit(self, chain9):
        with pytest.raises(BudgetExceededError):
            hitting_matrix(chain9, limit=5)


class TestCover:
    def test_exact_against_iteration(self, chain4, two_ratio):
        for s in range(4):
            assert exact_cover_time(chain4, s) == pytest.approx(cover_by_iteration(chain4, s), rel=1e-9)
        ch5 = build_chain(build_partition(two_ratio, 0.2))
        assert exact_cover_time(ch5, 2) == pytest.approx(cover_by_iteration(ch5, 2), rel=1e-9)

    def test_single_state(self):
        ch = Chain(np.array([[0, 0]]), np.array([[0.5, 0.5]]), np.array([1.0]))
        assert exact_cover_time(ch, 0) == 0.0

    def test_dominates_hitting(self, chain9):
        H = hitting_matrix(chain9)
        for s in (0, 4):
            assert exact_cover_time(chain9, s) >= H[s].max()

    def test_mc_agrees_nine_state(self, chain9):
        exact = exact_cover_time(chain9, 0)
        mean, se = mc_cover_time(chain9, 0, 10_000, master_seed=3)
        assert abs(mean - exact) <= 3 * se

    def test_mc_agrees_four_state(self, chain4):
        exact = exact_cover_time(chain4, 0)
        mean, se = mc_cover_time(chain4, 0, 100_000, master_seed=11)
        assert abs(mean - exact) <= 3 * se

    def test_subset_cover(self, chain9):
        H = hitting_matrix(chain9)
        assert exact_cover_time(chain9, 0, subset=[5]) == pytest.approx(H[0, 5], rel=1e-12)

    def test_samples(self, chain9):
        a = cover_time_samples(chain9, 0, 500, master_seed=1)
        assert np.array_equal(a, cover_time_samples(chain9, 0, 500, master_seed=1, threads=3))
        assert a.min() >= chain9.state_count - 1
        assert sample_cover_time(chain9, 0, 12345) == sample_cover_time(chain9, 0, 12345)

    def test_censoring(self, chain9):
        with pytest.raises(CensoredSampleError):
            sample_cover_time(chain9, 0, 1, cap=3)
        with pytest.raises(CensoredSampleError):
            mc_cover_time(chain9, 0, 10, 1, cap=3)

    def test_exact_limit(self, sier):
        ch = build_chain(build_partition(sier, 2**-3))
        with pytest.raises(BudgetExceededError):
            exact_cover_time(ch, 0)


class TestMatthews:
    def test_four_state_exhaustive(self, chain4):
        n = chain4.state_count
        upper = matthews_upper(chain4)
        for s in range(n):
            assert exact_cover_time(chain4, s) <= upper
        for size in range(2, n + 1):
            for subset in combinations(range(n), size):
                lower = matthews_lower(chain4, subset)
                up_b = matthews_upper(chain4, subset)
                for s in subset:
                    cov_b = exact_cover_time(chain4, s, subset=subset)
                    assert lower <= cov_b <= up_b
                    assert lower <= exact_cover_time(chain4, s)

    def test_full_space_value(self, chain9):
        H = hitting_matrix(chain9)
        assert matthews_upper(chain9) == pytest.approx(H.max() * harmonic(9), rel=1e-15)

    def test_nine_state(self, chain9):
        H = hitting_matrix(chain9)
        off = H + np.diag(np.full(9, -np.inf))
        i, j = np.unravel_index(np.argmax(off), off.shape)
        lower = matthews_lower(chain9, [i, j, j])
        assert lower > 0
        assert lower <= exact_cover_time(chain9, int(i))
        mean, se = mc_cover_time(chain9, 0, 100_000, master_seed=5)
        assert mean - 3 * se <= matthews_upper(chain9)

    def test_singletons(self, chain9):
        assert matthews_upper(chain9, [3]) == 0.0
        with pytest.raises(InvalidInputError):
            matthews_lower(chain9, [3])
        with pytest.raises(InvalidInputError):
            matthews_upper(chain9, [])


class TestTheta:
    def test_examples(self):
        assert theta_bound(0.5, 2, 3, 3) == pytest.approx(0.5)
        assert theta_bound(0.5, 0, 0, 0) == pytest.approx(2.0)

    @pytest.mark.parametrize("args", [(1.0, 1, 2, 3), (0.5, 3, 2, 3), (0.5, 1, 4, 3), (0.0, 0, 0, 0)])
    def test_rejects(self, args):
        with pytest.raises(InvalidInputError):
            theta_bound(*args)

    def test_fast_hit_frequency(self, chain9):
        # L_delta = 2 on the 9-state chain, so tau_j < L means a hit within one step
        for i, j in [(0, 1), (0, 3), (4, 0), (2, 8)]:
            jstar = min_transitions(chain9, i, j)
            freq = mc_fast_hit_probability(chain9, i, j, 2, 1_000_000, master_seed=i * 9 + j)
            assert freq <= theta_bound(1 / 3, min(jstar, 2), 2, 2)

    def test_hitting_sandwich(self, two_ratio, chain9):
        # E_i tau_j >= E w_j - theta (L + E w_j), w_j the fresh-appearance time
        for ch in (chain9, build_chain(build_partition(two_ratio, 0.2))):
            ell, ell_max = length_bounds(ch.partition)
            p_max = float(np.max(ch.partition.system.probs))
            H = hitting_matrix(ch)
            for j in range(ch.state_count):
                w = fresh_appearance_samples(ch, j, 20_000, master_seed=100 + j)
                ew, se = w.mean(), w.std(ddof=1) / math.sqrt(len(w))
                for i in range(ch.state_count):
                    jstar = min(min_transitions(ch, i, j), ell)
                    theta = theta_bound(p_max, jstar, ell, ell_max)
                    assert H[i, j] >= ew - 3 * se - theta * (ell_max + ew + 3 * se)

    def test_fresh_appearance_mean(self, chain4):
        # a fair-coin pattern "11" first completed with fresh flips takes 6 flips on average
        w = fresh_appearance_samples(chain4, 0, 100_000, master_seed=2)
        assert abs(w.mean() - 6.0) <= 3 * w.std(ddof=1) / math.sqrt(len(w))
        w = fresh_appearance_samples(chain4, 1, 100_000, master_seed=3)
        assert abs(w.mean() - 4.0) <= 3 * w.std(ddof=1) / math.sqrt(len(w))
