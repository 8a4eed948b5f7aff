import math

import numpy as np
import pytest

from rddpp import (
    FeatureMatrix,
    InstanceTooLargeError,
    InvalidArgumentError,
    InvalidInputError,
    PsdKernel,
    dpp_normalizer,
    exact_map,
    gram_kernel,
    greedy_map,
    subset_log_det,
)

from oracles import brute_normalizer, naive_greedy, random_psd, subset_det


class TestPsdKernel:
    def test_symmetrizes(self):
        K = PsdKernel(np.array([[1.0, 0.2], [0.1, 1.0]]))
        assert np.array_equal(K.matrix, K.matrix.T)

    def test_rejects_indefinite(self):
        with pytest.raises(InvalidInputError):
            PsdKernel(np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(InvalidInputError):
            PsdKernel(np.ones((2, 3)))


class TestGramKernel:
    def test_identity(self):
        K = gram_kernel(FeatureMatrix(np.eye(3)), alpha=1.0)
        assert np.allclose(K.matrix, np.eye(3))

    def test_duplicate_columns_singular_minor(self):
        data = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0]])
        K = gram_kernel(FeatureMatrix(data), alpha=1.0)
        minor = K.matrix[np.ix_([0, 1], [0, 1])]
        assert abs(np.linalg.det(minor)) < 1e-12

    def test_eigenvalues_are_scaled_squared_singular_values(self):
        rng = np.random.default_rng(0)
        Z = rng.standard_normal((4, 6))
        alpha = 2.5
        K = gram_kernel(FeatureMatrix(Z), alpha=alpha)
        got = np.sort(np.linalg.eigvalsh(K.matrix))[::-1]
        svals = np.linalg.svd(Z, compute_uv=False)
        expected = np.zeros(6)
        expected[: svals.size] = alpha * svals**2
        assert np.allclose(np.sort(got)[::-1][: svals.size], expected[: svals.size], atol=1e-9)

    def test_alpha_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            gram_kernel(FeatureMatrix(np.eye(2)), alpha=0.0)


class TestNormalizer:
    def test_identity_power_of_two(self):
        for m in (1, 3, 5):
            assert dpp_normalizer(PsdKernel(np.eye(m))) == pytest.approx(2.0**m, rel=1e-12)

    def test_zero_kernel(self):
        assert dpp_normalizer(PsdKernel(np.zeros((4, 4)))) == pytest.approx(1.0, rel=1e-12)

    def test_matches_subset_sum_m10(self):
        rng = np.random.default_rng(1)
        L = random_psd(rng, 10) / 10.0
        expected = brute_normalizer(L)
        got = dpp_normalizer(PsdKernel(L))
        assert got == pytest.approx(expected, rel=1e-9)

    def test_matches_subset_sum_small_sizes(self):
        rng = np.random.default_rng(2)
        for m in range(1, 9):
            L = random_psd(rng, m) / m
            assert dpp_normalizer(PsdKernel(L)) == pytest.approx(
                brute_normalizer(L), rel=1e-9
            )


class TestSubsetLogDet:
    def test_empty_set(self):
        L = PsdKernel(np.eye(3))
        assert subset_log_det(L, []) == 0.0

    def test_singleton(self):
        L = PsdKernel(np.diag([2.0, 5.0]))
        assert subset_log_det(L, [1]) == pytest.approx(math.log(5.0), rel=1e-12)

    def test_triple_matches_oracle(self):
        rng = np.random.default_rng(3)
        L = random_psd(rng, 7)
        got = subset_log_det(PsdKernel(L), [1, 4, 6])
        assert got == pytest.approx(math.log(subset_det(L, [1, 4, 6])), rel=1e-9)

    def test_singular_is_minus_inf(self):
        data = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert subset_log_det(PsdKernel(data), [0, 1]) == -math.inf

    def test_out_of_range_raises(self):
        L = PsdKernel(np.eye(2))
        with pytest.raises(InvalidArgumentError):
            subset_log_det(L, [0, 2])
        with pytest.raises(InvalidArgumentError):
            subset_log_det(L, [0, 0])


class TestGreedyMap:
    def test_diagonal_case(self):
        res = greedy_map(PsdKernel(np.diag([3.0, 2.0, 1.0])), 2)
        assert res.indices == (0, 1)
        assert not res.rank_exhausted

    def test_k1_max_diagonal(self):
        L = PsdKernel(np.diag([1.0, 7.0, 3.0]))
        assert greedy_map(L, 1).indices == (1,)

    def test_rank_one_truncates_and_flags(self):
        col = np.array([[1.0], [2.0]])
        L = gram_kernel(FeatureMatrix(np.hstack([col, col])), 1.0)
        res = greedy_map(L, 2)
        assert len(res.indices) == 1
        assert res.rank_exhausted

    def test_k_out_of_range(self):
        L = PsdKernel(np.eye(3))
        with pytest.raises(InvalidArgumentError):
            greedy_map(L, 4)
        with pytest.raises(InvalidArgumentError):
            greedy_map(L, 0)

    def test_gains_non_increasing(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            L = random_psd(rng, 12)
            res = greedy_map(PsdKernel(L), 8)
            gains = np.asarray(res.marginal_log_gains)
            assert np.all(np.diff(gains) <= 1e-12)

    def test_per_step_optimality_against_dense_recomputation(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            m = int(rng.integers(4, 15))
            L = random_psd(rng, m)
            k = int(rng.integers(1, min(m, 6) + 1))
            res = greedy_map(PsdKernel(L), k)
            chosen = []
            for step, idx in enumerate(res.indices):
                base = subset_det(L, chosen)
                gains = {
                    c: subset_det(L, chosen + [c]) / base
                    for c in range(m)
                    if c not in chosen
                }
                best = max(gains.values())
                assert gains[idx] >= best * (1 - 1e-8)
                # reported log gain agrees with the dense ratio
                assert res.marginal_log_gains[step] == pytest.approx(
                    math.log(gains[idx]), rel=1e-6, abs=1e-9
                )
                chosen.append(idx)

    def test_matches_naive_refactorizing_greedy(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            m = int(rng.integers(3, 20))
            L = random_psd(rng, m)
            k = int(rng.integers(1, min(m, 8) + 1))
            res = greedy_map(PsdKernel(L), k)
            naive_idx, _ = naive_greedy(L, k)
            assert list(res.indices) == naive_idx

    def test_duplicate_free_full_ordering(self):
        rng = np.random.default_rng(7)
        L = random_psd(rng, 10)
        res = greedy_map(PsdKernel(L), 10)
        assert len(set(res.indices)) == len(res.indices)


class TestExactMap:
    def test_diagonal(self):
        assert exact_map(PsdKernel(np.diag([3.0, 2.0, 1.0])), 2) == [0, 1]

    def test_identity_tie_break(self):
        assert exact_map(PsdKernel(np.eye(4)), 2) == [0, 1]

    def test_guard(self):
        with pytest.raises(InstanceTooLargeError):
            exact_map(PsdKernel(np.eye(25)), 2)
        with pytest.raises(InstanceTooLargeError):
            exact_map(PsdKernel(np.eye(10)), 6)

    def test_exact_at_least_greedy(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            L = random_psd(rng, 8)
            k = int(rng.integers(1, 5))
            best = exact_map(PsdKernel(L), k)
            greedy = greedy_map(PsdKernel(L), k)
            assert subset_det(L, best) >= subset_det(L, list(greedy.indices)) - 1e-12
