import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rddpp import (
    EmptyClassError,
    FeatureMatrix,
    InvalidInputError,
    RateConfig,
    class_conditional_rate,
    coding_rate,
    hadamard_upper_bound,
    semantic_diversity,
)

from oracles import dense_hadamard, dense_rate, dense_sdiv

CFG = RateConfig(eps2=0.5)


class TestFeatureMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError, match="row 0, column 1"):
            FeatureMatrix([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(InvalidInputError):
            FeatureMatrix([[np.inf]])

    def test_label_count_must_match(self):
        with pytest.raises(InvalidInputError):
            FeatureMatrix(np.ones((2, 3)), labels=[0, 1])

    def test_labels_must_be_nonnegative_ints(self):
        with pytest.raises(InvalidInputError):
            FeatureMatrix(np.ones((2, 2)), labels=[0, -1])
        with pytest.raises(InvalidInputError):
            FeatureMatrix(np.ones((2, 2)), labels=[0.5, 1.0])

    def test_label_outside_declared_classes(self):
        with pytest.raises(InvalidInputError):
            FeatureMatrix(np.ones((2, 2)), labels=[0, 3], n_classes=2)

    def test_data_is_frozen(self):
        fm = FeatureMatrix(np.ones((2, 2)))
        with pytest.raises(ValueError):
            fm.data[0, 0] = 5.0

    def test_from_rows_transposes(self):
        fm = FeatureMatrix.from_rows(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
        assert fm.d == 3 and fm.n == 2
        assert fm.data[0, 1] == 4.0

    def test_invalid_eps2(self):
        with pytest.raises(InvalidInputError):
            RateConfig(eps2=0.0)
        with pytest.raises(InvalidInputError):
            RateConfig(eps2=-1.0)


class TestCodingRate:
    def test_zero_matrix_rate_is_zero(self):
        assert coding_rate(FeatureMatrix(np.zeros((3, 2))), CFG) == 0.0

    def test_scalar_matrix_frozen_value(self):
        # 0.5 * log2(1 + 1/0.5) hand-evaluated
        value = coding_rate(FeatureMatrix([[1.0]]), CFG)
        assert value == pytest.approx(0.7924812503605781, abs=1e-12)

    def test_primal_equals_dual(self):
        rng = np.random.default_rng(0)
        for d, n in [(7, 5), (5, 7), (6, 6)]:
            Z = FeatureMatrix(rng.standard_normal((d, n)))
            primal = coding_rate(Z, CFG, form="primal")
            dual = coding_rate(Z, CFG, form="dual")
            assert abs(primal - dual) < 1e-10

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            d = int(rng.integers(1, 12))
            n = int(rng.integers(1, 12))
            A = rng.standard_normal((d, n))
            expected = dense_rate(A, CFG.eps2)
            assert coding_rate(FeatureMatrix(A), CFG) == pytest.approx(expected, abs=1e-9)

    def test_primal_dual_over_shapes_1e10(self):
        # 100 random matrices spanning d<n, d=n, d>n
        rng = np.random.default_rng(2)
        for i in range(100):
            d = int(rng.integers(1, 20))
            n = int(rng.integers(1, 20))
            Z = FeatureMatrix(rng.standard_normal((d, n)) * rng.uniform(0.1, 3))
            assert abs(
                coding_rate(Z, CFG, form="primal") - coding_rate(Z, CFG, form="dual")
            ) < 1e-10

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            d, n = 6, 9
            Z = rng.standard_normal((d, n))
            Q = np.linalg.qr(rng.standard_normal((d, d)))[0]
            a = coding_rate(FeatureMatrix(Z), CFG)
            b = coding_rate(FeatureMatrix(Q @ Z), CFG)
            assert abs(a - b) < 1e-9

    def test_column_permutation_invariance(self):
        rng = np.random.default_rng(4)
        Z = rng.standard_normal((5, 8))
        perm = rng.permutation(8)
        a = coding_rate(FeatureMatrix(Z), CFG)
        b = coding_rate(FeatureMatrix(Z[:, perm]), CFG)
        assert abs(a - b) < 1e-9

    @settings(deadline=None, max_examples=30)
    @given(st.integers(2, 6), st.integers(2, 6), st.floats(1.5, 10.0), st.integers(0, 10_000))
    def test_scale_monotonicity(self, d, n, c, seed):
        rng = np.random.default_rng(seed)
        Z = rng.standard_normal((d, n))
        base = coding_rate(FeatureMatrix(Z), CFG)
        scaled = coding_rate(FeatureMatrix(c * Z), CFG)
        assert scaled > base

    def test_rate_nonnegative(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            Z = FeatureMatrix(rng.standard_normal((4, 6)) * 1e-3)
            assert coding_rate(Z, CFG) >= 0.0

    def test_empty_matrix_rejected(self):
        with pytest.raises(InvalidInputError):
            coding_rate(FeatureMatrix(np.zeros((3, 0))), CFG)


class TestHadamardBound:
    def test_zero_matrix(self):
        Z = FeatureMatrix(np.zeros((4, 3)))
        assert hadamard_upper_bound(Z, CFG) == 0.0
        assert coding_rate(Z, CFG) == 0.0

    def test_identity_two_frozen(self):
        Z = FeatureMatrix(np.eye(2))
        rate = coding_rate(Z, CFG)
        bound = hadamard_upper_bound(Z, CFG)
        # rate = 0.5*log2 det(3 I_2) = log2 3; bound = 2*log2(2/0.5*0.5 + 1)
        assert rate == pytest.approx(1.584962500721156, abs=1e-12)
        assert bound == pytest.approx(3.169925001442312, abs=1e-12)
        assert bound >= rate

    def test_bound_dominates_rate(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            d = int(rng.integers(1, 12))
            n = int(rng.integers(1, 25))
            Z = FeatureMatrix(rng.standard_normal((d, n)))
            assert hadamard_upper_bound(Z, CFG) >= coding_rate(Z, CFG) - 1e-9

    def test_matches_dense_formula(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((10, 20))
        assert hadamard_upper_bound(FeatureMatrix(A), CFG) == pytest.approx(
            dense_hadamard(A, CFG.eps2), rel=1e-12
        )


class TestClassConditionalRate:
    def test_single_class_equals_total_exactly(self):
        rng = np.random.default_rng(8)
        Z = FeatureMatrix(rng.standard_normal((4, 7)), labels=[2] * 7, n_classes=3)
        assert class_conditional_rate(Z, 2, CFG) == coding_rate(Z, CFG)

    def test_zero_column_class(self):
        data = np.zeros((3, 2))
        data[:, 1] = 1.0
        Z = FeatureMatrix(data, labels=[0, 1])
        assert class_conditional_rate(Z, 0, CFG) == 0.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(9)
        A = rng.standard_normal((6, 8))
        labels = np.array([0, 1, 0, 1, 1, 0, 0, 1])
        Z = FeatureMatrix(A, labels=labels)
        for c in (0, 1):
            cols = np.flatnonzero(labels == c)
            expected = dense_rate(A[:, cols], CFG.eps2)
            assert class_conditional_rate(Z, c, CFG) == pytest.approx(expected, abs=1e-9)

    def test_empty_class_raises(self):
        Z = FeatureMatrix(np.ones((2, 2)), labels=[0, 0], n_classes=2)
        with pytest.raises(EmptyClassError):
            class_conditional_rate(Z, 1, CFG)

    def test_unlabeled_raises(self):
        with pytest.raises(InvalidInputError):
            class_conditional_rate(FeatureMatrix(np.ones((2, 2))), 0, CFG)


class TestSemanticDiversity:
    def test_single_class_exactly_zero(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            Z = FeatureMatrix(rng.standard_normal((5, 6)), labels=[0] * 6)
            assert semantic_diversity(Z, CFG) == 0.0

    def test_zero_matrix_any_labels(self):
        Z = FeatureMatrix(np.zeros((4, 4)), labels=[0, 1, 0, 1])
        assert semantic_diversity(Z, CFG) == 0.0

    def test_orthogonal_two_class_positive(self):
        # two classes, each a distinct standard basis vector repeated
        data = np.zeros((4, 4))
        data[0, 0] = data[0, 1] = 1.0
        data[1, 2] = data[1, 3] = 1.0
        labels = [0, 0, 1, 1]
        expected = dense_sdiv(data, np.asarray(labels), CFG.eps2)
        value = semantic_diversity(FeatureMatrix(data, labels=labels), CFG)
        assert expected > 0
        assert value == pytest.approx(expected, abs=1e-9)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            d = int(rng.integers(2, 8))
            n = int(rng.integers(3, 12))
            A = rng.standard_normal((d, n))
            labels = rng.integers(0, 3, n)
            got = semantic_diversity(FeatureMatrix(A, labels=labels), CFG)
            assert got == pytest.approx(dense_sdiv(A, labels, CFG.eps2), abs=1e-9)

    def test_nonnegative_on_random(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            d = int(rng.integers(1, 10))
            n = int(rng.integers(2, 15))
            A = rng.standard_normal((d, n)) * rng.uniform(0.2, 4.0)
            labels = rng.integers(0, int(rng.integers(2, 5)), n)
            assert semantic_diversity(FeatureMatrix(A, labels=labels), CFG) >= 0.0

    def test_label_consistent_permutation_invariance(self):
        rng = np.random.default_rng(13)
        A = rng.standard_normal((4, 9))
        labels = rng.integers(0, 3, 9)
        perm = rng.permutation(9)
        a = semantic_diversity(FeatureMatrix(A, labels=labels), CFG)
        b = semantic_diversity(FeatureMatrix(A[:, perm], labels=labels[perm]), CFG)
        assert abs(a - b) < 1e-9

    def test_unlabeled_raises(self):
        with pytest.raises(InvalidInputError):
            semantic_diversity(FeatureMatrix(np.ones((2, 3))), CFG)
