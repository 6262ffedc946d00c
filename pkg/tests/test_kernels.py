import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from folkm.data import SampleSet
from folkm.errors import DimensionMismatch, KernelError, LengthMismatch
from folkm.kernels import (
    KernelExpansion,
    KernelSpec,
    expansion_eval,
    expansion_eval_vector,
    gram_matrix,
    kernel_eval,
    load_model,
    rkhs_norm_sq,
    save_model,
)

RBF = KernelSpec("rbf", gamma=1.0)
LIN = KernelSpec("linear")
POLY = KernelSpec("polynomial", degree=2, offset=1.0)


class TestKernelSpec:
    def test_parameter_validation(self):
        with pytest.raises(KernelError):
            KernelSpec("rbf", gamma=0.0)
        with pytest.raises(KernelError):
            KernelSpec("polynomial", degree=0)
        with pytest.raises(KernelError):
            KernelSpec("polynomial", degree=2, offset=-1.0)
        with pytest.raises(KernelError):
            KernelSpec("sigmoid")

    def test_dict_round_trip(self):
        for spec in (RBF, LIN, POLY):
            assert KernelSpec.from_dict(spec.to_dict()) == spec


class TestKernelEval:
    def test_rbf_identical_vectors(self):
        a = np.array([0.3, -1.2, 4.0])
        assert kernel_eval(RBF, a, a) == 1.0

    def test_linear_dot(self):
        assert kernel_eval(LIN, np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0

    def test_polynomial(self):
        assert kernel_eval(POLY, np.array([1.0]), np.array([1.0])) == 4.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            kernel_eval(LIN, np.array([1.0]), np.array([1.0, 2.0]))

    @given(
        hnp.arrays(float, 4, elements=st.floats(-3, 3)),
        hnp.arrays(float, 4, elements=st.floats(-3, 3)),
        st.sampled_from([RBF, LIN, POLY, KernelSpec("rbf", gamma=0.3),
                         KernelSpec("polynomial", degree=3, offset=0.5)]),
    )
    @settings(max_examples=200, deadline=None)
    def test_symmetry(self, a, b, spec):
        assert kernel_eval(spec, a, b) == kernel_eval(spec, b, a)

    @given(
        hnp.arrays(float, 3, elements=st.floats(-3, 3)),
        hnp.arrays(float, 3, elements=st.floats(-3, 3)),
        st.floats(0.01, 1.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_rbf_range(self, a, b, gamma):
        v = kernel_eval(KernelSpec("rbf", gamma=gamma), a, b)
        assert 0.0 < v <= 1.0


class TestGramMatrix:
    def _samples(self, n=5, m=2, seed=0):
        rng = np.random.default_rng(seed)
        return SampleSet(rng.standard_normal((n, m)))

    def test_rbf_diagonal_exactly_one(self):
        samples = self._samples()
        tuples = np.arange(5).reshape(-1, 1)
        G = gram_matrix(RBF, tuples, samples)
        assert np.all(np.diag(G) == 1.0)

    def test_single_linear_entry(self):
        samples = SampleSet(np.array([[2.0]]))
        G = gram_matrix(LIN, np.array([[0]]), samples)
        assert G.tolist() == [[4.0]]

    def test_duplicate_tuples_rejected(self):
        samples = self._samples()
        with pytest.raises(KernelError):
            gram_matrix(RBF, np.array([[0], [0]]), samples)

    def test_exactly_symmetric(self):
        samples = self._samples(n=20, m=3, seed=4)
        for spec in (RBF, LIN, POLY):
            G = gram_matrix(spec, np.arange(20).reshape(-1, 1), samples)
            assert np.array_equal(G, G.T)

    def test_binary_predicate_concatenates_arguments(self):
        samples = SampleSet(np.array([[1.0], [2.0]]))
        G = gram_matrix(LIN, np.array([[0, 1]]), samples)
        # concatenated vector (1, 2): <v, v> = 5
        assert G.tolist() == [[5.0]]

    def test_psd_within_slack(self):
        samples = self._samples(n=15, m=2, seed=9)
        rng = np.random.default_rng(1)
        G = gram_matrix(RBF, np.arange(15).reshape(-1, 1), samples)
        for _ in range(50):
            w = rng.standard_normal(15)
            assert w @ G @ w >= -1e-9


class TestExpansion:
    def _setup(self):
        samples = SampleSet(np.array([[1.0, 0.0], [3.0, 5.0], [0.5, 0.5]]))
        return samples

    def test_zero_weights(self):
        samples = self._setup()
        exp = KernelExpansion("A", RBF, np.array([[0], [1]]), np.zeros(2))
        assert expansion_eval(exp, (0,), samples) == 0.0

    def test_single_rbf_support_at_itself(self):
        samples = self._setup()
        exp = KernelExpansion("A", RBF, np.array([[1]]), np.array([1.0]))
        assert expansion_eval(exp, (1,), samples) == 1.0

    def test_linear_weighted(self):
        samples = self._setup()
        exp = KernelExpansion("A", LIN, np.array([[0]]), np.array([2.0]))
        assert expansion_eval(exp, (1,), samples) == 6.0  # 2 * <(1,0),(3,5)>

    def test_out_of_sample_vector(self):
        samples = self._setup()
        exp = KernelExpansion("A", LIN, np.array([[0]]), np.array([2.0]))
        assert expansion_eval_vector(exp, np.array([10.0, 0.0]), samples) == 20.0

    def test_weights_must_be_finite(self):
        with pytest.raises(KernelError):
            KernelExpansion("A", LIN, np.array([[0]]), np.array([np.nan]))

    def test_support_unique(self):
        with pytest.raises(KernelError):
            KernelExpansion("A", LIN, np.array([[0], [0]]), np.array([1.0, 1.0]))

    @given(
        hnp.arrays(float, 4, elements=st.floats(-5, 5)),
        hnp.arrays(float, 4, elements=st.floats(-5, 5)),
    )
    @settings(max_examples=150, deadline=None)
    def test_linear_in_weights(self, w1, w2):
        samples = SampleSet(np.array([[1.0], [2.0], [-0.5], [0.3]]))
        support = np.arange(4).reshape(-1, 1)
        e1 = expansion_eval(KernelExpansion("A", RBF, support, w1), (2,), samples)
        e2 = expansion_eval(KernelExpansion("A", RBF, support, w2), (2,), samples)
        e12 = expansion_eval(KernelExpansion("A", RBF, support, w1 + w2), (2,), samples)
        assert math.isclose(e12, e1 + e2, rel_tol=1e-10, abs_tol=1e-12)


class TestRkhsNorm:
    def test_zero_weights(self):
        exp = KernelExpansion("A", LIN, np.array([[0], [1]]), np.zeros(2))
        assert rkhs_norm_sq(exp, np.eye(2)) == 0.0

    def test_direct_form(self):
        exp = KernelExpansion("A", LIN, np.array([[0]]), np.array([1.0]))
        assert rkhs_norm_sq(exp, np.array([[2.0]])) == 2.0

    def test_identity_gram(self):
        exp = KernelExpansion("A", LIN, np.array([[0], [1]]), np.array([1.0, -1.0]))
        assert rkhs_norm_sq(exp, np.eye(2)) == 2.0

    def test_dimension_mismatch(self):
        exp = KernelExpansion("A", LIN, np.array([[0]]), np.array([1.0]))
        with pytest.raises(DimensionMismatch):
            rkhs_norm_sq(exp, np.eye(2))


class TestModelIo:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        expansions = {
            "A": KernelExpansion("A", KernelSpec("rbf", gamma=0.7),
                                 np.array([[0], [2]]), rng.standard_normal(2)),
            "B": KernelExpansion("B", POLY, np.array([[0, 1], [1, 2]]),
                                 rng.standard_normal(2)),
        }
        save_model(tmp_path / "model.json", expansions)
        loaded = load_model(tmp_path / "model.json")
        assert set(loaded) == {"A", "B"}
        for name in expansions:
            assert loaded[name].kernel == expansions[name].kernel
            assert np.array_equal(loaded[name].support, expansions[name].support)
            assert np.array_equal(loaded[name].weights, expansions[name].weights)

    def test_reject_foreign_file(self, tmp_path):
        (tmp_path / "x.json").write_text("{}")
        with pytest.raises(KernelError):
            load_model(tmp_path / "x.json")
