import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dpvb.dpmech import NoisyMarginals, PrivacySpec
from dpvb.estimators import (
    BayesEstimator,
    NaiveEstimator,
    VariationalBayesEstimator,
    bayes_estimate,
    make_estimator,
    naive_estimate,
    squared_error,
    vb_estimate,
)
from dpvb.nbmodel import ModelParams, ModelShape, TrueMarginals, sample_counts, sample_model_params
from dpvb.statdist import RngStream
from dpvb.vbengine import FitConfig, PriorSpec


def _noisy(values, n_total, eps=1.0):
    values = tuple(np.asarray(v, float) for v in values)
    shape = ModelShape(values[0].shape[0], tuple(v.shape[1] for v in values), n_total)
    return NoisyMarginals(values, PrivacySpec(eps), shape)


class TestNaive:
    def test_hand_example(self):
        est = naive_estimate(_noisy([[[-3, 12], [6, 4]]], 20)).point
        np.testing.assert_allclose(est.cond_probs[0], [[0, 1], [0.6, 0.4]])
        np.testing.assert_allclose(est.class_probs, [12 / 22, 10 / 22])

    def test_clamps_above_n(self):
        est = naive_estimate(_noisy([[[30, 10], [0, 0]]], 20)).point
        np.testing.assert_allclose(est.cond_probs[0], [[2 / 3, 1 / 3], [0.5, 0.5]])
        np.testing.assert_allclose(est.class_probs, [1, 0])

    def test_all_nonpositive_is_uniform(self):
        est = naive_estimate(_noisy([[[-1, -2, 0], [-5, 0, -0.1]], [[-1, -1], [-3, 0]]], 10)).point
        np.testing.assert_allclose(est.class_probs, 0.5)
        np.testing.assert_allclose(est.cond_probs[0], 1 / 3)
        np.testing.assert_allclose(est.cond_probs[1], 0.5)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32), st.integers(1, 400))
    def test_noiseless_input_gives_frequencies(self, seed, n):
        shape = ModelShape(3, (2, 4), n)
        root = RngStream(seed)
        truth = sample_counts(sample_model_params(shape, root.child(0)), shape, root.child(1))
        noisy = NoisyMarginals(tuple(t.astype(float) for t in truth.counts), PrivacySpec(1.0), shape)
        est = naive_estimate(noisy).point
        np.testing.assert_allclose(est.class_probs, truth.class_counts / n, atol=1e-12)
        for table, probs in zip(truth.counts, est.cond_probs):
            rows = table.sum(axis=1, keepdims=True)
            expected = np.where(rows > 0, table / np.maximum(rows, 1), 1 / table.shape[1])
            np.testing.assert_allclose(probs, expected, atol=1e-12)

    def test_conjugate_variant(self):
        est = naive_estimate(_noisy([[[-3, 12], [6, 4]]], 20), conjugate=True)
        np.testing.assert_allclose(est.cond_posterior[0], [[1, 13], [7, 5]])
        np.testing.assert_allclose(est.point.cond_probs[0][0], [1 / 14, 13 / 14])
        assert est.meta["conjugate"]


class TestBayes:
    def test_conjugate_example(self):
        shape = ModelShape(2, (2,), 20)
        truth = TrueMarginals((np.array([[3, 7], [4, 6]]),), np.array([10, 10]), shape)
        est = bayes_estimate(truth, PriorSpec.uniform(shape))
        np.testing.assert_allclose(est.cond_posterior[0][0], [4, 8])
        np.testing.assert_allclose(est.point.cond_probs[0][0], [1 / 3, 2 / 3])
        np.testing.assert_allclose(est.class_posterior, [11, 11])

    def test_empty_data_returns_prior(self):
        shape = ModelShape(2, (3,), 0)
        truth = TrueMarginals((np.zeros((2, 3), int),), np.zeros(2, int), shape)
        priors = PriorSpec(np.array([2.0, 5.0]), (np.full((2, 3), 0.5),))
        est = bayes_estimate(truth, priors)
        np.testing.assert_allclose(est.class_posterior, [2, 5])
        np.testing.assert_allclose(est.cond_posterior[0], 0.5)

    def test_inconsistent_input(self):
        shape = ModelShape(2, (2,), 10)
        bad = TrueMarginals((np.array([[3, 3], [2, 1]]),), np.array([5, 5]), shape)
        with pytest.raises(ValueError):
            bayes_estimate(bad)

    def test_consistent_at_large_n(self):
        shape = ModelShape.uniform(2, 5, 2, 100_000)
        root = RngStream(14)
        params = sample_model_params(shape, root.child(0))
        truth = sample_counts(params, shape, root.child(1))
        assert squared_error(bayes_estimate(truth).point, params) < 0.01


class TestSquaredError:
    def test_value_and_shape_check(self):
        a = ModelParams(np.array([0.5, 0.5]), (np.array([[0.5, 0.5], [1.0, 0.0]]),))
        b = ModelParams(np.array([1.0, 0.0]), (np.array([[0.0, 1.0], [1.0, 0.0]]),))
        assert squared_error(a, b) == pytest.approx(0.5 + 0.5)
        assert squared_error(a, a) == 0.0
        c = ModelParams(np.array([0.5, 0.5]), (np.full((2, 3), 1 / 3),))
        with pytest.raises(ValueError):
            squared_error(a, c)


class TestVB:
    def test_estimate_fields(self, small_shape, make_problem):
        _, _, noisy = make_problem(small_shape, 0.5)
        est = vb_estimate(noisy, PriorSpec.uniform(small_shape), FitConfig(tol=1e-7))
        assert est.method == "vb" and est.meta["converged"]
        np.testing.assert_allclose(est.point.class_probs, est.class_posterior / est.class_posterior.sum())
        assert est.meta["iterations"] == len(est.meta["bound_trace"]) - 1


class TestSklearnWrappers:
    def test_params_round_trip_and_clone(self):
        est = VariationalBayesEstimator(tol=1e-5, alpha=2.0)
        assert est.get_params()["tol"] == 1e-5
        twin = clone(est)
        assert twin.get_params() == est.get_params() and twin is not est
        est.set_params(max_iter=7)
        assert est.max_iter == 7

    def test_fit_and_score(self, small_shape, make_problem):
        params, truth, noisy = make_problem(small_shape, 0.5)
        naive = NaiveEstimator().fit(noisy)
        vb = VariationalBayesEstimator().fit(noisy)
        bayes = BayesEstimator().fit(truth)
        for est in (naive, vb, bayes):
            assert est.score(params) == pytest.approx(-squared_error(est.estimate_.point, params))
        np.testing.assert_allclose(vb.class_probs_, vb.gamma_class_ / vb.gamma_class_.sum())
        assert vb.converged_ and vb.n_iter_ >= 1

    def test_unfitted_score(self, small_shape, make_problem):
        params, _, _ = make_problem(small_shape, 0.5)
        with pytest.raises(NotFittedError):
            NaiveEstimator().score(params)

    def test_private_estimators_reject_true_tables(self, small_shape, make_problem):
        _, truth, noisy = make_problem(small_shape, 0.5)
        with pytest.raises(TypeError):
            NaiveEstimator().fit(truth)
        with pytest.raises(TypeError):
            VariationalBayesEstimator().fit(truth)
        with pytest.raises(TypeError):
            BayesEstimator().fit(noisy)

    def test_make_estimator(self):
        assert isinstance(make_estimator("vb", tol=1e-3), VariationalBayesEstimator)
        assert isinstance(make_estimator("naive"), NaiveEstimator)
        with pytest.raises(ValueError):
            make_estimator("mcmc")
