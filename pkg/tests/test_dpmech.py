import math

import numpy as np
import pytest

from dpvb.dpmech import (
    HISTOGRAM_SENSITIVITY,
    NoisyMarginals,
    PrivacySpec,
    dp_log_ratio_bound,
    laplace_scale,
    privatize,
    release_log_density,
)
from dpvb.nbmodel import ModelShape, TrueMarginals, sample_counts, sample_model_params
from dpvb.statdist import RngStream
from dpvb.validation import ConfigurationError


def _neighbours(shape, gen):
    """Two datasets differing in one record (N fixed): move one record's value."""
    params = sample_model_params(shape, gen)
    t1 = sample_counts(params, shape, gen)
    counts = [t.copy() for t in t1.counts]
    class_counts = t1.class_counts.copy()
    rows = np.flatnonzero(class_counts)
    i = int(gen.choice(rows))
    new_i = int(gen.integers(shape.num_classes))
    class_counts[i] -= 1
    class_counts[new_i] += 1
    for k, table in enumerate(counts):
        j_old = int(gen.choice(np.flatnonzero(table[i])))
        table[i, j_old] -= 1
        table[new_i, int(gen.integers(table.shape[1]))] += 1
    return t1, TrueMarginals(tuple(counts), class_counts, shape)


class TestScale:
    @pytest.mark.parametrize("eps, b", [(1.0, 2.0), (0.1, 20.0), (0.0001, 20000.0)])
    def test_scale(self, eps, b):
        assert laplace_scale(eps) == pytest.approx(b, rel=1e-15)
        assert PrivacySpec(eps).scale == pytest.approx(b, rel=1e-15)

    @pytest.mark.parametrize("eps", [0.0, -1.0, float("nan"), float("inf")])
    def test_invalid_epsilon(self, eps):
        with pytest.raises(ValueError):
            laplace_scale(eps)

    def test_sensitivity_default(self):
        assert HISTOGRAM_SENSITIVITY == 2
        assert PrivacySpec(0.5).sensitivity == 2


class TestPrivatize:
    def test_noise_moments(self):
        shape = ModelShape(2, (2,), 10)
        truth = TrueMarginals((np.array([[3, 2], [1, 4]]),), np.array([5, 5]), shape)
        gen = RngStream(7).generator()
        eps = 0.5
        b = laplace_scale(eps)
        noise = np.array([privatize(truth, eps, gen).values[0] - truth.counts[0] for _ in range(100_000)])
        n = noise.shape[0]
        assert np.all(np.abs(noise.mean(axis=0)) < 3 * math.sqrt(2) * b / math.sqrt(n))
        var_se = math.sqrt(20 * b ** 4 / n)
        assert np.all(np.abs(noise.var(axis=0) - 2 * b * b) < 3 * var_se)

    def test_deterministic_and_raw(self, small_shape, make_problem):
        _, truth, noisy = make_problem(small_shape, 0.01)
        again = privatize(truth, 0.01, RngStream(0).child("fixture", 0).child("e"))
        assert all(np.array_equal(a, b) for a, b in zip(noisy.values, again.values))
        # values are not clamped or rounded
        flat = np.concatenate([v.ravel() for v in noisy.values])
        assert np.any(flat < 0) or np.any(flat > small_shape.n_total)
        assert np.any(flat != np.round(flat))

    def test_total_epsilon(self, small_shape, make_problem):
        _, _, noisy = make_problem(small_shape, 0.3)
        assert noisy.total_epsilon == pytest.approx(small_shape.num_features * 0.3)

    def test_shape_checked(self, small_shape):
        with pytest.raises(ConfigurationError):
            NoisyMarginals((np.zeros((2, 2)),), PrivacySpec(1.0), small_shape)


class TestRatioBound:
    def test_identical_inputs(self, small_shape, make_problem):
        _, truth, noisy = make_problem(small_shape, 1.0)
        assert dp_log_ratio_bound(truth, truth, 1.0, noisy) == 0.0

    def test_single_table_grid(self):
        shape = ModelShape(2, (2,), 5)
        t1 = TrueMarginals((np.array([[2, 1], [1, 1]]),), np.array([3, 2]), shape)
        t2 = TrueMarginals((np.array([[1, 1], [2, 1]]),), np.array([2, 3]), shape)
        grid = np.linspace(-5, 8, 14)
        worst = max(abs(dp_log_ratio_bound(t1, t2, 1.0, [np.array([[a, 1.0], [c, 0.5]])]))
                    for a in grid for c in grid)
        assert worst <= 1.0 + 1e-12
        assert worst == pytest.approx(1.0)

    def test_matches_density_difference(self, small_shape, make_problem):
        _, t1, noisy = make_problem(small_shape, 0.7)
        _, t2, _ = make_problem(small_shape, 0.7, tag=1)
        direct = release_log_density(noisy.values, t1.counts, 0.7) - release_log_density(noisy.values, t2.counts, 0.7)
        assert dp_log_ratio_bound(t1, t2, 0.7, noisy) == pytest.approx(direct, abs=1e-9)

    def test_neighbouring_pairs_respect_k_epsilon(self):
        gen = RngStream(31).generator()
        for _ in range(100):
            shape = ModelShape(int(gen.integers(2, 4)), tuple(gen.integers(2, 4, size=gen.integers(1, 5))), 40)
            eps = float(10 ** gen.uniform(-3, 1))
            t1, t2 = _neighbours(shape, gen)
            bound = shape.num_features * eps
            for _ in range(100):
                probe = [t + gen.laplace(0, 3 * laplace_scale(eps), size=t.shape) for t in t1.counts]
                assert abs(dp_log_ratio_bound(t1, t2, eps, probe)) <= bound + 1e-12

    def test_shape_mismatch(self, small_shape, make_problem):
        _, t1, _ = make_problem(small_shape, 1.0)
        with pytest.raises(ValueError):
            dp_log_ratio_bound(t1, t1, 1.0, [np.zeros((2, 2))])
