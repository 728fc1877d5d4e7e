"""Laplace-mechanism release of the two-way marginal tables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nbmodel import ModelShape, TrueMarginals
from .statdist import RandomLike, as_generator, laplace_log_density
from .validation import ConfigurationError, check_positive, frozen

# L1 change of one histogram when a single record changes (N held fixed)
HISTOGRAM_SENSITIVITY = 2.0


def laplace_scale(epsilon: float, sensitivity: float = HISTOGRAM_SENSITIVITY) -> float:
    epsilon = check_positive(epsilon, "epsilon")
    return sensitivity / epsilon


@dataclass(frozen=True)
class PrivacySpec:
    epsilon_per_query: float
    sensitivity: float = HISTOGRAM_SENSITIVITY

    def __post_init__(self):
        check_positive(self.epsilon_per_query, "epsilon_per_query")
        check_positive(self.sensitivity, "sensitivity")

    @property
    def scale(self) -> float:
        return self.sensitivity / self.epsilon_per_query


@dataclass(frozen=True)
class NoisyMarginals:
    """Released tables ``m[k][i, j] = n[k][i, j] + Laplace(0, b)``.

    Values are raw reals. The total ``N`` is public and travels in ``shape``.
    """

    values: tuple
    spec: PrivacySpec
    shape: ModelShape

    def __post_init__(self):
        values = tuple(frozen(t) for t in self.values)
        if [t.shape for t in values] != self.shape.table_shapes():
            raise ConfigurationError("noisy tables do not match the model shape")
        object.__setattr__(self, "values", values)

    @property
    def scale(self) -> float:
        return self.spec.scale

    @property
    def total_epsilon(self) -> float:
        return self.shape.num_features * self.spec.epsilon_per_query


def privatize(true_marginals: TrueMarginals, epsilon: float, rng: RandomLike) -> NoisyMarginals:
    """Add independent Laplace(0, 2/epsilon) noise to every cell of every table."""
    spec = PrivacySpec(float(epsilon))
    gen = as_generator(rng)
    values = tuple(t + gen.laplace(0.0, spec.scale, size=t.shape) for t in true_marginals.counts)
    return NoisyMarginals(values, spec, true_marginals.shape)


def release_log_density(probe, tables, epsilon: float) -> float:
    """Log density of observing ``probe`` when the true tables are ``tables``."""
    b = laplace_scale(epsilon)
    return float(sum(laplace_log_density(np.asarray(z, float), np.asarray(t, float), b).sum()
                     for z, t in zip(probe, tables)))


def dp_log_ratio_bound(t1: TrueMarginals, t2: TrueMarginals, epsilon: float, probe) -> float:
    """``log P(probe | t1) - log P(probe | t2)`` under the Laplace mechanism.

    ``probe`` is a sequence of real tables (or a :class:`NoisyMarginals`).
    For neighbouring datasets its magnitude is at most ``K * epsilon``.
    """
    if t1.shape.table_shapes() != t2.shape.table_shapes():
        raise ValueError("datasets have different shapes")
    tables = probe.values if isinstance(probe, NoisyMarginals) else probe
    if [np.shape(z) for z in tables] != t1.shape.table_shapes():
        raise ValueError("probe does not match the table shapes")
    b = laplace_scale(epsilon)
    # the log(2b) normalisers cancel
    total = 0.0
    for z, a, c in zip(tables, t1.counts, t2.counts):
        z = np.asarray(z, float)
        total += float(np.sum(np.abs(z - c) - np.abs(z - a))) / b
    return total
