"""Naive Bayes (class-conditional independence) data model.

Feature ``k`` is summarised by an ``I x J_k`` table of counts
``n[k][i, j] = #(Y = i, X_k = j)``. All tables share the class margin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .statdist import DirichletParams, RandomLike, as_generator
from .validation import ConfigurationError, check_row_simplices, check_simplex, frozen


@dataclass(frozen=True)
class ModelShape:
    num_classes: int
    levels: tuple
    n_total: int

    def __post_init__(self):
        levels = tuple(int(j) for j in self.levels)
        object.__setattr__(self, "levels", levels)
        if int(self.num_classes) < 2:
            raise ConfigurationError("need at least 2 classes")
        if len(levels) < 1:
            raise ConfigurationError("need at least 1 feature")
        if any(j < 2 for j in levels):
            raise ConfigurationError("every feature needs at least 2 levels")
        if int(self.n_total) < 0:
            raise ConfigurationError("total count must be nonnegative")
        object.__setattr__(self, "num_classes", int(self.num_classes))
        object.__setattr__(self, "n_total", int(self.n_total))

    @classmethod
    def uniform(cls, num_classes: int, num_features: int, levels: int, n_total: int) -> "ModelShape":
        return cls(num_classes, (levels,) * num_features, n_total)

    @property
    def num_features(self) -> int:
        return len(self.levels)

    def with_total(self, n_total: int) -> "ModelShape":
        return ModelShape(self.num_classes, self.levels, n_total)

    def table_shapes(self):
        return [(self.num_classes, j) for j in self.levels]


@dataclass(frozen=True)
class ModelParams:
    """Class probabilities ``p_i`` and per-feature conditionals ``p[k][i, j]``."""

    class_probs: np.ndarray
    cond_probs: tuple

    def __post_init__(self):
        class_probs = frozen(check_simplex(self.class_probs, "class_probs"))
        cond = tuple(frozen(check_row_simplices(t, "cond_probs")) for t in self.cond_probs)
        for t in cond:
            if t.shape[0] != class_probs.size:
                raise ConfigurationError("conditional tables must have one row per class")
        object.__setattr__(self, "class_probs", class_probs)
        object.__setattr__(self, "cond_probs", cond)

    @property
    def levels(self) -> tuple:
        return tuple(t.shape[1] for t in self.cond_probs)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.class_probs] + [t.ravel() for t in self.cond_probs])


@dataclass(frozen=True)
class TrueMarginals:
    """Exact two-way tables. Construction does not enforce consistency;
    use :func:`check_consistency`."""

    counts: tuple
    class_counts: np.ndarray
    shape: ModelShape

    def __post_init__(self):
        counts = tuple(frozen(t, dtype=np.int64) for t in self.counts)
        class_counts = frozen(self.class_counts, dtype=np.int64)
        if [t.shape for t in counts] != self.shape.table_shapes():
            raise ConfigurationError("count tables do not match the model shape")
        if class_counts.shape != (self.shape.num_classes,):
            raise ConfigurationError("class_counts must have one entry per class")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_counts", class_counts)


def default_prior(shape: ModelShape, alpha: float = 1.0):
    """Symmetric Dirichlet blocks: one for the classes, one per (class, feature)."""
    class_prior = DirichletParams(np.full(shape.num_classes, alpha))
    cond_prior = [[DirichletParams(np.full(j, alpha)) for _ in range(shape.num_classes)]
                  for j in shape.levels]
    return class_prior, cond_prior


def sample_model_params(shape: ModelShape, rng: RandomLike,
                        class_prior: Optional[DirichletParams] = None,
                        cond_prior: Optional[Sequence[Sequence[DirichletParams]]] = None) -> ModelParams:
    """Draw ``p`` and every ``p[k][i, :]`` from their Dirichlet generators.

    ``cond_prior[k][i]`` is the concentration for class ``i`` of feature ``k``;
    both priors default to all-ones.
    """
    default_class, default_cond = default_prior(shape)
    class_prior = class_prior or default_class
    cond_prior = cond_prior or default_cond
    if class_prior.alpha.size != shape.num_classes:
        raise ConfigurationError("class prior length does not match num_classes")
    if len(cond_prior) != shape.num_features:
        raise ConfigurationError("need one conditional prior block per feature")
    gen = as_generator(rng)
    class_probs = _dirichlet(gen, class_prior.alpha)
    tables = []
    for k, j in enumerate(shape.levels):
        block = cond_prior[k]
        if len(block) != shape.num_classes or any(d.alpha.size != j for d in block):
            raise ConfigurationError(f"conditional prior for feature {k} does not match shape")
        tables.append(np.vstack([_dirichlet(gen, d.alpha) for d in block]))
    return ModelParams(class_probs, tuple(tables))


def _dirichlet(gen: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    draw = gen.dirichlet(alpha)
    return draw / draw.sum()


def sample_counts(params: ModelParams, shape: ModelShape, rng: RandomLike) -> TrueMarginals:
    """One multinomial draw of the class counts, then per-(class, feature) tables."""
    if params.class_probs.size != shape.num_classes or params.levels != shape.levels:
        raise ConfigurationError("parameters do not match the model shape")
    gen = as_generator(rng)
    class_counts = gen.multinomial(shape.n_total, params.class_probs)
    tables = []
    for cond in params.cond_probs:
        tables.append(np.vstack([gen.multinomial(int(n_i), row)
                                 for n_i, row in zip(class_counts, cond)]))
    return TrueMarginals(tuple(tables), class_counts, shape)


def check_consistency(m: TrueMarginals) -> bool:
    """True iff every table's row sums equal the class counts and those sum to N."""
    if np.any(m.class_counts < 0) or int(m.class_counts.sum()) != m.shape.n_total:
        return False
    for table in m.counts:
        if np.any(table < 0) or not np.array_equal(table.sum(axis=1), m.class_counts):
            return False
    return True
