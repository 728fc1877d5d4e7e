"""Naive, variational and non-private Bayes estimators with a common output type.

Besides the functions there are scikit-learn style wrappers
(:class:`NaiveEstimator`, :class:`VariationalBayesEstimator`,
:class:`BayesEstimator`) so the estimators can be configured through
``get_params``/``set_params`` and cloned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dpmech import NoisyMarginals
from .nbmodel import ModelParams, TrueMarginals, check_consistency
from .simplexopt import LineSearchConfig
from .vbengine import FitConfig, PriorSpec, fit

METHODS = ("naive", "vb", "bayes")


@dataclass(frozen=True)
class PosteriorEstimate:
    """Posterior (or point) summary of one estimator.

    ``class_posterior``/``cond_posterior`` hold Dirichlet concentrations for
    ``vb`` and ``bayes``; for the plain ``naive`` estimate they are ``None``.
    """

    method: str
    point: ModelParams
    class_posterior: Optional[np.ndarray] = None
    cond_posterior: Optional[tuple] = None
    meta: dict = field(default_factory=dict)


def _clamped(noisy: NoisyMarginals):
    N = noisy.shape.n_total
    return [np.clip(t, 0.0, N) for t in noisy.values]


def _rows_to_probs(table: np.ndarray) -> np.ndarray:
    totals = table.sum(axis=1, keepdims=True)
    uniform = np.full_like(table, 1.0 / table.shape[1])
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, table / safe, uniform)


def naive_estimate(noisy: NoisyMarginals, conjugate: bool = False,
                   priors: Optional[PriorSpec] = None) -> PosteriorEstimate:
    """Treat the released counts as if they were the true counts.

    Each cell is clamped to ``[0, N]`` and each row renormalised; the class
    estimate pools row totals over all features so a single class vector
    serves every table. With ``conjugate=True`` the clamped counts instead
    feed a Dirichlet update with ``priors`` and the point is its mean.
    """
    clamped = _clamped(noisy)
    row_totals = np.sum([t.sum(axis=1) for t in clamped], axis=0)
    if conjugate:
        priors = priors or PriorSpec.uniform(noisy.shape)
        cond_post = tuple(t + a for t, a in zip(clamped, priors.alpha_cond))
        class_post = row_totals / noisy.shape.num_features + priors.alpha_class
        point = ModelParams(class_post / class_post.sum(),
                            tuple(g / g.sum(axis=1, keepdims=True) for g in cond_post))
        return PosteriorEstimate("naive", point, class_post, cond_post, {"conjugate": True})
    denom = row_totals.sum()
    if denom > 0:
        class_probs = row_totals / denom
    else:
        class_probs = np.full(noisy.shape.num_classes, 1.0 / noisy.shape.num_classes)
    point = ModelParams(class_probs, tuple(_rows_to_probs(t) for t in clamped))
    return PosteriorEstimate("naive", point, meta={"conjugate": False})


def bayes_estimate(truth: TrueMarginals, priors: Optional[PriorSpec] = None) -> PosteriorEstimate:
    """Conjugate Dirichlet posteriors from the exact (non-private) tables."""
    if not check_consistency(truth):
        raise ValueError("true marginals are inconsistent")
    priors = priors or PriorSpec.uniform(truth.shape)
    priors.check_shape(truth.shape)
    class_post = truth.class_counts + priors.alpha_class
    cond_post = tuple(t + a for t, a in zip(truth.counts, priors.alpha_cond))
    point = ModelParams(class_post / class_post.sum(),
                        tuple(g / g.sum(axis=1, keepdims=True) for g in cond_post))
    return PosteriorEstimate("bayes", point, class_post, cond_post)


def vb_estimate(noisy: NoisyMarginals, priors: Optional[PriorSpec] = None,
                config: Optional[FitConfig] = None) -> PosteriorEstimate:
    result = fit(noisy, priors, config)
    state = result.state
    point = ModelParams(state.class_mean, state.cond_mean)
    meta = {"iterations": state.iteration, "converged": result.converged,
            "bound_trace": list(result.trace), "state": state}
    return PosteriorEstimate("vb", point, state.gamma_class, state.gamma_cond, meta)


def squared_error(estimate: ModelParams, truth: ModelParams) -> float:
    """Summed squared difference over the class simplex and every conditional row."""
    if (estimate.class_probs.shape != truth.class_probs.shape
            or [t.shape for t in estimate.cond_probs] != [t.shape for t in truth.cond_probs]):
        raise ValueError("estimate and truth have different shapes")
    return float(np.sum((estimate.flat() - truth.flat()) ** 2))


class _MarginalEstimator(BaseEstimator):
    """Shared plumbing: fitted point estimates exposed as trailing-underscore attributes."""

    def _store(self, est: PosteriorEstimate):
        self.estimate_ = est
        self.class_probs_ = est.point.class_probs
        self.cond_probs_ = est.point.cond_probs
        return self

    def _priors(self, shape):
        return PriorSpec.uniform(shape, self.alpha)

    def score(self, truth: ModelParams) -> float:
        """Negative squared error against known parameters (higher is better)."""
        check_is_fitted(self, "estimate_")
        return -squared_error(self.estimate_.point, truth)


class NaiveEstimator(_MarginalEstimator):
    def __init__(self, conjugate: bool = False, alpha: float = 1.0):
        self.conjugate = conjugate
        self.alpha = alpha

    def fit(self, X: NoisyMarginals, y=None):
        _require_noisy(X)
        return self._store(naive_estimate(X, self.conjugate, self._priors(X.shape)))


class VariationalBayesEstimator(_MarginalEstimator):
    """Variational posterior over naive Bayes parameters from noisy margins.

    Fitted attributes: ``gamma_class_``/``gamma_cond_`` (Dirichlet
    concentrations), ``class_probs_``/``cond_probs_`` (posterior means),
    ``bound_trace_``, ``converged_`` and ``n_iter_``.
    """

    def __init__(self, tol: float = 1e-6, max_iter: int = 500, alpha: float = 1.0,
                 init: str = "from-naive", sigma: float = 1e-4, nu: float = 0.5,
                 solver_tol: float = 1e-8, solver_max_iter: int = 200):
        self.tol = tol
        self.max_iter = max_iter
        self.alpha = alpha
        self.init = init
        self.sigma = sigma
        self.nu = nu
        self.solver_tol = solver_tol
        self.solver_max_iter = solver_max_iter

    def fit_config(self) -> FitConfig:
        return FitConfig(tol=self.tol, max_iter=self.max_iter,
                         line_search=LineSearchConfig(sigma=self.sigma, nu=self.nu),
                         init_mode=self.init, solver_tol=self.solver_tol,
                         solver_max_iter=self.solver_max_iter)

    def fit(self, X: NoisyMarginals, y=None):
        _require_noisy(X)
        est = vb_estimate(X, self._priors(X.shape), self.fit_config())
        self.gamma_class_ = est.class_posterior
        self.gamma_cond_ = est.cond_posterior
        self.bound_trace_ = est.meta["bound_trace"]
        self.converged_ = est.meta["converged"]
        self.n_iter_ = est.meta["iterations"]
        return self._store(est)


class BayesEstimator(_MarginalEstimator):
    def __init__(self, alpha: float = 1.0):
        self.alpha = alpha

    def fit(self, X: TrueMarginals, y=None):
        if not isinstance(X, TrueMarginals):
            raise TypeError("BayesEstimator needs the exact tables (TrueMarginals)")
        est = bayes_estimate(X, self._priors(X.shape))
        self.gamma_class_ = est.class_posterior
        self.gamma_cond_ = est.cond_posterior
        return self._store(est)


def _require_noisy(X):
    # private estimators only ever see released data
    if not isinstance(X, NoisyMarginals):
        raise TypeError("private estimators accept NoisyMarginals only")


def make_estimator(method: str, **params) -> _MarginalEstimator:
    if method == "naive":
        return NaiveEstimator(**params)
    if method == "vb":
        return VariationalBayesEstimator(**params)
    if method == "bayes":
        return BayesEstimator(**params)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
