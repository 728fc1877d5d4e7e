"""Mean-field variational Bayes for naive Bayes parameters given noisy margins.

The true tables are treated as missing data with multinomial variational
factors ``q(n_i) = Mult(N, theta_class)`` and
``q(n[k][i, :] | n_i) = Mult(n_i, theta_cond[k][i, :])``. The Laplace noise
enters through its Gaussian scale-mixture form, giving an inverse-Gaussian
factor per cell with mean ``beta_mean``; ``q(p)`` factors are Dirichlet.

Coordinate ascent alternates closed-form updates for ``q(beta)`` and
``q(p)`` with interior-point solves for the theta blocks. Progress is
tracked with a collapsed bound in which each cell's mixing variable is
profiled out, leaving ``-sqrt(E[(m - n)^2]) / b``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .dpmech import NoisyMarginals
from .nbmodel import ModelShape
from .simplexopt import LineSearchConfig, SimplexObjective, SimplexResult, maximize
from .statdist import DirichletParams, digamma, dirichlet_entropy, dirichlet_expected_log
from .validation import ConfigurationError, check_positive

SQ_DEV_FLOOR = 1e-12
LOG_THETA_FLOOR = 1e-10
INIT_PULL = 1e-6


@dataclass(frozen=True)
class PriorSpec:
    """Dirichlet prior concentrations: ``alpha_class`` (I,) and ``alpha_cond[k]`` (I, J_k)."""

    alpha_class: np.ndarray
    alpha_cond: tuple

    def __post_init__(self):
        alpha_class = DirichletParams(self.alpha_class).alpha
        cond = []
        for table in self.alpha_cond:
            table = np.array(table, dtype=float)
            if table.ndim != 2 or table.shape[0] != alpha_class.size:
                raise ConfigurationError("each conditional prior must be an (I, J_k) array")
            for row in table:
                DirichletParams(row)
            table.setflags(write=False)
            cond.append(table)
        object.__setattr__(self, "alpha_class", alpha_class)
        object.__setattr__(self, "alpha_cond", tuple(cond))

    @classmethod
    def uniform(cls, shape: ModelShape, alpha: float = 1.0) -> "PriorSpec":
        return cls(np.full(shape.num_classes, float(alpha)),
                   tuple(np.full((shape.num_classes, j), float(alpha)) for j in shape.levels))

    def check_shape(self, shape: ModelShape) -> None:
        if (self.alpha_class.size != shape.num_classes
                or [t.shape for t in self.alpha_cond] != shape.table_shapes()):
            raise ConfigurationError("prior dimensions do not match the model shape")


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-6
    max_iter: int = 500
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)
    init_mode: str = "from-naive"
    solver_tol: float = 1e-8
    solver_max_iter: int = 200

    def __post_init__(self):
        check_positive(self.tol, "tol")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        if self.init_mode not in ("from-naive", "uniform"):
            raise ValueError("init_mode must be 'from-naive' or 'uniform'")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class VariationalState:
    theta_class: np.ndarray
    theta_cond: tuple
    gamma_class: np.ndarray
    gamma_cond: tuple
    beta_mean: tuple
    bound: float = -math.inf
    iteration: int = 0

    @property
    def class_mean(self) -> np.ndarray:
        return self.gamma_class / self.gamma_class.sum()

    @property
    def cond_mean(self) -> tuple:
        return tuple(g / g.sum(axis=1, keepdims=True) for g in self.gamma_cond)


@dataclass
class FitResult:
    state: VariationalState
    converged: bool
    trace: list

    def __iter__(self):
        return iter((self.state, self.converged, self.trace))


def expected_sq_deviation(theta_i, theta_ij, m, n_total):
    """``E[(m - n)^2]`` for ``n`` with ``n_i ~ Bin(N, theta_i)``, ``n | n_i ~ Bin(n_i, theta_ij)``.

    Equals ``N(N-1) x^2 + N x + m^2 - 2 m N x`` with ``x = theta_i theta_ij``,
    evaluated as variance plus squared bias so it is never negative.
    """
    x = np.asarray(theta_i, float) * np.asarray(theta_ij, float)
    mean = n_total * x
    value = (mean - m) ** 2 + n_total * x * (1.0 - x)
    return value if np.ndim(value) else float(value)


def quadratic_minorizer(m, n, alpha, b):
    """Quadratic lower bound on ``-|m - n| / b``; tight iff ``alpha == |m - n|``."""
    if not (np.all(np.asarray(alpha) > 0) and b > 0):
        raise ValueError("alpha and b must be positive")
    return -0.5 * ((m - n) ** 2 / (b * alpha) + alpha / b)


def _sq_devs(state: VariationalState, noisy: NoisyMarginals):
    N = noisy.shape.n_total
    tc = state.theta_class[:, None]
    return [expected_sq_deviation(tc, t, m, N) for t, m in zip(state.theta_cond, noisy.values)]


def update_q_beta(state: VariationalState, noisy: NoisyMarginals) -> tuple:
    """Inverse-Gaussian means ``b / sqrt(E[(m - n)^2])`` for every cell."""
    b = noisy.scale
    return tuple(b / np.sqrt(np.maximum(s, SQ_DEV_FLOOR)) for s in _sq_devs(state, noisy))


def update_q_p_cond(state: VariationalState, priors: PriorSpec, n_total: int) -> tuple:
    tc = state.theta_class[:, None]
    return tuple(n_total * tc * t + a for t, a in zip(state.theta_cond, priors.alpha_cond))


def update_q_p_class(state: VariationalState, priors: PriorSpec, n_total: int) -> np.ndarray:
    return n_total * state.theta_class + priors.alpha_class


def expected_log_cond(gamma_cond) -> tuple:
    """``E[log p[k][i, j]]`` for every table, with one batched digamma call."""
    gamma_cond = [np.asarray(g, float) for g in gamma_cond]
    flat = np.concatenate([g.ravel() for g in gamma_cond])
    sums = np.concatenate([np.repeat(g.sum(axis=1), g.shape[1]) for g in gamma_cond])
    psi = digamma(np.concatenate([flat, sums]))
    elog = psi[:flat.size] - psi[flat.size:]
    out, pos = [], 0
    for g in gamma_cond:
        out.append(elog[pos:pos + g.size].reshape(g.shape))
        pos += g.size
    return tuple(out)


def theta_cond_objective(state: VariationalState, noisy: NoisyMarginals, i: int, k: int,
                         elog_cond: Optional[tuple] = None) -> SimplexObjective:
    N = noisy.shape.n_total
    b2 = noisy.scale ** 2
    th = state.theta_class[i]
    beta = state.beta_mean[k][i]
    m = noisy.values[k][i]
    if elog_cond is None:
        elog = dirichlet_expected_log(state.gamma_cond[k][i])
    else:
        elog = elog_cond[k][i]
    A = -N * (N - 1) * th ** 2 * beta / (2.0 * b2)
    B = -N * th * beta / (2.0 * b2) + N * m * th * beta / b2 + N * th * elog
    C = np.full(m.size, -N * th)
    return SimplexObjective(A, B, C)


def theta_class_objective(state: VariationalState, noisy: NoisyMarginals,
                          elog_cond: Optional[tuple] = None) -> SimplexObjective:
    N = noisy.shape.n_total
    b2 = noisy.scale ** 2
    I = state.theta_class.size
    D = np.zeros(I)
    E = N * dirichlet_expected_log(state.gamma_class)
    if elog_cond is None:
        elog_cond = expected_log_cond(state.gamma_cond)
    for t, beta, m, elog in zip(state.theta_cond, state.beta_mean, noisy.values, elog_cond):
        D -= np.sum(N * (N - 1) * t ** 2 * beta, axis=1) / (2.0 * b2)
        log_t = np.log(np.maximum(t, LOG_THETA_FLOOR))
        E += np.sum(N * t * (-beta / (2.0 * b2) + m * beta / b2 + elog - log_t), axis=1)
    return SimplexObjective(D, E, np.full(I, -float(N)))


def theta_cond_step(state: VariationalState, noisy: NoisyMarginals, i: int, k: int,
                    config: Optional[FitConfig] = None, elog_cond: Optional[tuple] = None) -> SimplexResult:
    cfg = config or FitConfig()
    obj = theta_cond_objective(state, noisy, i, k, elog_cond)
    return maximize(obj, state.theta_cond[k][i], cfg.line_search, cfg.solver_tol, cfg.solver_max_iter)


def theta_class_step(state: VariationalState, noisy: NoisyMarginals,
                     config: Optional[FitConfig] = None, elog_cond: Optional[tuple] = None) -> SimplexResult:
    cfg = config or FitConfig()
    obj = theta_class_objective(state, noisy, elog_cond)
    return maximize(obj, state.theta_class, cfg.line_search, cfg.solver_tol, cfg.solver_max_iter)


def _xlogx(t):
    return t * np.log(np.maximum(t, LOG_THETA_FLOOR))


def monitored_bound(state: VariationalState, noisy: NoisyMarginals, priors: PriorSpec,
                    elog_cond: Optional[tuple] = None) -> float:
    """Collapsed lower bound (up to constants of the priors)."""
    N = noisy.shape.n_total
    b = noisy.scale
    tc = state.theta_class
    if elog_cond is None:
        elog_cond = expected_log_cond(state.gamma_cond)
    total = 0.0
    for s in _sq_devs(state, noisy):
        total -= float(np.sum(np.sqrt(np.maximum(s, SQ_DEV_FLOOR)))) / b
    for t, g, a, elog in zip(state.theta_cond, state.gamma_cond, priors.alpha_cond, elog_cond):
        weight = N * tc[:, None] * t
        total += float(np.sum((weight + a - 1.0) * elog))
        total -= float(np.sum(N * tc[:, None] * _xlogx(t)))
        total += float(np.sum(dirichlet_entropy(g)))
    total += float(np.sum((N * tc + priors.alpha_class - 1.0) * dirichlet_expected_log(state.gamma_class)))
    total -= float(np.sum(N * _xlogx(tc)))
    total += float(dirichlet_entropy(state.gamma_class))
    return total


def _pull_inside(p: np.ndarray) -> np.ndarray:
    return (1.0 - INIT_PULL) * p + INIT_PULL / p.shape[-1]


def initialize(noisy: NoisyMarginals, priors: PriorSpec, mode: str = "from-naive") -> VariationalState:
    shape = noisy.shape
    if mode == "from-naive":
        from .estimators import naive_estimate

        point = naive_estimate(noisy).point
        theta_class = _pull_inside(point.class_probs)
        theta_cond = tuple(_pull_inside(t) for t in point.cond_probs)
    elif mode == "uniform":
        theta_class = np.full(shape.num_classes, 1.0 / shape.num_classes)
        theta_cond = tuple(np.full((shape.num_classes, j), 1.0 / j) for j in shape.levels)
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    state = VariationalState(theta_class, theta_cond, priors.alpha_class.copy(),
                             tuple(a.copy() for a in priors.alpha_cond), ())
    state = replace(state, beta_mean=update_q_beta(state, noisy))
    return replace(state, bound=monitored_bound(state, noisy, priors))


def fit(noisy: NoisyMarginals, priors: Optional[PriorSpec] = None,
        config: Optional[FitConfig] = None) -> FitResult:
    """Coordinate ascent until the relative bound increase drops below ``config.tol``.

    One sweep: q(beta), q(p) for the conditionals then the class, the theta
    row of every (class, feature), a q(beta) refresh, then theta_class.
    """
    cfg = config or FitConfig()
    shape = noisy.shape
    priors = priors or PriorSpec.uniform(shape)
    priors.check_shape(shape)
    N = shape.n_total
    state = initialize(noisy, priors, cfg.init_mode)
    trace = [state.bound]
    converged = False
    for it in range(1, cfg.max_iter + 1):
        state = replace(state, beta_mean=update_q_beta(state, noisy))
        state = replace(state, gamma_cond=update_q_p_cond(state, priors, N))
        state = replace(state, gamma_class=update_q_p_class(state, priors, N))
        elog_cond = expected_log_cond(state.gamma_cond)
        rows = [t.copy() for t in state.theta_cond]
        for k in range(shape.num_features):
            for i in range(shape.num_classes):
                rows[k][i] = theta_cond_step(state, noisy, i, k, cfg, elog_cond).theta
        state = replace(state, theta_cond=tuple(rows))
        # theta_class must be minorised at the current theta_cond
        state = replace(state, beta_mean=update_q_beta(state, noisy))
        state = replace(state, theta_class=theta_class_step(state, noisy, cfg, elog_cond).theta)
        bound = monitored_bound(state, noisy, priors, elog_cond)
        state = replace(state, bound=bound, iteration=it)
        previous = trace[-1]
        trace.append(bound)
        if abs(bound - previous) / (1.0 + abs(previous)) < cfg.tol:
            converged = True
            break
    return FitResult(state, converged, trace)
