"""First-order interior-point ascent on the probability simplex.

Maximises separable objectives

    f(theta) = sum_i A_i theta_i**2 + B_i theta_i + C_i theta_i log theta_i

with ``A_i <= 0`` and ``C_i <= 0`` over ``{theta > 0, sum theta = 1}``. The
search direction is ``d = diag(theta) (grad f - <theta, grad f>)``; it sums to
zero, so every step stays on the affine hull, and the step length is capped
so every coordinate stays positive. The first trial step is
``min(1, 0.99 s_max, s_newton)``, where ``s_newton`` maximises the local
quadratic model along ``d``. Armijo backtracking from there makes the
sequence of objective values nondecreasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_simplex

try:
    from numba import njit
except ImportError:  # pragma: no cover - plain-Python fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

THETA_FLOOR = 1e-12


@dataclass(frozen=True)
class SimplexObjective:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        a, b, c = (np.array(v, dtype=float) for v in (self.A, self.B, self.C))
        if not (a.ndim == b.ndim == c.ndim == 1) or not (a.size == b.size == c.size):
            raise ValueError("A, B and C must be vectors of equal length")
        if a.size < 2:
            raise ValueError("the simplex needs dimension >= 2")
        if np.any(a > 0) or np.any(c > 0):
            raise ValueError("A and C must be nonpositive")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "C", c)

    @property
    def dim(self) -> int:
        return self.A.size


@dataclass(frozen=True)
class LineSearchConfig:
    sigma: float = 1e-4
    nu: float = 0.5
    max_backtracks: int = 50
    boundary_fraction: float = 0.99

    def __post_init__(self):
        for name in ("sigma", "nu", "boundary_fraction"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")


@dataclass
class SimplexResult:
    theta: np.ndarray
    trace: list = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0

    @property
    def value(self) -> float:
        return self.trace[-1]


def _interior(obj: SimplexObjective, theta) -> np.ndarray:
    theta = check_simplex(theta, "theta", interior=True)
    if theta.size != obj.dim:
        raise ValueError("theta has the wrong dimension")
    return theta


def _value(obj, theta):
    return float(np.sum(theta * (obj.A * theta + obj.B + obj.C * np.log(theta))))


def _gradient(obj, theta):
    return 2.0 * obj.A * theta + obj.B + obj.C * (1.0 + np.log(theta))


def _increase(obj, theta, step):
    """``f(theta + step) - f(theta)`` without cancelling two nearly equal values."""
    new = theta + step
    xlogx = step * np.log(theta) + new * np.log1p(step / theta)
    return float(np.sum(obj.A * step * (new + theta) + obj.B * step + obj.C * xlogx))


def objective_value(obj: SimplexObjective, theta) -> float:
    return _value(obj, _interior(obj, theta))


def objective_gradient(obj: SimplexObjective, theta) -> np.ndarray:
    return _gradient(obj, _interior(obj, theta))


def _direction(theta, grad):
    # weighted mean over sum(theta) keeps sum(d) == 0 even after rounding drift
    return theta * (grad - (theta @ grad) / theta.sum())


def search_direction(obj: SimplexObjective, theta) -> np.ndarray:
    theta = _interior(obj, theta)
    return _direction(theta, _gradient(obj, theta))


def max_step(theta, d) -> float:
    """Largest step keeping ``theta + s d`` strictly positive (inf if none binds)."""
    ratio = d / theta
    lowest = ratio.min()
    return -1.0 / lowest if lowest < 0 else math.inf


@njit(cache=True)
def _ascent(A, B, C, theta, sigma, nu, max_backtracks, boundary_fraction, tol, max_iter):
    n = theta.size
    trace = np.empty(max_iter + 1)
    f = 0.0
    for i in range(n):
        f += theta[i] * (A[i] * theta[i] + B[i] + C[i] * math.log(theta[i]))
    trace[0] = f
    grad = np.empty(n)
    d = np.empty(n)
    step = np.empty(n)
    converged = False
    it = 0
    while it < max_iter:
        total = 0.0
        weighted = 0.0
        for i in range(n):
            grad[i] = 2.0 * A[i] * theta[i] + B[i] + C[i] * (1.0 + math.log(theta[i]))
            total += theta[i]
            weighted += theta[i] * grad[i]
        mean = weighted / total
        dmax = 0.0
        slope = 0.0
        lowest = 0.0
        for i in range(n):
            d[i] = theta[i] * (grad[i] - mean)
            dmax = max(dmax, abs(d[i]))
            slope += grad[i] * d[i]
            lowest = min(lowest, d[i] / theta[i])
        if dmax < tol:
            converged = True
            break
        s = 1.0
        if lowest < 0.0:
            s = min(1.0, boundary_fraction * (-1.0 / lowest))
        # never start past the maximiser of the local quadratic model along d;
        # otherwise a unit step can bounce across the optimum indefinitely
        curvature = 0.0
        for i in range(n):
            curvature -= d[i] * d[i] * (2.0 * A[i] + C[i] / theta[i])
        if curvature > 0.0:
            s = min(s, slope / curvature)
        accepted = False
        gain = 0.0
        for _ in range(max_backtracks):
            inside = True
            for i in range(n):
                step[i] = s * d[i]
                if theta[i] + step[i] <= 0.0:
                    inside = False
            if inside:
                # f(theta + step) - f(theta), free of cancellation
                gain = 0.0
                for i in range(n):
                    new = theta[i] + step[i]
                    xlogx = step[i] * math.log(theta[i]) + new * math.log1p(step[i] / theta[i])
                    gain += A[i] * step[i] * (new + theta[i]) + B[i] * step[i] + C[i] * xlogx
                if gain >= sigma * s * slope:
                    accepted = True
                    break
            s *= nu
        if not accepted:
            break
        low = theta[0] + step[0]
        for i in range(n):
            theta[i] += step[i]
            low = min(low, theta[i])
        if low < THETA_FLOOR:
            # rare: snap to the floor, keep it only if it does not lose ground
            snapped = np.maximum(theta, THETA_FLOOR)
            snapped /= snapped.sum()
            delta = snapped - theta
            extra = 0.0
            for i in range(n):
                new = snapped[i]
                xlogx = delta[i] * math.log(theta[i]) + new * math.log1p(delta[i] / theta[i])
                extra += A[i] * delta[i] * (new + theta[i]) + B[i] * delta[i] + C[i] * xlogx
            if extra >= 0.0:
                theta[:] = snapped
                gain += extra
        f += gain
        it += 1
        trace[it] = f
    return theta, trace[:it + 1], converged, it


def maximize(obj: SimplexObjective, theta0, config: LineSearchConfig | None = None,
             tol: float = 1e-8, max_iter: int = 200) -> SimplexResult:
    """Run the interior-point ascent from ``theta0``.

    Stops when ``max |d_i| < tol`` (``converged=True``), when the line search
    cannot find an Armijo step (numerical stationarity), or after
    ``max_iter`` iterations; the last two leave ``converged=False``.
    """
    cfg = config or LineSearchConfig()
    theta = _interior(obj, theta0).copy()
    theta, trace, converged, n_iter = _ascent(
        obj.A, obj.B, obj.C, theta, cfg.sigma, cfg.nu, cfg.max_backtracks,
        cfg.boundary_fraction, tol, max_iter)
    # remove rounding drift so the result can seed later solves
    theta /= theta.sum()
    return SimplexResult(theta, trace.tolist(), bool(converged), int(n_iter))
