"""Input validation helpers used at the public entry points."""

from __future__ import annotations

import numpy as np


class ConfigurationError(ValueError):
    """Dimensions or settings that do not fit together."""


def check_positive(value, name: str) -> float:
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_simplex(p, name: str = "p", atol: float = 1e-9, interior: bool = False) -> np.ndarray:
    """Return ``p`` as a float array after checking it is a probability vector."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"{name} must be a 1-d vector")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has non-finite entries")
    if interior:
        if np.any(p <= 0):
            raise ValueError(f"{name} must lie strictly inside the simplex")
    elif np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if abs(p.sum() - 1.0) > atol:
        raise ValueError(f"{name} must sum to 1 (got {p.sum()!r})")
    return p


def check_row_simplices(p, name: str = "p", atol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array")
    for row in p:
        check_simplex(row, name, atol)
    return p


def check_same_shape(a, b, what: str = "arrays") -> None:
    if len(a) != len(b) or any(np.shape(x) != np.shape(y) for x, y in zip(a, b)):
        raise ValueError(f"{what} have mismatched shapes")


def frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr
