"""Input checks shared by the functional API and the estimators."""

from __future__ import annotations

import numbers

import numpy as np


def as_1d(x, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite float vector; a single-column 2-D array is flattened."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    elif arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional (or a single column), got shape {np.shape(x)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_xy(x, y, min_samples: int = 2) -> tuple[np.ndarray, np.ndarray]:
    x = as_1d(x, "x")
    y = as_1d(y, "y")
    if len(x) != len(y):
        raise ValueError(f"x and y have different lengths ({len(x)} != {len(y)})")
    if len(x) < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {len(x)}")
    return x, y


def check_bandwidth(h) -> float:
    if not isinstance(h, numbers.Real) or not np.isfinite(h) or h <= 0:
        raise ValueError(f"bandwidth must be a positive finite number, got {h!r}")
    return float(h)


def check_iterations(r, max_r: int | None = None) -> int:
    if isinstance(r, bool) or not isinstance(r, numbers.Integral) or r < 0:
        raise ValueError(f"iteration count must be a nonnegative integer, got {r!r}")
    if max_r is not None and r > max_r:
        raise ValueError(f"iteration count {r} exceeds the configured maximum {max_r}")
    return int(r)


def check_grid(h_grid, name: str = "h_grid") -> np.ndarray:
    grid = as_1d(h_grid, name)
    if len(grid) == 0:
        raise ValueError(f"{name} is empty")
    if np.any(grid <= 0):
        raise ValueError(f"{name} must be positive")
    return grid
