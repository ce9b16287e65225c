"""Nadaraya-Watson weak learner, L2 boosting and boosted weight profiles.

The boosted estimate after ``r`` rounds is linear in the responses,
``m_r(x) = sum_j W_r[x, j] * y_j``. Three equivalent routes compute it:

* residual iteration: ``m_k = m_{k-1} + S-smooth of (y - m_{k-1})``;
* weight propagation: ``W_k(x) = w(x) + W_{k-1}(x) - w(x) @ W_{k-1}(X)``;
* hat-matrix polynomial at the design: ``I - (I - S)^(r+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._validation import as_1d, check_bandwidth, check_iterations, check_xy
from .kernels import GAUSSIAN, KernelSpec, get_kernel, higher_order_kernel

__all__ = [
    "EmptyNeighborhoodError",
    "Sample",
    "FitConfig",
    "SmootherMatrix",
    "BoostFit",
    "WeightProfile",
    "kernel_matrix",
    "normalized_weights",
    "nw_weights",
    "smoother_matrix",
    "fit_boosted",
    "boosted_weights",
    "predict",
    "staged_predictions",
    "higher_order_fit",
    "DEFAULT_DENOM_FLOOR",
    "DEFAULT_MAX_R",
]

DEFAULT_DENOM_FLOOR = 1e-300
DEFAULT_MAX_R = 16


class EmptyNeighborhoodError(ValueError):
    """No design point carries kernel mass at the evaluation point."""


@dataclass(frozen=True)
class Sample:
    """Paired covariates and responses."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x, y = check_xy(self.x, self.y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def order(self) -> np.ndarray:
        """Indices that sort the covariates."""
        return np.argsort(self.x, kind="stable")


@dataclass(frozen=True)
class FitConfig:
    h: float
    r: int = 0
    kernel: KernelSpec = GAUSSIAN
    denom_floor: float = DEFAULT_DENOM_FLOOR
    max_r: int = DEFAULT_MAX_R

    def __post_init__(self):
        object.__setattr__(self, "h", check_bandwidth(self.h))
        object.__setattr__(self, "r", check_iterations(self.r, self.max_r))
        object.__setattr__(self, "kernel", get_kernel(self.kernel))
        if self.denom_floor < 0:
            raise ValueError("denom_floor must be nonnegative")


@dataclass(frozen=True)
class SmootherMatrix:
    """``S[i, j] = w_j(X_i)``; ``flags[i]`` marks rows with an empty neighbourhood."""

    S: np.ndarray
    flags: np.ndarray


@dataclass(frozen=True)
class BoostFit:
    config: FitConfig
    fitted: np.ndarray
    residuals: np.ndarray
    flags: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.fitted[-1]


@dataclass(frozen=True)
class WeightProfile:
    """Boosted weights ``W[k, j]`` of design point ``j`` at ``eval_x[k]``."""

    eval_x: np.ndarray
    design_x: np.ndarray
    W: np.ndarray
    r: int
    flags: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.flags is None:
            object.__setattr__(self, "flags", np.zeros(len(self.eval_x), dtype=bool))


def kernel_matrix(design_x, eval_x, h: float, kernel: KernelSpec = GAUSSIAN) -> np.ndarray:
    """Raw ``K_h(X_j - x_k)`` as an (m, n) matrix."""
    design_x = np.asarray(design_x, dtype=float)
    eval_x = np.asarray(eval_x, dtype=float)
    u = (design_x[None, :] - eval_x[:, None]) / h
    return kernel(u) / h


def normalized_weights(design_x, eval_x, h, kernel=GAUSSIAN, denom_floor=DEFAULT_DENOM_FLOOR):
    """Nadaraya-Watson weight rows at every ``eval_x``.

    Returns
    -------
    W : ndarray of shape (m, n)
        Rows sum to one; rows with an empty neighbourhood are all zero.
    empty : ndarray of bool, shape (m,)
        True where ``|sum_j K_h(X_j - x)| <= denom_floor``.
    """
    K = kernel_matrix(design_x, eval_x, h, kernel)
    denom = K.sum(axis=1)
    empty = np.abs(denom) <= denom_floor
    safe = np.where(empty, 1.0, denom)
    W = K / safe[:, None]
    W[empty] = 0.0
    return W, empty


def nw_weights(design_x, x: float, h: float, kernel=GAUSSIAN, denom_floor=DEFAULT_DENOM_FLOOR):
    """Weights ``w_i(x) = K_h(X_i - x) / sum_j K_h(X_j - x)``.

    Raises
    ------
    EmptyNeighborhoodError
        If the kernel mass at ``x`` does not exceed ``denom_floor``.
    """
    design_x = as_1d(design_x, "design_x")
    h = check_bandwidth(h)
    W, empty = normalized_weights(design_x, [float(x)], h, get_kernel(kernel), denom_floor)
    if empty[0]:
        raise EmptyNeighborhoodError(f"no design point within the kernel support at x={x}")
    return W[0]


def smoother_matrix(design_x, h, kernel=GAUSSIAN, denom_floor=DEFAULT_DENOM_FLOOR) -> SmootherMatrix:
    design_x = as_1d(design_x, "design_x")
    S, flags = normalized_weights(design_x, design_x, check_bandwidth(h), get_kernel(kernel), denom_floor)
    return SmootherMatrix(S, flags)


def fit_boosted(sample: Sample, cfg: FitConfig) -> BoostFit:
    """Run ``cfg.r`` rounds of L2 boosting at the design points.

    ``fitted[0]`` is the plain Nadaraya-Watson fit; each later row adds the
    smooth of the previous residuals.
    """
    sm = smoother_matrix(sample.x, cfg.h, cfg.kernel, cfg.denom_floor)
    y = sample.y
    fitted = np.empty((cfg.r + 1, sample.n))
    residuals = np.empty_like(fitted)
    fitted[0] = sm.S @ y
    residuals[0] = y - fitted[0]
    for k in range(1, cfg.r + 1):
        fitted[k] = fitted[k - 1] + sm.S @ residuals[k - 1]
        residuals[k] = y - fitted[k]
    return BoostFit(cfg, fitted, residuals, sm.flags.copy())


def boosted_weights(design_x, eval_x, h, kernel=GAUSSIAN, r: int = 0,
                    denom_floor=DEFAULT_DENOM_FLOOR) -> WeightProfile:
    """Weight profile of the ``r``-times boosted smoother on ``eval_x``.

    Applies ``W_new(x) = w(x) + W_old(x) - sum_i w_i(x) W_old(X_i)`` ``r``
    times, starting from the plain weights. The design-point profile needed
    on the right is carried along with the same update.
    """
    design_x = as_1d(design_x, "design_x")
    eval_x = as_1d(eval_x, "eval_x")
    h = check_bandwidth(h)
    r = check_iterations(r)
    kernel = get_kernel(kernel)
    w_eval, flags = normalized_weights(design_x, eval_x, h, kernel, denom_floor)
    S, _ = normalized_weights(design_x, design_x, h, kernel, denom_floor)
    W = w_eval.copy()
    D = S.copy()
    for _ in range(r):
        W = w_eval + W - w_eval @ D
        D = S + D - S @ D
    return WeightProfile(eval_x, design_x, W, r, flags)


def predict(profile: WeightProfile, y) -> np.ndarray:
    y = as_1d(y, "y")
    if profile.W.shape[1] != len(y):
        raise ValueError(f"profile has {profile.W.shape[1]} columns but y has length {len(y)}")
    return profile.W @ y


def staged_predictions(design_x, y, eval_x, h, kernel=GAUSSIAN, r_max: int = 0,
                       denom_floor=DEFAULT_DENOM_FLOOR):
    """Boosted estimates on ``eval_x`` for every round ``0..r_max``.

    Uses only matrix-vector products: the residual vector is pushed through
    ``I - S`` once per round and its smooth accumulated.

    Returns ``(preds, flags)`` with ``preds`` of shape (r_max + 1, m).
    """
    w_eval, flags = normalized_weights(design_x, eval_x, h, kernel, denom_floor)
    S, _ = normalized_weights(design_x, design_x, h, kernel, denom_floor)
    e = np.asarray(y, dtype=float)
    preds = np.empty((r_max + 1, len(flags)))
    preds[0] = w_eval @ e
    for k in range(1, r_max + 1):
        e = e - S @ e
        preds[k] = preds[k - 1] + w_eval @ e
    return preds, flags


@lru_cache(maxsize=64)
def _cached_higher_order(base: KernelSpec, r: int) -> KernelSpec:
    return higher_order_kernel(base, r)


def higher_order_fit(sample: Sample, h, base=GAUSSIAN, r: int = 0, eval_x=None,
                     instability_tol: float = 0.1):
    """Nadaraya-Watson ratio with the higher-order kernel ``K^(r)``.

    The denominator is not guarded. A point is flagged unstable when its
    denominator is at most ``instability_tol`` times the absolute kernel mass
    ``sum_i |K_h(X_i - x)|`` (so every negative denominator is flagged).
    Exactly zero denominators give NaN.

    Returns
    -------
    values, flags : ndarray
    """
    h = check_bandwidth(h)
    r = check_iterations(r)
    eval_x = np.linspace(0.0, 1.0, 101) if eval_x is None else as_1d(eval_x, "eval_x")
    kernel = _cached_higher_order(get_kernel(base), r)
    K = kernel_matrix(sample.x, eval_x, h, kernel)
    return _ratio_with_flags(K, sample.y, instability_tol)


def _ratio_with_flags(K, y, instability_tol):
    denom = K.sum(axis=1)
    mass = np.abs(K).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = (K @ y) / denom
    values[denom == 0] = np.nan
    flags = denom <= instability_tol * mass
    return values, flags
