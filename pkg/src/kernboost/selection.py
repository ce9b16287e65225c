"""Choice of bandwidth and stopping round by test-bed error, plus a LOO-CV score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_grid, check_iterations
from .kernels import GAUSSIAN, get_kernel
from .smoother import FitConfig, Sample, fit_boosted, smoother_matrix, staged_predictions

__all__ = [
    "SelectionResult",
    "DEFAULT_H_GRID",
    "default_h_grid",
    "testbed_sse",
    "testbed_select_h",
    "testbed_select_r",
    "loo_cv_score",
]


def default_h_grid(lo: float = 0.02, hi: float = 0.30, num: int = 40) -> np.ndarray:
    return np.geomspace(lo, hi, num)


DEFAULT_H_GRID = default_h_grid()


@dataclass(frozen=True)
class SelectionResult:
    per_r: list  # [(r, h_hat, sse)]
    r_hat: int
    h_hat_final: float


def testbed_sse(train: Sample, testbed: Sample, r_max: int, h_grid, kernel=GAUSSIAN):
    """Test-bed sums of squared prediction errors.

    Returns
    -------
    sse : ndarray of shape (len(h_grid), r_max + 1)
        NaN where some test-bed covariate had an empty neighbourhood.
    """
    h_grid = check_grid(h_grid)
    kernel = get_kernel(kernel)
    sse = np.empty((len(h_grid), r_max + 1))
    for i, h in enumerate(h_grid):
        preds, flags = staged_predictions(train.x, train.y, testbed.x, h, kernel, r_max)
        if flags.any():
            sse[i] = np.nan
        else:
            sse[i] = ((testbed.y[None, :] - preds) ** 2).sum(axis=1)
    return sse


def _ties(values, scale):
    # equal up to rounding, relative to the size of the responses
    best = np.nanmin(values)
    return np.isfinite(values) & (values <= best + 1e-10 * abs(best) + 1e-14 * scale)


def _argmin_h(h_grid, sse_col, scale):
    """Grid minimiser; ties go to the larger bandwidth."""
    if not np.isfinite(sse_col).any():
        bad = ", ".join(f"{h:g}" for h in h_grid)
        raise ValueError(f"every bandwidth left some test-bed point without neighbours: {bad}")
    idx = np.flatnonzero(_ties(sse_col, scale))
    i = max(idx, key=lambda j: h_grid[j])
    return float(h_grid[i]), float(sse_col[i])


def _scale(testbed):
    return float(np.sum(testbed.y**2))


def testbed_select_h(train: Sample, testbed: Sample, r: int, h_grid=DEFAULT_H_GRID, kernel=GAUSSIAN):
    """Bandwidth minimising the test-bed squared error of the r-round boosted fit.

    Returns ``(h_hat, sse)``.
    """
    r = check_iterations(r)
    h_grid = check_grid(h_grid)
    sse = testbed_sse(train, testbed, r, h_grid, kernel)
    return _argmin_h(h_grid, sse[:, r], _scale(testbed))


def testbed_select_r(train: Sample, testbed: Sample, r_max: int, h_grid=DEFAULT_H_GRID,
                     kernel=GAUSSIAN) -> SelectionResult:
    """Select ``h_r`` for every ``r <= r_max``, then the stopping round.

    Round 0 is reported but the stopping round is chosen among ``r >= 1``;
    ties go to the smaller round.
    """
    r_max = check_iterations(r_max)
    if r_max < 1:
        raise ValueError("r_max must be at least 1")
    h_grid = check_grid(h_grid)
    sse = testbed_sse(train, testbed, r_max, h_grid, kernel)
    scale = _scale(testbed)
    per_r = [(r, *_argmin_h(h_grid, sse[:, r], scale)) for r in range(r_max + 1)]
    admissible = np.array([t[2] for t in per_r[1:]])
    r_hat = 1 + int(np.flatnonzero(_ties(admissible, scale))[0])
    return SelectionResult(per_r, r_hat, per_r[r_hat][1])


def loo_cv_score(sample: Sample, cfg: FitConfig) -> float:
    """Leave-one-out shortcut ``mean(((y - m_r) / (1 - B_ii))^2)``.

    ``B = I - (I - S)^(r+1)`` is the boosted hat matrix. Nadaraya-Watson
    weights renormalise when a point is dropped, so this is an approximation
    to brute-force leave-one-out, not an identity.
    """
    S = smoother_matrix(sample.x, cfg.h, cfg.kernel, cfg.denom_floor).S
    n = sample.n
    M = np.eye(n) - S
    P = M.copy()
    for _ in range(cfg.r):
        P = P @ M
    diag = 1.0 - np.diag(P)
    if np.any(diag >= 1.0 - 1e-12):
        raise ValueError("degenerate smoother: a boosted hat-matrix diagonal entry is 1")
    resid = sample.y - fit_boosted(sample, cfg).final
    return float(np.mean((resid / (1.0 - diag)) ** 2))
