"""Exact conditional bias/variance, grid integration and empirical rates."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from ._validation import as_1d
from .kernels import GAUSSIAN
from .smoother import WeightProfile, boosted_weights

__all__ = [
    "GridFunction",
    "RateEstimate",
    "conditional_bias",
    "conditional_variance",
    "trapezoid_integral",
    "rate_estimate",
    "integrated_squared_bias",
    "sup_squared_weights",
    "bias_rate",
    "variance_order_ratio",
]


@dataclass(frozen=True)
class GridFunction:
    """Values on an ascending grid; ``mask`` is True where a value is valid."""

    grid: np.ndarray
    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        mask = np.ones(len(grid), dtype=bool) if self.mask is None else np.asarray(self.mask, dtype=bool)
        if grid.ndim != 1 or values.shape != grid.shape or mask.shape != grid.shape:
            raise ValueError("grid, values and mask must be 1-D arrays of equal length")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    def restrict(self, lo: float, hi: float) -> "GridFunction":
        keep = (self.grid >= lo - 1e-12) & (self.grid <= hi + 1e-12)
        return GridFunction(self.grid[keep], self.values[keep], self.mask[keep])

    def map(self, fn) -> "GridFunction":
        return GridFunction(self.grid, fn(self.values), self.mask)

    def to_csv(self, path=None) -> str:
        """Two-column ``x,value`` CSV; invalid grid indices go on a ``# mask:`` line."""
        buf = io.StringIO()
        bad = np.flatnonzero(~self.mask)
        if len(bad):
            buf.write("# mask: " + " ".join(str(i) for i in bad) + "\n")
        buf.write("x,value\n")
        for x, v in zip(self.grid, self.values):
            buf.write(f"{x:.6g},{v:.6g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        bad: list[int] = []
        xs, vs = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line or line == "x,value":
                continue
            if line.startswith("# mask:"):
                bad.extend(int(tok) for tok in line[len("# mask:"):].split())
                continue
            x, v = line.split(",")
            xs.append(float(x))
            vs.append(float(v))
        mask = np.ones(len(xs), dtype=bool)
        mask[bad] = False
        return cls(np.array(xs), np.array(vs), mask)


@dataclass(frozen=True)
class RateEstimate:
    slope: float
    intercept: float
    r_squared: float
    points: tuple


def _values_at(fn, x):
    if callable(fn):
        return np.asarray(fn(x), dtype=float) * np.ones_like(x)
    return np.full_like(x, float(fn))


def conditional_bias(profile: WeightProfile, m_true) -> GridFunction:
    """``sum_j W[k, j] m(X_j) - m(x_k)``: the exact bias given the design."""
    fitted = profile.W @ _values_at(m_true, profile.design_x)
    return GridFunction(profile.eval_x, fitted - _values_at(m_true, profile.eval_x), ~profile.flags)


def conditional_variance(profile: WeightProfile, sigma2) -> GridFunction:
    """``sum_j W[k, j]^2 sigma^2(X_j)``. ``sigma2`` is a function or a constant."""
    values = (profile.W**2) @ _values_at(sigma2, profile.design_x)
    return GridFunction(profile.eval_x, values, ~profile.flags)


def trapezoid_integral(f: GridFunction) -> float:
    """Composite trapezoid rule over the valid points.

    A panel contributes only when both of its end points are valid, so
    masked points (and the gaps they leave) are skipped, not bridged.
    """
    if f.mask.sum() < 2:
        raise ValueError("trapezoid_integral needs at least 2 valid grid points")
    ok = f.mask[:-1] & f.mask[1:]
    vals = np.where(f.mask, f.values, 0.0)
    panels = 0.5 * np.diff(f.grid) * (vals[:-1] + vals[1:])
    return float(panels[ok].sum())


def rate_estimate(metric_by_h, window=(0.0, np.inf)) -> RateEstimate:
    """Least-squares slope of log(metric) against log(h) inside ``window``."""
    pairs = [(float(h), float(v)) for h, v in metric_by_h if window[0] <= h <= window[1]]
    if len(pairs) < 4:
        raise ValueError(f"need at least 4 (h, value) pairs inside {window}, got {len(pairs)}")
    if any(v <= 0 for _, v in pairs):
        raise ValueError("metric values inside the window must be positive")
    logs = np.log(np.array(pairs))
    fit = stats.linregress(logs[:, 0], logs[:, 1])
    r2 = min(1.0, max(0.0, float(fit.rvalue) ** 2))
    return RateEstimate(float(fit.slope), float(fit.intercept), r2, tuple(map(tuple, logs)))


def integrated_squared_bias(profile: WeightProfile, m_true, domain=(0.0, 1.0)) -> float:
    bias = conditional_bias(profile, m_true).restrict(*domain)
    return trapezoid_integral(bias.map(np.square))


def sup_squared_weights(profile: WeightProfile) -> float:
    """``max_x sum_j W[x, j]^2`` over the profile's grid."""
    return float((profile.W**2).sum(axis=1)[~profile.flags].max())


def bias_rate(m_true, design_x, h_values, r: int, window, domain=(0.1, 0.9),
              kernel=GAUSSIAN, grid_points: int = 81) -> RateEstimate:
    """Slope of the noiseless interior ISB against h on a log-log scale."""
    design_x = as_1d(design_x, "design_x")
    eval_x = np.linspace(domain[0], domain[1], grid_points)
    pairs = []
    for h in h_values:
        if not window[0] <= h <= window[1]:
            continue
        prof = boosted_weights(design_x, eval_x, h, kernel, r)
        pairs.append((h, integrated_squared_bias(prof, m_true, domain)))
    return rate_estimate(pairs, window)


def variance_order_ratio(n: int, h: float = 0.1, r: int = 0, designs: int = 20, seed: int = 0,
                         kernel=GAUSSIAN, grid_points: int = 101) -> float:
    """Mean ``sup_x sum_j W^2`` at n over the same quantity at 2n (uniform designs)."""
    eval_x = np.linspace(0.0, 1.0, grid_points)
    means = []
    for size in (n, 2 * n):
        rng = np.random.default_rng([seed, size])
        sups = [
            sup_squared_weights(boosted_weights(rng.uniform(size=size), eval_x, h, kernel, r))
            for _ in range(designs)
        ]
        means.append(np.mean(sups))
    return float(means[0] / means[1])
