"""Seeded Monte Carlo comparison of boosting against higher-order kernels.

Every replicate draws its data from its own child seed, so replicates can be
computed in any order or in parallel; the reduction over replicates always
runs in replicate order.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import GridFunction, trapezoid_integral
from .kernels import GAUSSIAN
from .smoother import Sample, _cached_higher_order, _ratio_with_flags, staged_predictions

__all__ = [
    "ModelSpec",
    "MODEL1",
    "MODEL2",
    "get_model",
    "SimConfig",
    "SimReport",
    "TABLE1_H_GRID",
    "replicate_seed",
    "gen_dataset",
    "run_mise_study",
    "reproduce_table1",
    "write_table1",
    "emit_figure_data",
    "write_figure_files",
]

ESTIMATOR_LABELS = {"boost": "Boost", "higher_order": "HigherOrder"}
METRICS = ("isb", "iv", "mise")

# step 0.005 on [0.02, 0.30]
TABLE1_H_GRID = np.round(0.02 + 0.005 * np.arange(57), 10)


@dataclass(frozen=True)
class ModelSpec:
    """Regression model ``Y = m(X) + N(0, noise_sd^2)`` with ``X ~ U(0, 1)``."""

    id: int
    noise_sd: float = 0.5
    design: str = "uniform"

    def __post_init__(self):
        if self.id not in (1, 2):
            raise ValueError(f"unknown model {self.id}; expected 1 or 2")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        if self.design != "uniform":
            raise ValueError(f"unsupported design {self.design!r}")

    def m(self, x):
        x = np.asarray(x, dtype=float)
        if self.id == 1:
            return np.sin(2 * np.pi * x)
        return 0.4 * (3 * np.sin(4 * np.pi * x) + 2 * np.sin(3 * np.pi * x))


MODEL1 = ModelSpec(1)
MODEL2 = ModelSpec(2)


def get_model(model_id: int, noise_sd: float = 0.5) -> ModelSpec:
    return ModelSpec(int(model_id), noise_sd)


@dataclass(frozen=True)
class SimConfig:
    model: ModelSpec
    n: int
    replicates: int = 200
    h_grid: tuple = tuple(TABLE1_H_GRID)
    r_max: int = 6
    grid_points: int = 101
    seed: int = 0
    estimators: tuple = ("boost", "higher_order")
    n_jobs: int = 1
    instability_tol: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "h_grid", tuple(float(h) for h in self.h_grid))
        if self.replicates < 2:
            raise ValueError("replicates must be at least 2")
        if self.grid_points < 3:
            raise ValueError("grid_points must be at least 3")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not self.h_grid or min(self.h_grid) <= 0:
            raise ValueError("h_grid must be nonempty and positive")
        for est in self.estimators:
            if isinstance(est, str) and est not in ESTIMATOR_LABELS:
                raise ValueError(f"unknown estimator {est!r}")

    @property
    def eval_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_points)

    @property
    def estimator_names(self) -> list[str]:
        return [e if isinstance(e, str) else e[0] for e in self.estimators]


def replicate_seed(seed: int, k: int) -> np.random.SeedSequence:
    """Child seed of replicate ``k``; depends only on ``(seed, k)``."""
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(k)])


def gen_dataset(model: ModelSpec, n: int, seed, replicate: int | None = None) -> Sample:
    """Draw ``n`` observations. ``replicate`` selects a child stream of ``seed``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    ss = replicate_seed(seed, replicate) if replicate is not None else seed
    rng = np.random.default_rng(ss)
    x = rng.uniform(0.0, 1.0, n)
    eps = rng.standard_normal(n)
    return Sample(x, model.m(x) + model.noise_sd * eps)


def _boost_curves(sample, eval_x, h_grid, r_max, tol):
    preds = np.empty((r_max + 1, len(h_grid), len(eval_x)))
    flags = np.empty(preds.shape, dtype=bool)
    for i, h in enumerate(h_grid):
        preds[:, i], f = staged_predictions(sample.x, sample.y, eval_x, h, GAUSSIAN, r_max)
        flags[:, i] = f[None, :]
    return preds, flags


def _higher_order_curves(sample, eval_x, h_grid, r_max, tol):
    kernels = [_cached_higher_order(GAUSSIAN, r) for r in range(r_max + 1)]
    preds = np.empty((r_max + 1, len(h_grid), len(eval_x)))
    flags = np.empty(preds.shape, dtype=bool)
    diff = sample.x[None, :] - eval_x[:, None]
    for i, h in enumerate(h_grid):
        u = diff / h
        for r, k in enumerate(kernels):
            with np.errstate(over="ignore"):
                preds[r, i], flags[r, i] = _ratio_with_flags(k(u) / h, sample.y, tol)
    return preds, flags


_BUILTIN = {"boost": _boost_curves, "higher_order": _higher_order_curves}


def _estimator_fn(est):
    return _BUILTIN[est] if isinstance(est, str) else est[1]


def _replicate(args):
    cfg, k = args
    sample = gen_dataset(cfg.model, cfg.n, cfg.seed, replicate=k)
    h_grid = np.array(cfg.h_grid)
    out = {}
    for est, name in zip(cfg.estimators, cfg.estimator_names):
        out[name] = _estimator_fn(est)(sample, cfg.eval_grid, h_grid, cfg.r_max, cfg.instability_tol)
    return out


@dataclass
class SimReport:
    """ISB / IV / MISE per (estimator, r, h) cell.

    Arrays are indexed ``[r, h_index]``. ``excluded`` counts grid points left
    out of the integrals because some replicate was non-finite there.
    """

    config: SimConfig
    isb: dict = field(default_factory=dict)
    iv: dict = field(default_factory=dict)
    mise: dict = field(default_factory=dict)
    instability_count: dict = field(default_factory=dict)
    excluded: dict = field(default_factory=dict)

    @property
    def h_grid(self) -> np.ndarray:
        return np.array(self.config.h_grid)

    def h_opt(self, est: str) -> np.ndarray:
        return self.h_grid[np.nanargmin(self.mise[est], axis=1)]

    def mise_min(self, est: str) -> np.ndarray:
        return np.nanmin(self.mise[est], axis=1)

    def decomposition_error(self, est: str) -> float:
        return float(np.nanmax(np.abs(self.isb[est] + self.iv[est] - self.mise[est])))

    def table_rows(self) -> list[tuple]:
        rows = []
        for est in self.config.estimator_names:
            h_opt, best = self.h_opt(est), self.mise_min(est)
            for r in range(self.config.r_max + 1):
                rows.append((self.config.model.id, self.config.n, ESTIMATOR_LABELS.get(est, est),
                             r, h_opt[r], best[r]))
        return rows

    def curve_rows(self) -> list[tuple]:
        rows = []
        log_h = np.log(self.h_grid)
        for est in self.config.estimator_names:
            for metric in METRICS:
                values = getattr(self, metric)[est]
                for r in range(self.config.r_max + 1):
                    for j, lh in enumerate(log_h):
                        rows.append((self.config.model.id, self.config.n, ESTIMATOR_LABELS.get(est, est),
                                     metric, r, lh, values[r, j]))
        return rows


def summarize_curves(preds: np.ndarray, flags: np.ndarray, m_grid: np.ndarray, grid: np.ndarray):
    """Reduce replicate curves of shape (R, r, H, G) to ISB, IV, MISE of shape (r, H).

    Variances use the 1/R convention so that ISB + IV = MISE.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        mean = preds.mean(axis=0)
        sq_bias = (mean - m_grid) ** 2
        var = ((preds - mean) ** 2).mean(axis=0)
        mse = ((preds - m_grid) ** 2).mean(axis=0)
    valid = np.isfinite(preds).all(axis=0) & np.isfinite(mse) & np.isfinite(var)
    shape = preds.shape[1:3]
    isb, iv, mise = np.full(shape, np.nan), np.full(shape, np.nan), np.full(shape, np.nan)
    for idx in np.ndindex(*shape):
        mask = valid[idx]
        if mask.sum() < 2:
            continue
        isb[idx] = trapezoid_integral(GridFunction(grid, sq_bias[idx], mask))
        iv[idx] = trapezoid_integral(GridFunction(grid, var[idx], mask))
        mise[idx] = trapezoid_integral(GridFunction(grid, mse[idx], mask))
    return isb, iv, mise, flags.sum(axis=(0, 3)), (~valid).sum(axis=-1)


def run_mise_study(cfg: SimConfig) -> SimReport:
    tasks = [(cfg, k) for k in range(cfg.replicates)]
    if cfg.n_jobs and cfg.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, len(tasks) // (4 * cfg.n_jobs))))
    else:
        results = [_replicate(t) for t in tasks]

    grid = cfg.eval_grid
    m_grid = cfg.model.m(grid)
    report = SimReport(cfg)
    for name in cfg.estimator_names:
        preds = np.stack([res[name][0] for res in results])
        flags = np.stack([res[name][1] for res in results])
        isb, iv, mise, unstable, excluded = summarize_curves(preds, flags, m_grid, grid)
        report.isb[name], report.iv[name], report.mise[name] = isb, iv, mise
        report.instability_count[name] = unstable
        report.excluded[name] = excluded
    return report


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.6g}"


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def write_table1(reports, out_path) -> Path:
    out_path = Path(out_path)
    rows = [row for rep in reports for row in rep.table_rows()]
    _write_csv(out_path, ("model", "n", "estimator", "r", "h_opt", "mise_min"), rows)
    return out_path


def reproduce_table1(seed: int, out_path, replicates: int = 200, h_grid=TABLE1_H_GRID,
                     models=(1, 2), sizes=(100, 400), n_jobs: int = 1, r_max: int = 6) -> list[SimReport]:
    """Run every (model, n) study of the comparison table and write ``table1.csv``."""
    reports = []
    for model_id in models:
        for n in sizes:
            cfg = SimConfig(get_model(model_id), n, replicates, tuple(h_grid), r_max, seed=seed,
                            n_jobs=n_jobs)
            reports.append(run_mise_study(cfg))
    write_table1(reports, out_path)
    return reports


def write_figure_files(report: SimReport, out_dir) -> list[Path]:
    """Per-curve CSVs, a combined ``curves.csv`` and one SVG panel per (estimator, metric)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg = report.config
    out_dir = Path(out_dir)
    tag = f"model{cfg.model.id}_n{cfg.n}"
    curve_dir = out_dir / tag
    curve_dir.mkdir(parents=True, exist_ok=True)
    log_h = np.log(report.h_grid)
    written = []
    for est in cfg.estimator_names:
        label = ESTIMATOR_LABELS.get(est, est)
        for metric in METRICS:
            values = getattr(report, metric)[est]
            for r in range(cfg.r_max + 1):
                path = curve_dir / f"{metric}_{label}_r{r}.csv"
                rows = [(lh, values[r, j], r, label, metric) for j, lh in enumerate(log_h)]
                _write_csv(path, ("log_h", "value", "r", "estimator", "metric"), rows)
                written.append(path)

    curves = out_dir / f"curves_{tag}.csv"
    _write_csv(curves, ("model", "n", "estimator", "metric", "r", "log_h", "value"), report.curve_rows())
    written.append(curves)

    with plt.rc_context({"svg.hashsalt": "kernboost", "svg.fonttype": "none"}):
        for est in cfg.estimator_names:
            label = ESTIMATOR_LABELS.get(est, est)
            for metric in METRICS:
                values = getattr(report, metric)[est]
                fig, ax = plt.subplots(figsize=(5, 4))
                for r in range(cfg.r_max + 1):
                    v = values[r]
                    ok = np.isfinite(v) & (v > 0)
                    ax.plot(log_h[ok], v[ok], label=f"r={r}", lw=1)
                ax.set_yscale("log")
                ax.set_xlabel("log h")
                ax.set_ylabel(metric.upper())
                ax.set_title(f"Model {cfg.model.id}, n={cfg.n}: {label}")
                ax.legend(fontsize=7)
                path = out_dir / f"{tag}_{metric}_{label}.svg"
                fig.savefig(path, format="svg", metadata={"Date": None})
                plt.close(fig)
                written.append(path)
    return written


def emit_figure_data(cfg: SimConfig, out_dir) -> list[Path]:
    """Run the study for ``cfg`` and write its curve files and SVG panels."""
    return write_figure_files(run_mise_study(cfg), out_dir)


def default_jobs() -> int:
    return max(1, os.cpu_count() or 1)
