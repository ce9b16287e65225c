"""Command-line entry point.

Settings are resolved as: command-line flag, then ``--config`` file
(``key=value`` lines, keys spelled like the long flags, e.g. ``h-min=0.02``),
then built-in defaults.

Exit codes: 0 success, 1 usage error, 2 unreadable input data, 3 degenerate
fit, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .diagnostics import bias_rate, variance_order_ratio
from .kernels import get_kernel
from .selection import default_h_grid, loo_cv_score, testbed_select_r
from .simulation import (
    SimConfig,
    default_jobs,
    get_model,
    reproduce_table1,
    run_mise_study,
    write_figure_files,
)
from .smoother import FitConfig, Sample, boosted_weights

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_DEGENERATE, EXIT_IO = 0, 1, 2, 3, 4

DEFAULTS = {
    "kernel": "gaussian",
    "h": None,
    "r": None,
    "grid": 101,
    "seed": 1,
    "model": None,
    "n": None,
    "reps": 200,
    "jobs": None,
    "h_min": None,
    "h_max": None,
    "h_steps": None,
    "out": None,
    "input": None,
}

# ISB rate windows per boosting round: interior bias dominates there and the
# boundary bias of the smoother has not yet leaked into [0.1, 0.9].
BIAS_WINDOWS = {0: (0.005, 0.05), 1: (0.005, 0.015), 2: (0.004, 0.009)}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def read_config(path) -> dict:
    settings = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value", EXIT_USAGE)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise CliError(f"{path}:{lineno}: unknown key {key!r}", EXIT_USAGE)
        settings[key] = value
    return settings


_TYPES = {"h": float, "r": int, "grid": int, "seed": int, "model": int, "n": int, "reps": int,
          "jobs": int, "h_min": float, "h_max": float, "h_steps": int}


def resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            file_settings = read_config(args.config)
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}", EXIT_IO) from exc
        for key, value in file_settings.items():
            try:
                cfg[key] = _TYPES.get(key, str)(value)
            except ValueError as exc:
                raise CliError(f"config value for {key!r} is invalid: {value!r}", EXIT_USAGE) from exc
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def read_xy_csv(path) -> Sample:
    """Two numeric columns; a non-numeric first line is treated as a header."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    xs, ys = [], []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise CliError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}", EXIT_PARSE)
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            if lineno == 1:
                continue
            raise CliError(f"{path}: line {lineno}: non-numeric value in {row!r}", EXIT_PARSE) from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise CliError(f"{path}: line {lineno}: non-finite value", EXIT_PARSE)
        xs.append(x)
        ys.append(y)
    if len(xs) < 2:
        raise CliError(f"{path}: need at least 2 data rows, got {len(xs)}", EXIT_PARSE)
    return Sample(np.array(xs), np.array(ys))


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def _write(out, text: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc}", EXIT_IO) from exc


def _out_dir(out) -> Path:
    path = Path(out or ".")
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {path}: {exc}", EXIT_IO) from exc
    return path


def _log_grid(cfg, lo=0.02, hi=0.30, num=40):
    return default_h_grid(cfg["h_min"] or lo, cfg["h_max"] or hi, cfg["h_steps"] or num)


def _linear_grid(cfg):
    lo, hi = cfg["h_min"] or 0.02, cfg["h_max"] or 0.30
    num = cfg["h_steps"] or int(round((hi - lo) / 0.005)) + 1
    return np.round(np.linspace(lo, hi, num), 10)


def cmd_fit(cfg) -> int:
    if not cfg["input"]:
        raise CliError("fit requires --input", EXIT_USAGE)
    sample = read_xy_csv(cfg["input"])
    kernel = get_kernel(cfg["kernel"])
    r = 1 if cfg["r"] is None else cfg["r"]
    h = cfg["h"]
    if h is None:
        # no bandwidth given: leave-one-out shortcut over the default grid
        scores = []
        for cand in _log_grid(cfg):
            try:
                scores.append((loo_cv_score(sample, FitConfig(cand, r, kernel)), -cand))
            except ValueError:
                continue
        if not scores:
            raise CliError("no admissible bandwidth for leave-one-out selection", EXIT_DEGENERATE)
        h = -min(scores)[1]
    FitConfig(h, r, kernel)
    eval_x = np.linspace(0.0, 1.0, cfg["grid"])
    profile = boosted_weights(sample.x, eval_x, h, kernel, r)
    if profile.flags.all():
        raise CliError("every evaluation point has an empty neighbourhood", EXIT_DEGENERATE)
    yhat = profile.W @ sample.y
    lines = ["x,yhat,flag"]
    for x, v, f in zip(eval_x, yhat, profile.flags):
        lines.append(f"{fmt(x)},{'nan' if f else fmt(v)},{int(f)}")
    _write(cfg["out"], "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_select(cfg) -> int:
    if not cfg["input"]:
        raise CliError("select requires --input", EXIT_USAGE)
    sample = read_xy_csv(cfg["input"])
    rng = np.random.default_rng(cfg["seed"])
    perm = rng.permutation(sample.n)
    half = sample.n // 2
    if half < 2 or sample.n - half < 1:
        raise CliError("too few rows to split into training and test-bed halves", EXIT_PARSE)
    train = Sample(sample.x[perm[:half]], sample.y[perm[:half]])
    testbed = Sample(sample.x[perm[half:]], sample.y[perm[half:]])
    r_max = 6 if cfg["r"] is None else cfg["r"]
    try:
        res = testbed_select_r(train, testbed, r_max, _log_grid(cfg), get_kernel(cfg["kernel"]))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DEGENERATE) from exc
    lines = ["r,h_hat,sse"]
    lines += [f"{r},{fmt(h)},{fmt(s)}" for r, h, s in res.per_r]
    lines.append(f"# r_hat={res.r_hat},h_hat={fmt(res.h_hat_final)}")
    _write(cfg["out"], "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_table1(cfg) -> int:
    out = _out_dir(cfg["out"])
    models = (cfg["model"],) if cfg["model"] else (1, 2)
    sizes = (cfg["n"],) if cfg["n"] else (100, 400)
    try:
        reproduce_table1(cfg["seed"], out / "table1.csv", cfg["reps"], _linear_grid(cfg), models, sizes,
                         n_jobs=cfg["jobs"] or default_jobs(), r_max=6 if cfg["r"] is None else cfg["r"])
    except OSError as exc:
        raise CliError(f"cannot write table: {exc}", EXIT_IO) from exc
    return EXIT_OK


def cmd_figures(cfg) -> int:
    out = _out_dir(cfg["out"])
    models = (cfg["model"],) if cfg["model"] else (1, 2)
    try:
        for model_id in models:
            sim = SimConfig(get_model(model_id), cfg["n"] or 400, cfg["reps"], tuple(_linear_grid(cfg)),
                            6 if cfg["r"] is None else cfg["r"], cfg["grid"], cfg["seed"],
                            n_jobs=cfg["jobs"] or default_jobs())
            write_figure_files(run_mise_study(sim), out)
    except OSError as exc:
        raise CliError(f"cannot write figures: {exc}", EXIT_IO) from exc
    return EXIT_OK


def cmd_rates(cfg) -> int:
    out = _out_dir(cfg["out"])
    model = get_model(cfg["model"] or 1)
    n = cfg["n"] or 400
    design = (np.arange(n) + 0.5) / n
    h_values = _log_grid(cfg, 0.004, 0.2, 40)
    lines = ["r,h_lo,h_hi,slope,intercept,r_squared,theory"]
    for r, window in BIAS_WINDOWS.items():
        if cfg["h_min"] or cfg["h_max"]:
            window = (h_values[0], h_values[-1])
        est = bias_rate(model.m, design, h_values, r, window)
        lines.append(",".join([str(r), fmt(window[0]), fmt(window[1]), fmt(est.slope),
                               fmt(est.intercept), fmt(est.r_squared), str(4 * (r + 1))]))
    var_lines = ["r,n,h,ratio"]
    for r in (0, 3, 6):
        ratio = variance_order_ratio(n, 0.1, r, designs=20, seed=cfg["seed"])
        var_lines.append(f"{r},{n},0.1,{fmt(ratio)}")
    try:
        (out / "bias_rates.csv").write_text("\n".join(lines) + "\n")
        (out / "variance_ratio.csv").write_text("\n".join(var_lines) + "\n")
    except OSError as exc:
        raise CliError(f"cannot write rates: {exc}", EXIT_IO) from exc
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "table1": cmd_table1,
            "figures": cmd_figures, "rates": cmd_rates}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file with default settings")
    common.add_argument("--input", help="two-column CSV of x,y (fit, select)")
    common.add_argument("--kernel", choices=["gaussian", "epanechnikov"])
    common.add_argument("--h", type=float, help="bandwidth")
    common.add_argument("--r", type=int, help="boosting rounds (maximum round for select/table1/figures)")
    common.add_argument("--grid", type=int, help="number of evaluation grid points on [0, 1]")
    common.add_argument("--seed", type=int)
    common.add_argument("--model", type=int, choices=[1, 2])
    common.add_argument("--n", type=int, help="sample size")
    common.add_argument("--reps", type=int, help="Monte Carlo replicates")
    common.add_argument("--jobs", type=int, help="worker processes (default: all CPUs)")
    common.add_argument("--h-min", dest="h_min", type=float)
    common.add_argument("--h-max", dest="h_max", type=float)
    common.add_argument("--h-steps", dest="h_steps", type=int)
    common.add_argument("--out", help="output file (fit, select) or directory")

    parser = argparse.ArgumentParser(prog="kernboost", description="L2-boosted kernel regression")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fit": "fit the boosted smoother to a CSV and predict on a grid",
        "select": "choose bandwidth and stopping round on a held-out test bed",
        "table1": "minimal MISE and optimal bandwidth per round",
        "figures": "ISB / IV / MISE curves against log bandwidth",
        "rates": "empirical bias and variance order checks",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"kernboost {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"kernboost {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
