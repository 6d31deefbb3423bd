"""Seeded multi-trial benchmark harness.

An experiment is a problem (named, so worker processes can rebuild it),
a set of labeled optimizer configs, a trial count, and a shared
equivalent-HF checkpoint grid. Trials run with seeds base_seed + t,
optionally across a process pool, and every trace is resampled onto the
grid by carrying the last observed best value forward.

Outputs: per-trial CSVs (full checkpoint history), a long-format
summary.csv, a human-readable wide table, and an SVG convergence plot.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ConfigError, RngStream
from .linesearch import MAGNITUDE, SQUARED_MAGNITUDE, LineSearchConfig
from .optimizers import OptimizerConfig, run_method
from .problems import (
    kernel_lipschitz,
    make_clustered_regression,
    make_kernel_pair,
    make_kernel_spec,
    make_worst_pair,
)

WORST_GRID = (100.0, 1000.0, 10000.0, 20000.0, 30000.0)


def _build_worst(params):
    return make_worst_pair(
        dim=int(params.get("dim", 1000)),
        r_hf=int(params.get("r_hf", 100)),
        r_lf=int(params.get("r_lf", 2)),
        L=float(params.get("L", 20.0)),
    )


def _build_kernel_synthetic(params):
    points, targets = make_clustered_regression(
        n=int(params.get("n", 1000)),
        n_features=int(params.get("n_features", 8)),
        n_clusters=int(params.get("n_clusters", 10)),
        seed=int(params.get("data_seed", 12345)),
    )
    rng = RngStream(int(params.get("inducing_seed", 12345))).generator()
    spec = make_kernel_spec(
        points,
        targets,
        lengthscale=float(params.get("lengthscale", 1.0)),
        ridge=float(params.get("ridge", 1e-3)),
        n_inducing=int(params.get("n_inducing", 10)),
        rng=rng,
    )
    return make_kernel_pair(spec)


PROBLEMS = {
    "worst": _build_worst,
    "kernel_synthetic": _build_kernel_synthetic,
}

PROBLEM_PARAM_KEYS = {
    "worst": frozenset({"dim", "r_hf", "r_lf", "L"}),
    "kernel_synthetic": frozenset(
        {
            "n", "n_features", "n_clusters", "data_seed",
            "lengthscale", "ridge", "n_inducing", "inducing_seed",
        }
    ),
}

_PROBLEM_CACHE = {}


def build_problem(name, params=None):
    """Build (or fetch from the per-process cache) a registered problem."""
    if name not in PROBLEMS:
        raise ConfigError(
            f"unknown problem {name!r}; valid: {', '.join(sorted(PROBLEMS))}"
        )
    params = dict(params or {})
    unknown = set(params) - PROBLEM_PARAM_KEYS[name]
    if unknown:
        raise ConfigError(
            f"unknown parameters for problem {name!r}: {', '.join(sorted(unknown))}"
        )
    key = (name, tuple(sorted(params.items())))
    if key not in _PROBLEM_CACHE:
        _PROBLEM_CACHE[key] = PROBLEMS[name](params)
    return _PROBLEM_CACHE[key]


@dataclass
class ExperimentSpec:
    """A named, fully reproducible benchmark run."""

    name: str
    problem: str
    methods: dict  # label -> OptimizerConfig
    trials: int = 10
    base_seed: int = 1000
    budget_equiv_hf: float = 30000.0
    checkpoint_grid: tuple = WORST_GRID
    problem_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.problem not in PROBLEMS:
            raise ConfigError(
                f"unknown problem {self.problem!r}; valid: {', '.join(sorted(PROBLEMS))}"
            )
        if not self.methods:
            raise ConfigError("experiment needs at least one method")
        grid = np.asarray(self.checkpoint_grid, dtype=float)
        if grid.ndim != 1 or len(grid) == 0 or np.any(np.diff(grid) <= 0):
            raise ConfigError("checkpoint_grid must be strictly increasing")

    def trial_seed(self, t):
        return self.base_seed + t


@dataclass
class CurveSummary:
    """Across-trial statistics of best-so-far values on the grid."""

    grid: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        slack = 1e-12 * np.maximum(1.0, np.abs(self.maximum))
        if np.any(self.mean < self.minimum - slack) or np.any(
            self.mean > self.maximum + slack
        ):
            raise ConfigError("summary violates min <= mean <= max")

    @classmethod
    def from_trials(cls, grid, curves):
        curves = np.asarray(curves, dtype=float)
        return cls(
            grid=np.asarray(grid, dtype=float),
            mean=curves.mean(axis=0),
            std=curves.std(axis=0),
            minimum=curves.min(axis=0),
            maximum=curves.max(axis=0),
        )


def resample_curve(equiv, values, grid):
    """Read a checkpoint step function at the grid points (carry forward)."""
    equiv = np.asarray(equiv, dtype=float)
    values = np.asarray(values, dtype=float)
    idx = np.searchsorted(equiv, np.asarray(grid, dtype=float), side="right") - 1
    if np.any(idx < 0):
        raise ConfigError(
            f"grid point {np.asarray(grid)[idx < 0].min()} precedes the first "
            f"checkpoint at {equiv[0]}"
        )
    return values[idx]


def _run_single_trial(problem_name, problem_params, cfg, seed):
    problem = build_problem(problem_name, problem_params)
    trace = run_method(problem, cfg, seed)
    return np.array(trace.checkpoint_equiv), np.array(trace.checkpoint_value)


def _trial_task(args):
    return _run_single_trial(*args)


def run_trials(spec, workers=1):
    """All raw trial traces: {label: [(equiv, best_value), ...]}.

    Any abort is re-raised naming the offending method and seed.
    """
    tasks = []
    for label, cfg in spec.methods.items():
        cfg = replace(
            cfg, budget_equiv_hf=spec.budget_equiv_hf, record_iterations=False
        )
        for t in range(spec.trials):
            tasks.append((label, t, cfg))
    raw = {label: [None] * spec.trials for label in spec.methods}

    def fail(label, seed, exc):
        raise RuntimeError(
            f"trial aborted: method {label!r}, seed {seed}: {exc}"
        ) from exc

    if workers <= 1:
        for label, t, cfg in tasks:
            seed = spec.trial_seed(t)
            try:
                raw[label][t] = _run_single_trial(
                    spec.problem, spec.problem_params, cfg, seed
                )
            except Exception as exc:
                fail(label, seed, exc)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {}
            for label, t, cfg in tasks:
                seed = spec.trial_seed(t)
                args = (spec.problem, spec.problem_params, cfg, seed)
                futures[pool.submit(_trial_task, args)] = (label, t, seed)
            for future, (label, t, seed) in futures.items():
                try:
                    raw[label][t] = future.result()
                except Exception as exc:
                    fail(label, seed, exc)
    return raw


def summarize(spec, raw):
    grid = np.asarray(spec.checkpoint_grid, dtype=float)
    out = {}
    for label, trials in raw.items():
        curves = np.vstack([resample_curve(eq, bv, grid) for eq, bv in trials])
        out[label] = CurveSummary.from_trials(grid, curves)
    return out


def run_experiment(spec, workers=1):
    """Run every (method, trial) pair and summarize onto the grid."""
    return summarize(spec, run_trials(spec, workers=workers))


def emit_table(summaries, grid):
    """Wide CSV: one row per method, mean/std columns per grid point."""
    grid = np.asarray(grid, dtype=float)
    buf = io.StringIO()
    writer = csv.writer(buf)
    header = ["method"]
    for n in grid:
        tag = f"{n:g}"
        header += [f"mean_{tag}", f"std_{tag}"]
    writer.writerow(header)
    for label, summary in summaries.items():
        row = [label]
        for j in range(len(grid)):
            row += [f"{summary.mean[j]:.4f}", f"{summary.std[j]:.4f}"]
        writer.writerow(row)
    return buf.getvalue()


def emit_convergence_plot(summaries, path, title=None, log_y=True):
    """Mean curve plus min-max band per method, written as an SVG."""
    if not summaries:
        raise ConfigError("nothing to plot: no method summaries")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # keep SVG output byte-reproducible across runs
    plt.rcParams["svg.hashsalt"] = "bfssd"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, summary in summaries.items():
        (line,) = ax.plot(summary.grid, summary.mean, label=label)
        ax.fill_between(
            summary.grid, summary.minimum, summary.maximum,
            color=line.get_color(), alpha=0.2, linewidth=0,
        )
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("equivalent HF evaluations")
    ax.set_ylabel("best objective value")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_outputs(spec, raw, summaries, out_dir):
    """Emit the full directory tree for one experiment.

    <out>/<name>/<method>/trial_<t>.csv  full checkpoint history
    <out>/<name>/summary.csv             method,N,mean,std,min,max
    <out>/<name>/table.csv               wide 4-decimal table
    <out>/<name>/curves.svg              convergence plot
    """
    base = os.path.join(out_dir, spec.name)
    os.makedirs(base, exist_ok=True)
    for label, trials in raw.items():
        mdir = os.path.join(base, label)
        os.makedirs(mdir, exist_ok=True)
        for t, (eq, bv) in enumerate(trials):
            with open(os.path.join(mdir, f"trial_{t}.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["equiv_hf", "best_value"])
                for e, v in zip(eq, bv):
                    writer.writerow([f"{e:.17g}", f"{v:.17g}"])
    grid = np.asarray(spec.checkpoint_grid, dtype=float)
    with open(os.path.join(base, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "N", "mean", "std", "min", "max"])
        for label, summary in summaries.items():
            for j, n in enumerate(grid):
                writer.writerow(
                    [
                        label,
                        f"{n:.17g}",
                        f"{summary.mean[j]:.17g}",
                        f"{summary.std[j]:.17g}",
                        f"{summary.minimum[j]:.17g}",
                        f"{summary.maximum[j]:.17g}",
                    ]
                )
    with open(os.path.join(base, "table.csv"), "w", newline="") as fh:
        fh.write(emit_table(summaries, grid))
    emit_convergence_plot(
        summaries, os.path.join(base, "curves.svg"), title=spec.name
    )
    return base


def run_and_write(spec, out_dir, workers=1):
    raw = run_trials(spec, workers=workers)
    summaries = summarize(spec, raw)
    path = write_outputs(spec, raw, summaries, out_dir)
    return summaries, path


def worst_experiment(trials=10, base_seed=1000, budget=30000.0):
    """All nine methods on the high/low-r pair, dim 1000, ell 20.

    Line-search knobs were tuned once against the reference convergence
    tables and are kept frozen here.
    """
    L, dim, ell = 20.0, 1000, 20
    bf_ls = LineSearchConfig(
        shrink_c=0.9, alpha_max=1.2, max_shrinks_M=15,
        armijo_decrease_mode=MAGNITUDE,
    )
    hf_ls = LineSearchConfig(
        shrink_c=0.9, alpha_max=0.97, max_shrinks_M=31,
        armijo_decrease_mode=SQUARED_MAGNITUDE,
    )
    methods = {
        "bf_ssd": OptimizerConfig(method="bf_ssd", ell=ell, linesearch=bf_ls, n_k=1),
        "hf_ssd": OptimizerConfig(method="hf_ssd", ell=ell, linesearch=hf_ls),
        "fs_ssd": OptimizerConfig(
            method="fs_ssd", ell=ell, fixed_step=ell / (L * dim), fd_central=True
        ),
        "vr_ssd": OptimizerConfig(method="vr_ssd", ell=ell, fixed_step=ell / (L * dim)),
        "gs": OptimizerConfig(method="gs", ell=1, fixed_step=1.0 / (L * dim)),
        "gd": OptimizerConfig(method="gd", fixed_step=1.0 / L),
        "nag": OptimizerConfig(method="nag", fixed_step=1.0 / L),
        "cd": OptimizerConfig(method="cd", fixed_step=1.0 / L),
        "spsa": OptimizerConfig(method="spsa"),
    }
    return ExperimentSpec(
        name="worst_main",
        problem="worst",
        methods=methods,
        trials=trials,
        base_seed=base_seed,
        budget_equiv_hf=budget,
        checkpoint_grid=WORST_GRID,
    )


def worst_sweep_experiment(trials=10, base_seed=1000, budget=20000.0):
    """Subspace-dimension sweep for the two line-search engines."""
    bf_ls = LineSearchConfig(
        shrink_c=0.9, alpha_max=1.2, max_shrinks_M=15,
        armijo_decrease_mode=MAGNITUDE,
    )
    hf_ls = LineSearchConfig(
        shrink_c=0.9, alpha_max=1.0, max_shrinks_M=33,
        armijo_decrease_mode=SQUARED_MAGNITUDE,
    )
    methods = {}
    for ell in (20, 50, 100, 200):
        methods[f"bf_ssd_ell{ell}"] = OptimizerConfig(
            method="bf_ssd", ell=ell, linesearch=bf_ls, n_k=1
        )
        methods[f"hf_ssd_ell{ell}"] = OptimizerConfig(
            method="hf_ssd", ell=ell, linesearch=hf_ls
        )
    return ExperimentSpec(
        name="worst_sweep",
        problem="worst",
        methods=methods,
        trials=trials,
        base_seed=base_seed,
        budget_equiv_hf=budget,
        checkpoint_grid=(100.0, 1000.0, 10000.0, 20000.0),
    )


def kernel_experiment(trials=10, base_seed=1000, budget=50000.0):
    """Kernel ridge regression with the low-rank column-sampled LF."""
    params = {
        "n": 1000, "n_features": 8, "n_clusters": 10, "data_seed": 12345,
        "lengthscale": 1.0, "ridge": 1e-3, "n_inducing": 10,
        "inducing_seed": 12345,
    }
    points, targets = make_clustered_regression(
        n=params["n"], n_features=params["n_features"],
        n_clusters=params["n_clusters"], seed=params["data_seed"],
    )
    rng = RngStream(params["inducing_seed"]).generator()
    kspec = make_kernel_spec(
        points, targets, lengthscale=params["lengthscale"],
        ridge=params["ridge"], n_inducing=params["n_inducing"], rng=rng,
    )
    L = kernel_lipschitz(kspec)
    dim, ell = kspec.dim, 100
    ls = LineSearchConfig(
        shrink_c=0.99, alpha_max=1.0, max_shrinks_M=500,
        armijo_decrease_mode=MAGNITUDE,
    )
    methods = {
        "bf_ssd": OptimizerConfig(method="bf_ssd", ell=ell, linesearch=ls, n_k=1),
        "hf_ssd": OptimizerConfig(method="hf_ssd", ell=ell, linesearch=ls),
        "fs_ssd": OptimizerConfig(
            method="fs_ssd", ell=ell, fixed_step=ell / (L * dim), fd_central=True
        ),
        "vr_ssd": OptimizerConfig(method="vr_ssd", ell=ell, fixed_step=ell / (L * dim)),
    }
    return ExperimentSpec(
        name="kernel_synth",
        problem="kernel_synthetic",
        methods=methods,
        trials=trials,
        base_seed=base_seed,
        budget_equiv_hf=budget,
        checkpoint_grid=(1000.0, 10000.0, 25000.0, 50000.0),
        problem_params=params,
    )


EXPERIMENTS = {
    "worst_main": worst_experiment,
    "worst_sweep": worst_sweep_experiment,
    "kernel_synth": kernel_experiment,
}
