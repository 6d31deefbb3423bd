"""Shared domain types: objectives, bi-fidelity pairing, evaluation
accounting, run traces, and the deterministic RNG contract.

Every optimizer in this library is budgeted in *equivalent high-fidelity
evaluations*: one HF call costs 1, one LF call costs ``lf_cost_ratio``.
The :class:`EvaluationLedger` owns that arithmetic, and every objective
evaluation anywhere in a run must pass through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HF = "hf"
LF = "lf"


class ConfigError(ValueError):
    """Invalid configuration (bad field value, unknown key, ...)."""


class EvaluationError(RuntimeError):
    """An objective returned a non-finite value; the run must abort."""


def _describe_point(x):
    x = np.asarray(x, dtype=float)
    head = np.array2string(x.ravel()[:4], precision=6, separator=", ")
    return f"dim={x.size}, norm={np.linalg.norm(x):.6g}, head={head}"


class ObjectiveHandle:
    """A deterministic scalar objective over R^dim.

    ``fn`` must accept an (n, dim) array and return an (n,) array of
    values. Batched evaluation is the native interface because the
    subspace methods probe many points per iteration; single vectors are
    promoted to a batch of one.
    """

    def __init__(self, fn, dim, name="objective"):
        if dim <= 0:
            raise ConfigError(f"objective dim must be positive, got {dim}")
        self.fn = fn
        self.dim = int(dim)
        self.name = name

    def eval_batch(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.dim:
            raise ConfigError(
                f"{self.name}: expected points of dim {self.dim}, got {X.shape[1]}"
            )
        vals = np.asarray(self.fn(X), dtype=float).reshape(-1)
        if vals.shape[0] != X.shape[0]:
            raise EvaluationError(
                f"{self.name}: returned {vals.shape[0]} values for {X.shape[0]} points"
            )
        bad = ~np.isfinite(vals)
        if bad.any():
            i = int(np.argmax(bad))
            raise EvaluationError(
                f"{self.name}: non-finite value {vals[i]} at point ({_describe_point(X[i])})"
            )
        return vals[0] if single else vals

    def __call__(self, x):
        return float(self.eval_batch(np.asarray(x, dtype=float)))


@dataclass
class BiFidelityProblem:
    """An expensive objective paired with a cheap approximation of it."""

    hf: ObjectiveHandle
    lf: ObjectiveHandle
    lf_cost_ratio: float
    name: str = "problem"
    analytic_gradient: object = None  # optional callable, test oracle only
    known_optimum: float | None = None

    def __post_init__(self):
        if self.hf.dim != self.lf.dim:
            raise ConfigError(
                f"fidelity dims differ: hf {self.hf.dim} vs lf {self.lf.dim}"
            )
        if not 0.0 < self.lf_cost_ratio <= 1.0:
            raise ConfigError(f"lf_cost_ratio must be in (0, 1], got {self.lf_cost_ratio}")

    @property
    def dim(self):
        return self.hf.dim


class EvaluationLedger:
    """Counts HF and LF calls and converts them to equivalent HF spend.

    ``preload_hf`` charges a fixed number of HF evaluations at
    construction, for problems whose LF required an upfront budget to
    build.
    """

    def __init__(self, lf_cost_ratio, preload_hf=0):
        if lf_cost_ratio <= 0:
            raise ConfigError(f"lf_cost_ratio must be positive, got {lf_cost_ratio}")
        self.lf_cost_ratio = float(lf_cost_ratio)
        self.hf_calls = int(preload_hf)
        self.lf_calls = 0

    @property
    def equivalent_hf(self):
        return self.hf_calls + self.lf_calls * self.lf_cost_ratio

    def eval_hf(self, problem, X):
        """Counted HF evaluation of a point or an (n, dim) batch."""
        X = np.asarray(X, dtype=float)
        self.hf_calls += 1 if X.ndim == 1 else X.shape[0]
        return problem.hf.eval_batch(X)

    def eval_lf(self, problem, X):
        """Counted LF evaluation of a point or an (n, dim) batch."""
        X = np.asarray(X, dtype=float)
        self.lf_calls += 1 if X.ndim == 1 else X.shape[0]
        return problem.lf.eval_batch(X)


def counted_eval(problem, ledger, fidelity, x):
    """Evaluate one point at the requested fidelity, counting the call."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ConfigError("counted_eval takes a single point; use the ledger batch API")
    if fidelity == HF:
        return float(ledger.eval_hf(problem, x))
    if fidelity == LF:
        return float(ledger.eval_lf(problem, x))
    raise ConfigError(f"unknown fidelity {fidelity!r}")


@dataclass
class RunTrace:
    """Checkpoints of (equivalent HF spend, best HF value seen) for one run.

    ``best_value`` records the running minimum of observed candidate
    values, so the trace is a non-increasing step function of spend.
    """

    method_name: str = ""
    seed: int = 0
    config_digest: str = ""
    checkpoint_equiv: list = field(default_factory=list)
    checkpoint_value: list = field(default_factory=list)
    iterations: list = field(default_factory=list)

    def record_checkpoint(self, equiv_hf, observed_hf_value):
        if self.checkpoint_equiv and equiv_hf <= self.checkpoint_equiv[-1]:
            raise ValueError(
                f"checkpoint spend must increase: {equiv_hf} after {self.checkpoint_equiv[-1]}"
            )
        best = observed_hf_value
        if self.checkpoint_value:
            best = min(best, self.checkpoint_value[-1])
        self.checkpoint_equiv.append(float(equiv_hf))
        self.checkpoint_value.append(float(best))

    @property
    def best_value(self):
        if not self.checkpoint_value:
            raise ValueError("empty trace")
        return self.checkpoint_value[-1]

    def read_at(self, grid):
        """Best value at each grid spend, last observation carried forward."""
        eq = np.asarray(self.checkpoint_equiv)
        vals = np.asarray(self.checkpoint_value)
        grid = np.atleast_1d(np.asarray(grid, dtype=float))
        idx = np.searchsorted(eq, grid, side="right") - 1
        if (idx < 0).any():
            bad = grid[idx < 0].min()
            raise ValueError(f"grid point {bad} precedes the first checkpoint at {eq[0]}")
        return vals[idx]


def record_checkpoint(trace, ledger, observed_hf_value):
    """Append the current spend and the running-minimum value to a trace."""
    trace.record_checkpoint(ledger.equivalent_hf, observed_hf_value)


class RngStream:
    """Deterministic, splittable randomness.

    ``child(index)`` is a pure function of (seed, index): it never
    mutates the parent, so trial streams can be re-derived in any order.
    """

    def __init__(self, seed, _spawn_key=()):
        self.seed = int(seed)
        self._spawn_key = tuple(_spawn_key)

    def child(self, index):
        return RngStream(self.seed, self._spawn_key + (int(index),))

    def generator(self):
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self._spawn_key)
        return np.random.Generator(np.random.PCG64(seq))
