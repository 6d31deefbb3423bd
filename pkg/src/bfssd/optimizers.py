"""The nine zeroth-order optimization engines.

All engines share one contract: they spend a budget measured in
equivalent HF evaluations, record a checkpoint at every evaluation of a
candidate iterate, and are bit-reproducible from (method, config, seed).

Methods:

* ``bf_ssd``   subspace descent, bi-fidelity surrogate line search
* ``hf_ssd``   subspace descent, Armijo backtracking on the true objective
* ``fs_ssd``   subspace descent, fixed step
* ``vr_ssd``   subspace descent with epoch-anchored variance reduction
* ``gs``       single-direction subspace descent (ell = 1), fixed step
* ``gd``       full finite-difference gradient descent
* ``nag``      accelerated gradient descent with momentum
* ``cd``       cyclic coordinate descent
* ``spsa``     simultaneous-perturbation stochastic approximation
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ConfigError, EvaluationLedger, RngStream, RunTrace
from .linesearch import (
    MAGNITUDE,
    SQUARED_MAGNITUDE,
    LineSearchConfig,
    bf_backtracking,
    build_surrogate,
    hf_backtracking,
)
from .subspace import estimate_gradient, fd_delta, sample_projection

ZERO_GRADIENT_RESAMPLES = 3

NAG_ADAPTIVE = "adaptive"
NAG_CLASSICAL = "classical"


@dataclass
class OptimizerConfig:
    """Everything an engine run needs besides the problem and the seed.

    ``fixed_step`` drives the non-line-search methods; ``linesearch``
    drives bf_ssd and hf_ssd. ``spsa_gains`` is (a, A, a_exp, c0, c_exp)
    in the standard decaying-gain parameterization. ``x0 = None`` starts
    from the origin.
    """

    method: str = "bf_ssd"
    ell: int = 20
    fixed_step: float | None = None
    linesearch: LineSearchConfig = field(default_factory=LineSearchConfig)
    n_k: int = 1
    fd_scale: float = 1e-6
    fd_central: bool = False
    budget_equiv_hf: float = 1000.0
    spsa_gains: tuple = (0.04, 150.0, 0.602, 0.05, 0.101)
    vr_epoch_length: int | None = None
    nag_momentum: str = NAG_ADAPTIVE
    reuse_base: bool = True
    x0: np.ndarray | None = None
    record_iterations: bool = True
    ledger_preload_hf: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(
                f"unknown method {self.method!r}; valid: {', '.join(sorted(METHODS))}"
            )
        if self.ell < 1:
            raise ConfigError(f"ell must be >= 1, got {self.ell}")
        if self.budget_equiv_hf < 0:
            raise ConfigError(f"budget must be >= 0, got {self.budget_equiv_hf}")
        if self.n_k < 1:
            raise ConfigError(f"n_k must be >= 1, got {self.n_k}")
        if self.fd_scale <= 0:
            raise ConfigError(f"fd_scale must be positive, got {self.fd_scale}")
        if len(self.spsa_gains) != 5:
            raise ConfigError("spsa_gains must be (a, A, a_exp, c0, c_exp)")
        if self.nag_momentum not in (NAG_ADAPTIVE, NAG_CLASSICAL):
            raise ConfigError(f"unknown nag_momentum {self.nag_momentum!r}")

    def digest(self):
        text = repr(sorted((k, repr(v)) for k, v in vars(self).items()))
        return hashlib.sha1(text.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class IterationRecord:
    k: int
    alpha: float
    magnitude: float  # norm of the lifted gradient estimate
    value: float  # HF value at the new iterate


class _Run:
    """Shared bookkeeping for one engine run."""

    def __init__(self, problem, cfg, seed, ledger=None):
        self.problem = problem
        self.cfg = cfg
        self.ledger = ledger if ledger is not None else EvaluationLedger(
            problem.lf_cost_ratio, preload_hf=cfg.ledger_preload_hf
        )
        self.trace = RunTrace(
            method_name=cfg.method, seed=int(seed), config_digest=cfg.digest()
        )
        self.rng = RngStream(seed).generator()
        if cfg.x0 is not None:
            self.x = np.array(cfg.x0, dtype=float)
            if self.x.shape != (problem.dim,):
                raise ConfigError(
                    f"x0 has shape {self.x.shape}, problem dim is {problem.dim}"
                )
        else:
            self.x = np.zeros(problem.dim)
        self.fx = float(self.ledger.eval_hf(problem, self.x))
        self.checkpoint(self.fx)
        self.k = 0

    def checkpoint(self, value):
        self.trace.record_checkpoint(self.ledger.equivalent_hf, value)

    def within_budget(self):
        return self.ledger.equivalent_hf < self.cfg.budget_equiv_hf

    def record(self, alpha, magnitude, value):
        if self.cfg.record_iterations:
            self.trace.iterations.append(
                IterationRecord(self.k, float(alpha), float(magnitude), float(value))
            )
        self.k += 1


def _ssd_beta(cfg, dim):
    """Armijo beta, defaulting to ell / (2 dim) and validated against it."""
    bound = cfg.ell / (2.0 * dim)
    beta = cfg.linesearch.beta
    if beta is None:
        return bound
    if beta > bound + 1e-15:
        raise ConfigError(
            f"beta={beta} exceeds the subspace stability bound ell/(2 D)={bound}"
        )
    return beta


def _estimate(run, central=None):
    """Sample a projection and estimate the gradient, with resampling on
    an exactly zero magnitude. Returns None when the estimate stays zero."""
    cfg = run.cfg
    central = cfg.fd_central if central is None else central
    for _ in range(ZERO_GRADIENT_RESAMPLES + 1):
        P = sample_projection(run.problem.dim, cfg.ell, run.rng)
        delta = fd_delta(run.x, cfg.fd_scale)
        est = estimate_gradient(
            run.problem, run.ledger, run.x, P, delta,
            base_value=run.fx, central=central,
        )
        if est.magnitude > 0:
            return P, est
    return None


def _decrease_scale(mode, magnitude):
    if mode == SQUARED_MAGNITUDE:
        return magnitude * magnitude
    if mode == MAGNITUDE:
        return magnitude
    raise ConfigError(f"unknown armijo_decrease_mode {mode!r}")


def run_bf_ssd(problem, cfg, seed, ledger=None):
    """Subspace descent with the bi-fidelity surrogate line search.

    Per iteration: ell HF probes, n_k HF knot evaluations, one HF
    evaluation of the accepted iterate, plus LF calls for the surrogate
    (one per non-knot backtracking test).
    """
    run = _Run(problem, cfg, seed, ledger)
    ls = replace(cfg.linesearch, beta=_ssd_beta(cfg, problem.dim))
    while run.within_budget():
        picked = _estimate(run)
        if picked is None:
            break
        _, est = picked
        search_dir = -est.direction  # descent sign
        surrogate = build_surrogate(
            problem, run.ledger, run.x, search_dir, cfg.n_k, ls.alpha_max, run.fx
        )
        scale = _decrease_scale(ls.armijo_decrease_mode, est.magnitude)
        alpha = bf_backtracking(surrogate, ls, problem, run.ledger, run.fx, scale)
        run.x = run.x + alpha * search_dir
        run.fx = float(run.ledger.eval_hf(problem, run.x))
        run.checkpoint(run.fx)
        run.record(alpha, est.magnitude, run.fx)
    return run.trace


def run_hf_ssd(problem, cfg, seed, ledger=None):
    """Subspace descent with Armijo backtracking on the true objective.

    The accepted (or, on all-fail, the smallest-step) candidate's
    evaluation doubles as the new iterate value, so one iteration costs
    ell + tests HF evaluations.
    """
    run = _Run(problem, cfg, seed, ledger)
    ls = replace(cfg.linesearch, beta=_ssd_beta(cfg, problem.dim))
    while run.within_budget():
        picked = _estimate(run)
        if picked is None:
            break
        _, est = picked
        scale = _decrease_scale(ls.armijo_decrease_mode, est.magnitude)
        result = hf_backtracking(
            problem, run.ledger, run.x, est.direction, ls, run.fx,
            decrease_scale=scale,
        )
        run.x = run.x - result.alpha * est.direction
        run.fx = result.value
        run.checkpoint(run.fx)
        run.record(result.alpha, est.magnitude, run.fx)
    return run.trace


def run_fs_ssd(problem, cfg, seed, ledger=None):
    """Fixed-step subspace descent along the normalized lifted estimate."""
    run = _Run(problem, cfg, seed, ledger)
    step = cfg.fixed_step
    if step is None:
        raise ConfigError("fs_ssd needs fixed_step (the usual choice is ell/(L D))")
    while run.within_budget():
        picked = _estimate(run)
        if picked is None:
            break
        _, est = picked
        run.x = run.x - step * est.direction
        run.fx = float(run.ledger.eval_hf(problem, run.x))
        run.checkpoint(run.fx)
        run.record(step, est.magnitude, run.fx)
    return run.trace


def run_gs(problem, cfg, seed, ledger=None):
    """Single random direction per iteration: fs_ssd with ell forced to 1."""
    cfg = replace(cfg, ell=1)
    if cfg.fixed_step is None:
        raise ConfigError("gs needs fixed_step (the usual choice is 1/(L D))")
    return run_fs_ssd(problem, cfg, seed, ledger)


def run_vr_ssd(problem, cfg, seed, ledger=None):
    """Variance-reduced subspace descent with epoch anchors.

    Each epoch starts by snapshotting a full finite-difference gradient
    at the anchor (D + 1 HF calls). Inner steps correct the anchor
    gradient by projected differences at the current point and the
    anchor (2 ell HF calls), stepping unnormalized with ``fixed_step``.
    """
    run = _Run(problem, cfg, seed, ledger)
    dim = problem.dim
    step = cfg.fixed_step
    if step is None:
        raise ConfigError("vr_ssd needs fixed_step (the usual choice is ell/(L D))")
    epoch = cfg.vr_epoch_length
    if epoch is None:
        epoch = int(np.ceil(dim / cfg.ell))
    if epoch < 1:
        raise ConfigError(f"vr_epoch_length must be >= 1, got {epoch}")
    anchor_x = anchor_f = anchor_mu = None
    inner = 0
    while run.within_budget():
        if anchor_x is None or inner % epoch == 0:
            anchor_f = float(run.ledger.eval_hf(problem, run.x))
            d0 = fd_delta(run.x, cfg.fd_scale)
            probes = np.tile(run.x, (dim, 1))
            probes[np.arange(dim), np.arange(dim)] += d0
            anchor_mu = (run.ledger.eval_hf(problem, probes) - anchor_f) / d0
            anchor_x = run.x.copy()
        P = sample_projection(dim, cfg.ell, run.rng)
        delta = fd_delta(run.x, cfg.fd_scale)
        g_here = (
            run.ledger.eval_hf(problem, run.x[None, :] + delta * P.entries.T) - run.fx
        ) / delta
        d_anchor = fd_delta(anchor_x, cfg.fd_scale)
        g_anchor = (
            run.ledger.eval_hf(problem, anchor_x[None, :] + d_anchor * P.entries.T)
            - anchor_f
        ) / d_anchor
        v_tilde = P.entries @ (g_here - g_anchor) + anchor_mu
        run.x = run.x - step * v_tilde
        run.fx = float(run.ledger.eval_hf(problem, run.x))
        run.checkpoint(run.fx)
        run.record(step, float(np.linalg.norm(v_tilde)), run.fx)
        inner += 1
    return run.trace


def _full_fd_gradient(run, x, base_value):
    """Forward-difference gradient over all coordinates (D probes)."""
    dim = run.problem.dim
    delta = fd_delta(x, run.cfg.fd_scale)
    probes = np.tile(x, (dim, 1))
    probes[np.arange(dim), np.arange(dim)] += delta
    return (run.ledger.eval_hf(run.problem, probes) - base_value) / delta


def run_gd(problem, cfg, seed, ledger=None):
    """Finite-difference gradient descent: D probes + 1 iterate eval."""
    run = _Run(problem, cfg, seed, ledger)
    step = cfg.fixed_step
    if step is None:
        raise ConfigError("gd needs fixed_step (the usual choice is 1/L)")
    while run.within_budget():
        g = _full_fd_gradient(run, run.x, run.fx)
        run.x = run.x - step * g
        run.fx = float(run.ledger.eval_hf(problem, run.x))
        run.checkpoint(run.fx)
        run.record(step, float(np.linalg.norm(g)), run.fx)
    return run.trace


def run_nag(problem, cfg, seed, ledger=None):
    """Accelerated gradient descent with a decaying momentum term.

    The default schedule is the adaptive theta recursion
    theta' = (1 + sqrt(1 + 4 theta^2)) / 2 applied in optimized-gradient
    form; ``nag_momentum = "classical"`` switches to the (k-1)/(k+2)
    coefficient. The gradient is taken at the momentum point, which
    needs its own base evaluation: D + 2 HF calls per iteration.
    """
    run = _Run(problem, cfg, seed, ledger)
    step = cfg.fixed_step
    if step is None:
        raise ConfigError("nag needs fixed_step (the usual choice is 1/L)")
    z = run.x.copy()
    theta = 1.0
    k = 0
    while run.within_budget():
        f_z = float(run.ledger.eval_hf(problem, z))
        g = _full_fd_gradient(run, z, f_z)
        y_new = z - step * g
        if cfg.nag_momentum == NAG_ADAPTIVE:
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            z = (
                y_new
                + ((theta - 1.0) / theta_new) * (y_new - run.x)
                + (theta / theta_new) * (y_new - z)
            )
            theta = theta_new
        else:
            # the momentum point for the upcoming iteration j = k + 1 is
            # x_{j} + (j - 1)/(j + 2) (x_j - x_{j-1})
            momentum = k / (k + 3.0)
            z = y_new + momentum * (y_new - run.x)
        run.x = y_new
        run.fx = float(run.ledger.eval_hf(problem, run.x))
        run.checkpoint(run.fx)
        run.record(step, float(np.linalg.norm(g)), run.fx)
        k += 1
    return run.trace


def run_cd(problem, cfg, seed, ledger=None):
    """Cyclic coordinate descent: one probe and one iterate eval per step."""
    run = _Run(problem, cfg, seed, ledger)
    step = cfg.fixed_step
    if step is None:
        raise ConfigError("cd needs fixed_step (the usual choice is 1/L)")
    dim = problem.dim
    i = 0
    while run.within_budget():
        delta = fd_delta(run.x, cfg.fd_scale)
        probe = run.x.copy()
        probe[i] += delta
        g_i = (float(run.ledger.eval_hf(problem, probe)) - run.fx) / delta
        run.x[i] -= step * g_i
        run.fx = float(run.ledger.eval_hf(problem, run.x))
        run.checkpoint(run.fx)
        run.record(step, abs(g_i), run.fx)
        i = (i + 1) % dim
    return run.trace


def run_spsa(problem, cfg, seed, ledger=None):
    """Simultaneous-perturbation stochastic approximation.

    Two-sided probes along a Rademacher direction with the standard
    decaying gains a_k = a/(A + k + 1)^a_exp and c_k = c0/(k + 1)^c_exp;
    2 probe HF calls plus 1 iterate evaluation per iteration.
    """
    run = _Run(problem, cfg, seed, ledger)
    a, A, a_exp, c0, c_exp = cfg.spsa_gains
    dim = problem.dim
    k = 0
    while run.within_budget():
        c_k = c0 / (k + 1) ** c_exp
        a_k = a / (A + k + 1) ** a_exp
        delta_dir = run.rng.integers(0, 2, size=dim) * 2.0 - 1.0
        f_plus = float(run.ledger.eval_hf(problem, run.x + c_k * delta_dir))
        f_minus = float(run.ledger.eval_hf(problem, run.x - c_k * delta_dir))
        slope = (f_plus - f_minus) / (2 * c_k)
        run.x = run.x - a_k * slope * delta_dir
        run.fx = float(run.ledger.eval_hf(problem, run.x))
        run.checkpoint(run.fx)
        run.record(a_k, abs(slope) * np.sqrt(dim), run.fx)
        k += 1
    return run.trace


METHODS = {
    "bf_ssd": run_bf_ssd,
    "hf_ssd": run_hf_ssd,
    "fs_ssd": run_fs_ssd,
    "vr_ssd": run_vr_ssd,
    "gs": run_gs,
    "gd": run_gd,
    "nag": run_nag,
    "cd": run_cd,
    "spsa": run_spsa,
}


def run_method(problem, cfg, seed, ledger=None):
    """Dispatch to the configured engine."""
    if cfg.ell > problem.dim:
        raise ConfigError(f"ell={cfg.ell} exceeds problem dim {problem.dim}")
    return METHODS[cfg.method](problem, cfg, seed, ledger)
