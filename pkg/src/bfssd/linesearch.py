"""Line searches along a descent direction.

Three variants:

* a bi-fidelity backtracking search that tests a cheap surrogate
  ``rho * f_lf + psi`` in place of the expensive objective, where psi is
  a piecewise-linear correction pinned to true HF values at equispaced
  knots;
* plain high-fidelity Armijo backtracking;
* golden-section exact line search.

The surrogate interpolates the HF objective exactly at its knots, so
testing a knot step consumes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import ConfigError

RHO_FLOOR = 1e-12

SQUARED_MAGNITUDE = "squared_magnitude"
MAGNITUDE = "magnitude"


@dataclass
class LineSearchConfig:
    """Armijo backtracking parameters.

    ``beta = None`` defers to the caller's default (the subspace engines
    use ell / (2 D)). ``armijo_decrease_mode`` selects the sufficient
    decrease scale: the squared magnitude of the lifted gradient
    estimate, or the plain magnitude (first-order consistent along a
    unit direction).
    """

    beta: float | None = None
    shrink_c: float = 0.9
    alpha_max: float = 1.0
    max_shrinks_M: int = 30
    armijo_decrease_mode: str = SQUARED_MAGNITUDE

    def __post_init__(self):
        if self.beta is not None and not 0.0 < self.beta <= 0.5:
            raise ConfigError(f"beta must lie in (0, 1/2], got {self.beta}")
        if not 0.0 < self.shrink_c < 1.0:
            raise ConfigError(f"shrink factor must lie in (0, 1), got {self.shrink_c}")
        if self.alpha_max <= 0:
            raise ConfigError(f"alpha_max must be positive, got {self.alpha_max}")
        if self.max_shrinks_M < 1:
            raise ConfigError(f"max_shrinks_M must be >= 1, got {self.max_shrinks_M}")
        if self.armijo_decrease_mode not in (SQUARED_MAGNITUDE, MAGNITUDE):
            raise ConfigError(
                f"unknown armijo_decrease_mode {self.armijo_decrease_mode!r}"
            )


@dataclass
class Surrogate1D:
    """One-dimensional surrogate of f_hf(x + alpha v) on [0, alpha_max]."""

    rho: float
    knots: np.ndarray  # (n_k + 1,) equispaced, knots[0] = 0
    hf_at_knots: np.ndarray  # recorded f_hf(x + knot * v)
    psi_at_knots: np.ndarray  # hf_at_knots - rho * f_lf at the knots
    base_point: np.ndarray
    direction: np.ndarray
    alpha_max: float

    def knot_index(self, alpha):
        """Index of the knot equal to alpha, or None."""
        j = int(np.searchsorted(self.knots, alpha))
        if j < len(self.knots) and self.knots[j] == alpha:
            return j
        return None


def build_surrogate(problem, ledger, x, v, n_k, alpha_max, known_hf_at_x):
    """Construct the surrogate: n_k counted HF calls, n_k + 1 LF calls.

    The knot at alpha = 0 reuses ``known_hf_at_x``. rho falls back to 0
    when f_lf(x) is negligible relative to f_hf(x), which degrades the
    surrogate to pure interpolation of the HF knots but keeps the
    interpolation property intact.
    """
    if n_k < 1:
        raise ConfigError(f"n_k must be >= 1, got {n_k}")
    knots = alpha_max * np.arange(n_k + 1) / n_k
    lf_at_x = float(ledger.eval_lf(problem, x))
    if abs(lf_at_x) < RHO_FLOOR * max(1.0, abs(known_hf_at_x)):
        rho = 0.0
    else:
        rho = known_hf_at_x / lf_at_x
    steps = x[None, :] + knots[1:, None] * v[None, :]
    hf_at_knots = np.empty(n_k + 1)
    hf_at_knots[0] = known_hf_at_x
    hf_at_knots[1:] = ledger.eval_hf(problem, steps)
    lf_at_knots = np.empty(n_k + 1)
    lf_at_knots[0] = lf_at_x
    lf_at_knots[1:] = ledger.eval_lf(problem, steps)
    psi = hf_at_knots - rho * lf_at_knots
    return Surrogate1D(rho, knots, hf_at_knots, psi, x, v, float(alpha_max))


def eval_surrogate(surrogate, problem, ledger, alpha):
    """Surrogate value at alpha: one counted LF call, or free at a knot."""
    if not 0.0 <= alpha <= surrogate.alpha_max:
        raise ConfigError(
            f"alpha {alpha} outside [0, {surrogate.alpha_max}]"
        )
    j = surrogate.knot_index(alpha)
    if j is not None:
        return float(surrogate.hf_at_knots[j])
    point = surrogate.base_point + alpha * surrogate.direction
    lf_val = float(ledger.eval_lf(problem, point))
    psi_val = float(np.interp(alpha, surrogate.knots, surrogate.psi_at_knots))
    return surrogate.rho * lf_val + psi_val


def bf_backtracking(surrogate, cfg, problem, ledger, hf_at_x, decrease_scale):
    """Largest step in {alpha_max * c^m} whose surrogate value passes Armijo.

    Only LF evaluations are consumed. If every candidate fails, the
    smallest grid step alpha_max * c^M is returned unconditionally.
    """
    beta = cfg.beta
    if beta is None:
        raise ConfigError("bf_backtracking needs an explicit beta")
    c, M = cfg.shrink_c, cfg.max_shrinks_M
    for m in range(M + 1):
        alpha = cfg.alpha_max * c**m
        value = eval_surrogate(surrogate, problem, ledger, alpha)
        if value <= hf_at_x - beta * alpha * decrease_scale:
            return alpha
    return cfg.alpha_max * c**M


class BacktrackResult(NamedTuple):
    alpha: float
    value: float  # HF value at x - alpha * direction
    tests: int  # counted HF evaluations consumed
    accepted: bool  # False when the fallback step was forced


def hf_backtracking(problem, ledger, x, v_tilde, cfg, hf_at_x, decrease_scale=None):
    """Armijo backtracking testing the true objective along -v_tilde.

    Each test is one counted HF evaluation, so the search consumes
    exactly shrinks + 1 of them; ``hf_at_x`` is the already-counted base
    value. By default the direction is the unnormalized lifted gradient
    estimate and the decrease scale is its squared norm; engines that
    normalize pass the unit direction together with an explicit
    ``decrease_scale``.

    Returns a :class:`BacktrackResult`; on all-fail the forced step is
    the smallest grid step and ``value`` is the objective at the last
    tested candidate, which is that same smallest step.
    """
    beta = cfg.beta
    if beta is None:
        raise ConfigError("hf_backtracking needs an explicit beta")
    if decrease_scale is None:
        decrease_scale = float(v_tilde @ v_tilde)
    c, M = cfg.shrink_c, cfg.max_shrinks_M
    value = np.nan
    for m in range(M + 1):
        alpha = cfg.alpha_max * c**m
        value = float(ledger.eval_hf(problem, x - alpha * v_tilde))
        if value <= hf_at_x - beta * alpha * decrease_scale:
            return BacktrackResult(alpha, value, m + 1, True)
    return BacktrackResult(cfg.alpha_max * c**M, value, M + 1, False)


def exact_line_search(problem, ledger, x, v_tilde, alpha_max, tol_factor=1e-8):
    """Golden-section minimization of f_hf(x - alpha v_tilde) on [0, alpha_max].

    Runs to interval width tol_factor * alpha_max; every probe is a
    counted HF evaluation. On non-unimodal profiles this returns a local
    minimizer.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, float(alpha_max)
    tol = tol_factor * alpha_max

    def phi(alpha):
        return float(ledger.eval_hf(problem, x - alpha * v_tilde))

    a = hi - invphi * (hi - lo)
    b = lo + invphi * (hi - lo)
    fa, fb = phi(a), phi(b)
    while hi - lo > tol:
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = hi - invphi * (hi - lo)
            fa = phi(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + invphi * (hi - lo)
            fb = phi(b)
    return 0.5 * (lo + hi)


def surrogate_profile(surrogate, problem, ledger, alphas):
    """Diagnostic sweep: (alpha, surrogate value, true HF value) rows.

    The true values are counted HF evaluations; this is a debugging aid,
    not part of any optimizer loop.
    """
    alphas = np.asarray(alphas, dtype=float)
    rows = np.empty((alphas.size, 3))
    for i, a in enumerate(alphas):
        sval = eval_surrogate(surrogate, problem, ledger, float(a))
        point = surrogate.base_point + a * surrogate.direction
        tval = float(ledger.eval_hf(problem, point))
        rows[i] = (a, sval, tval)
    return rows
