"""Haar-distributed subspace sampling and projected finite-difference
gradient estimation.

A projection is a D x ell matrix P whose columns are an orthonormal
frame drawn from the Haar distribution, scaled by sqrt(D/ell) so that
P^T P = (D/ell) I and E[P P^T] = I. Directional derivatives along the
columns are estimated by finite differences and lifted back to R^D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError


@dataclass(frozen=True)
class ProjectionMatrix:
    entries: np.ndarray  # (dim, subdim)
    dim: int
    subdim: int

    def __post_init__(self):
        if not 1 <= self.subdim <= self.dim:
            raise ConfigError(f"need 1 <= ell <= D, got ell={self.subdim}, D={self.dim}")
        if self.entries.shape != (self.dim, self.subdim):
            raise ConfigError(
                f"projection shape {self.entries.shape} != ({self.dim}, {self.subdim})"
            )


@dataclass(frozen=True)
class GradientEstimate:
    projected: np.ndarray  # (ell,) directional slopes
    lifted: np.ndarray  # (D,) P @ projected
    direction: np.ndarray | None  # unit vector, None when magnitude == 0
    magnitude: float  # ||lifted||


def sample_projection(dim, ell, rng):
    """Draw a scaled Haar frame: QR of a Gaussian matrix, sign-fixed.

    The sign fix (forcing diag(R) > 0) is what makes the QR factor
    genuinely Haar-distributed rather than biased by LAPACK's sign
    convention.
    """
    if ell > dim:
        raise ConfigError(f"subspace dim {ell} exceeds ambient dim {dim}")
    A = rng.standard_normal((dim, ell))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diag(R))
    return ProjectionMatrix(Q * np.sqrt(dim / ell), dim, ell)


def fd_delta(x, scale=1e-6):
    """Finite-difference increment, relative to the iterate's magnitude."""
    return scale * max(1.0, float(np.linalg.norm(x)))


def estimate_gradient(problem, ledger, x, P, delta, base_value=None, central=False):
    """Projected finite-difference gradient at x along the columns of P.

    Forward differences reuse ``base_value`` = f_hf(x) and consume
    exactly ell counted HF evaluations; central differences ignore the
    base value and consume 2 ell.
    """
    if delta <= 0:
        raise ConfigError(f"fd increment must be positive, got {delta}")
    cols = P.entries.T  # (ell, dim) probe directions
    if central:
        f_plus = ledger.eval_hf(problem, x[None, :] + delta * cols)
        f_minus = ledger.eval_hf(problem, x[None, :] - delta * cols)
        g = (f_plus - f_minus) / (2.0 * delta)
    else:
        if base_value is None:
            raise ConfigError("forward differences need the base value f_hf(x)")
        probes = ledger.eval_hf(problem, x[None, :] + delta * cols)
        g = (probes - base_value) / delta
    lifted = P.entries @ g
    magnitude = float(np.linalg.norm(lifted))
    direction = lifted / magnitude if magnitude > 0 else None
    return GradientEstimate(g, lifted, direction, magnitude)
