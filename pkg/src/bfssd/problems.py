"""Benchmark problems and bi-fidelity pair constructors.

Included:

* the classical worst-case smooth convex function, with intrinsic
  dimension r as the fidelity knob (HF uses a large r, LF a small one);
* kernel ridge regression in its dual form, with a Nystrom low-rank
  surrogate as the LF objective;
* generic pair recipes: low-rank quadratic LF and fixed-subsample LF;
* CSV ingestion and a synthetic clustered-regression generator for the
  kernel problem.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve
from scipy.spatial.distance import cdist

from .core import BiFidelityProblem, ConfigError, ObjectiveHandle


# ---------------------------------------------------------------------------
# Worst-case smooth convex function


@dataclass(frozen=True)
class WorstFunctionSpec:
    dim: int
    r: int  # intrinsic dimension; only coordinates 0..r-1 participate
    L: float  # gradient Lipschitz constant of the quadratic part

    def __post_init__(self):
        if not 1 <= self.r <= self.dim:
            raise ConfigError(f"need 1 <= r <= dim, got r={self.r}, dim={self.dim}")
        if self.L <= 0:
            raise ConfigError(f"L must be positive, got {self.L}")


def worst_function_value(spec, X):
    """Evaluate the worst function at a point or an (n, dim) batch.

    f(x) = L ((x_1^2 + sum (x_i - x_{i+1})^2 + x_r^2) / 8 - x_1 / 4)
           + L r / (8 (r + 1))

    The constant makes the global minimum value exactly 0.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    r, L = spec.r, spec.L
    c0 = L * r / (8.0 * (r + 1))
    xs = X[:, :r]
    q = xs[:, 0] ** 2 + ((xs[:, :-1] - xs[:, 1:]) ** 2).sum(axis=1) + xs[:, -1] ** 2
    vals = L * (q / 8.0 - xs[:, 0] / 4.0) + c0
    return float(vals[0]) if single else vals


def worst_function_minimizer(spec):
    """Solve the r x r tridiagonal stationarity system (test oracle)."""
    r = spec.r
    T = 2.0 * np.eye(r)
    idx = np.arange(r - 1)
    T[idx, idx + 1] = -1.0
    T[idx + 1, idx] = -1.0
    rhs = np.zeros(r)
    rhs[0] = 1.0
    x = np.zeros(spec.dim)
    x[:r] = solve(T, rhs, assume_a="pos")
    return x


def make_worst_pair(dim=1000, r_hf=100, r_lf=2, L=20.0):
    """HF and LF worst functions differing only in intrinsic dimension."""
    if not r_lf < r_hf < dim:
        raise ConfigError(f"need r_lf < r_hf < dim, got {r_lf}, {r_hf}, {dim}")
    hf_spec = WorstFunctionSpec(dim, r_hf, L)
    lf_spec = WorstFunctionSpec(dim, r_lf, L)
    return BiFidelityProblem(
        hf=ObjectiveHandle(lambda X: worst_function_value(hf_spec, X), dim, "worst_hf"),
        lf=ObjectiveHandle(lambda X: worst_function_value(lf_spec, X), dim, "worst_lf"),
        lf_cost_ratio=r_lf / r_hf,
        name="worst",
        known_optimum=0.0,
    )


# ---------------------------------------------------------------------------
# Kernel ridge regression with a Nystrom LF


def rbf_gram(points, lengthscale):
    """Gaussian kernel Gram matrix K[i,j] = exp(-||xi-xj||^2 / (2 ls^2))."""
    if lengthscale <= 0:
        raise ConfigError(f"lengthscale must be positive, got {lengthscale}")
    X = np.asarray(points, dtype=float)
    sq = cdist(X, X, "sqeuclidean")
    return np.exp(-sq / (2.0 * lengthscale**2))


@dataclass
class KernelRidgeSpec:
    """Dual kernel ridge data: f(a) = a^T K a - 2 <a, y> + ridge ||a||^2."""

    gram: np.ndarray
    targets: np.ndarray
    ridge: float
    nystrom_set: np.ndarray  # sorted inducing indices, size l
    _chol: object = field(default=None, repr=False, compare=False)
    _cross: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        K = np.asarray(self.gram, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ConfigError(f"gram matrix must be square, got {K.shape}")
        if np.abs(K - K.T).max() > 1e-10:
            raise ConfigError("gram matrix is not symmetric within 1e-10")
        if self.ridge <= 0:
            raise ConfigError(f"ridge must be positive, got {self.ridge}")
        S = np.asarray(self.nystrom_set, dtype=int)
        if S.size == 0 or S.size > K.shape[0]:
            raise ConfigError(f"inducing set size {S.size} invalid for D={K.shape[0]}")
        self.gram = K
        self.targets = np.asarray(self.targets, dtype=float)
        self.nystrom_set = np.sort(S)

    @property
    def dim(self):
        return self.gram.shape[0]

    def nystrom_solver(self):
        """Cholesky of K[S,S], with jitter escalation on near-singularity."""
        if self._chol is None:
            S = self.nystrom_set
            block = self.gram[np.ix_(S, S)]
            eye = np.eye(S.size)
            last_err = None
            for jitter in (1e-10, 1e-8, 1e-6):
                try:
                    self._chol = cho_factor(block + jitter * eye)
                    break
                except np.linalg.LinAlgError as err:
                    last_err = err
            else:
                raise ConfigError(
                    "Nystrom block is singular even with jitter 1e-6"
                ) from last_err
            self._cross = self.gram[:, S]
        return self._chol, self._cross


def kernel_ridge_objective(spec, alphas, use_nystrom=False):
    """Dual objective at one coefficient vector or an (n, D) batch.

    The HF path forms a^T K a directly. The LF path replaces K by the
    Nystrom surrogate K[:,S] (K[S,S])^{-1} K[S,:], evaluated through the
    l-dimensional bottleneck in O(l D) per point; the surrogate matrix
    itself is never materialized.
    """
    A = np.asarray(alphas, dtype=float)
    single = A.ndim == 1
    if single:
        A = A[None, :]
    if A.shape[1] != spec.dim:
        raise ConfigError(f"expected vectors of dim {spec.dim}, got {A.shape[1]}")
    common = -2.0 * (A @ spec.targets) + spec.ridge * (A * A).sum(axis=1)
    if use_nystrom:
        chol, cross = spec.nystrom_solver()
        U = A @ cross
        V = cho_solve(chol, U.T).T
        vals = (U * V).sum(axis=1) + common
    else:
        KA = A @ spec.gram
        vals = (KA * A).sum(axis=1) + common
    return float(vals[0]) if single else vals


def solve_kernel_ridge(spec):
    """Direct-solve oracle: the minimizer (K + ridge I)^{-1} y."""
    K = spec.gram
    return solve(K + spec.ridge * np.eye(spec.dim), spec.targets, assume_a="pos")


def kernel_lipschitz(spec):
    """Gradient Lipschitz constant 2 (lambda_max(K) + ridge)."""
    lam_max = float(np.linalg.eigvalsh(spec.gram)[-1])
    return 2.0 * (lam_max + spec.ridge)


def make_kernel_spec(points, targets, lengthscale, ridge, n_inducing, rng):
    """Build the Gram matrix and draw the fixed Nystrom inducing set."""
    X = np.asarray(points, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ConfigError(f"{X.shape[0]} points but {y.shape[0]} targets")
    K = rbf_gram(X, lengthscale)
    S = rng.choice(X.shape[0], size=n_inducing, replace=False)
    return KernelRidgeSpec(K, y, ridge, S)


def make_kernel_pair(spec):
    """Bi-fidelity kernel ridge problem with cost ratio l / D."""
    alpha_star = solve_kernel_ridge(spec)
    f_star = kernel_ridge_objective(spec, alpha_star)
    return BiFidelityProblem(
        hf=ObjectiveHandle(
            lambda A: kernel_ridge_objective(spec, A), spec.dim, "kernel_hf"
        ),
        lf=ObjectiveHandle(
            lambda A: kernel_ridge_objective(spec, A, use_nystrom=True),
            spec.dim,
            "kernel_nystrom_lf",
        ),
        lf_cost_ratio=spec.nystrom_set.size / spec.dim,
        name="kernel_ridge",
        known_optimum=f_star,
    )


def make_clustered_regression(n=1000, n_features=8, n_clusters=10, seed=12345):
    """Synthetic clustered regression data with a fast-decaying Gram spectrum.

    Points fall in Gaussian clusters, so an RBF Gram matrix over them is
    close to low rank; targets are a noisy linear trend plus a mild
    nonlinearity.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centers = rng.normal(0.0, 2.0, size=(n_clusters, n_features))
    labels = rng.integers(0, n_clusters, size=n)
    X = centers[labels] + rng.normal(0.0, 0.5, size=(n, n_features))
    w = rng.normal(0.0, 0.5, size=n_features)
    y = (
        X @ w
        + np.sin(2.0 * X[:, 0])
        + 0.3 * (X[:, 1] ** 2 - 1.0)
        + rng.normal(0.0, 0.1, size=n)
    )
    return X, y


# ---------------------------------------------------------------------------
# Generic pair recipes


def make_lowrank_quadratic_pair(A, a, rank, radius=1.0):
    """Quadratic HF with a truncated-eigendecomposition LF.

    HF is f(x) = 1/2 x^T A x + <a, x>; LF replaces A by its best rank-r
    approximation. Returns (problem, w_bound) where w_bound =
    lambda_{r+1} * radius bounds the gradient gap on the radius ball.
    """
    A = np.asarray(A, dtype=float)
    a = np.asarray(a, dtype=float)
    dim = a.size
    if A.shape != (dim, dim):
        raise ConfigError(f"matrix shape {A.shape} incompatible with vector dim {dim}")
    if not 0 < rank <= dim:
        raise ConfigError(f"rank must lie in [1, {dim}], got {rank}")
    eigvals, eigvecs = np.linalg.eigh(A)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    V = eigvecs[:, :rank] * eigvals[:rank]
    Vt = eigvecs[:, :rank]
    w_bound = float(eigvals[rank] * radius) if rank < dim else 0.0

    def hf(X):
        return 0.5 * ((X @ A) * X).sum(axis=1) + X @ a

    def lf(X):
        proj = X @ Vt
        return 0.5 * ((X @ V) * proj).sum(axis=1) + X @ a

    problem = BiFidelityProblem(
        hf=ObjectiveHandle(hf, dim, "quadratic_hf"),
        lf=ObjectiveHandle(lf, dim, "lowrank_quadratic_lf"),
        lf_cost_ratio=max(rank / dim, 1e-12),
        name="lowrank_quadratic",
    )
    return problem, w_bound


def make_subsampled_pair(components, r, rng, dim=None):
    """Full-average HF against a fixed random subsample average LF.

    ``components`` is a sequence of batch callables f_i; HF averages all
    of them, LF averages a subset of size r drawn once here. The subset
    stays fixed for the life of the problem.
    """
    n = len(components)
    if not 1 <= r <= n:
        raise ConfigError(f"subset size must lie in [1, {n}], got {r}")
    if dim is None:
        raise ConfigError("make_subsampled_pair needs the ambient dim")
    subset = np.sort(rng.choice(n, size=r, replace=False))

    def average(fns):
        def val(X):
            total = fns[0](X)
            for f in fns[1:]:
                total = total + f(X)
            return total / len(fns)

        return val

    hf = average(list(components))
    lf = average([components[i] for i in subset])
    return BiFidelityProblem(
        hf=ObjectiveHandle(hf, dim, "fullbatch_hf"),
        lf=ObjectiveHandle(lf, dim, "subsample_lf"),
        lf_cost_ratio=r / n,
        name="subsampled_sum",
    )


# ---------------------------------------------------------------------------
# CSV ingestion


def load_regression_csv(path, feature_columns, target_column, row_limit=None):
    """Read (points, targets) from a headered numeric CSV.

    Errors carry file line numbers. ``row_limit`` larger than the file
    is not an error; you just get every row.
    """
    try:
        handle = open(path, newline="")
    except OSError as err:
        raise ConfigError(f"cannot open csv file {path}: {err}") from err
    with handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        wanted = list(feature_columns) + [target_column]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise ConfigError(
                f"{path}: unknown column(s) {missing}; header has {header}"
            )
        points, targets = [], []
        for row in reader:
            if row_limit is not None and len(points) >= row_limit:
                break
            line = reader.line_num
            parsed = {}
            for col in wanted:
                cell = row[col]
                try:
                    parsed[col] = float(cell)
                except (TypeError, ValueError):
                    raise ConfigError(
                        f"{path}: line {line}: non-numeric value {cell!r} in column {col!r}"
                    ) from None
            points.append([parsed[c] for c in feature_columns])
            targets.append(parsed[target_column])
    return np.asarray(points, dtype=float), np.asarray(targets, dtype=float)
