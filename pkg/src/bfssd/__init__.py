"""Bi-fidelity stochastic subspace descent.

Zeroth-order optimizers built around a cheap low-fidelity surrogate for
the line search, plus the evaluation-accounting and benchmarking
machinery needed to compare them at equal cost.
"""

from .core import (
    HF,
    LF,
    BiFidelityProblem,
    ConfigError,
    EvaluationError,
    EvaluationLedger,
    ObjectiveHandle,
    RngStream,
    RunTrace,
    counted_eval,
    record_checkpoint,
)
from .linesearch import (
    MAGNITUDE,
    SQUARED_MAGNITUDE,
    BacktrackResult,
    LineSearchConfig,
    Surrogate1D,
    bf_backtracking,
    build_surrogate,
    eval_surrogate,
    exact_line_search,
    hf_backtracking,
    surrogate_profile,
)
from .optimizers import (
    METHODS,
    IterationRecord,
    OptimizerConfig,
    run_method,
)
from .problems import (
    KernelRidgeSpec,
    WorstFunctionSpec,
    kernel_lipschitz,
    kernel_ridge_objective,
    load_regression_csv,
    make_clustered_regression,
    make_kernel_pair,
    make_kernel_spec,
    make_lowrank_quadratic_pair,
    make_subsampled_pair,
    make_worst_pair,
    rbf_gram,
    solve_kernel_ridge,
    worst_function_minimizer,
    worst_function_value,
)
from .subspace import (
    GradientEstimate,
    ProjectionMatrix,
    estimate_gradient,
    fd_delta,
    sample_projection,
)
from .bench import (
    EXPERIMENTS,
    PROBLEMS,
    CurveSummary,
    ExperimentSpec,
    build_problem,
    emit_convergence_plot,
    emit_table,
    resample_curve,
    run_experiment,
    run_and_write,
)

__version__ = "0.1.0"

__all__ = [
    "HF",
    "LF",
    "BiFidelityProblem",
    "ConfigError",
    "EvaluationError",
    "EvaluationLedger",
    "ObjectiveHandle",
    "RngStream",
    "RunTrace",
    "counted_eval",
    "record_checkpoint",
    "MAGNITUDE",
    "SQUARED_MAGNITUDE",
    "BacktrackResult",
    "LineSearchConfig",
    "Surrogate1D",
    "bf_backtracking",
    "build_surrogate",
    "eval_surrogate",
    "exact_line_search",
    "hf_backtracking",
    "surrogate_profile",
    "METHODS",
    "IterationRecord",
    "OptimizerConfig",
    "run_method",
    "KernelRidgeSpec",
    "WorstFunctionSpec",
    "kernel_lipschitz",
    "kernel_ridge_objective",
    "load_regression_csv",
    "make_clustered_regression",
    "make_kernel_pair",
    "make_kernel_spec",
    "make_lowrank_quadratic_pair",
    "make_subsampled_pair",
    "make_worst_pair",
    "rbf_gram",
    "solve_kernel_ridge",
    "worst_function_minimizer",
    "worst_function_value",
    "GradientEstimate",
    "ProjectionMatrix",
    "estimate_gradient",
    "fd_delta",
    "sample_projection",
    "EXPERIMENTS",
    "PROBLEMS",
    "CurveSummary",
    "ExperimentSpec",
    "build_problem",
    "emit_convergence_plot",
    "emit_table",
    "resample_curve",
    "run_experiment",
    "run_and_write",
    "__version__",
]
