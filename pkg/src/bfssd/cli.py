"""Command-line entry point.

Subcommands:

* ``run``                run a declarative TOML experiment config
* ``list-problems``      print the registered benchmark problems
* ``list-methods``       print the nine optimizer names
* ``inspect-surrogate``  one surrogate construction, dumped as CSV

Exit codes: 0 success, 1 config error, 2 runtime abort. The default
output directory comes from the BFSSD_OUT environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .bench import (
    EXPERIMENTS,
    PROBLEM_PARAM_KEYS,
    PROBLEMS,
    ExperimentSpec,
    build_problem,
    emit_table,
    run_and_write,
)
from .core import ConfigError, EvaluationLedger, RngStream
from .linesearch import LineSearchConfig, build_surrogate, surrogate_profile
from .optimizers import METHODS, OptimizerConfig
from .subspace import estimate_gradient, fd_delta, sample_projection

OUT_ENV_VAR = "BFSSD_OUT"
DEFAULT_OUT = "bfssd_out"

_EXPERIMENT_KEYS = {
    "name", "preset", "problem", "trials", "base_seed", "budget", "grid",
}
_LINESEARCH_KEYS = {"beta", "shrink_c", "alpha_max", "max_shrinks_M",
                    "armijo_decrease_mode"}
_METHOD_KEYS = {
    "method", "ell", "fixed_step", "n_k", "fd_scale", "fd_central",
    "spsa_gains", "vr_epoch_length", "nag_momentum",
} | _LINESEARCH_KEYS


def _parse_override_value(text):
    """Best effort TOML scalar parse; bare words fall back to strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(config, overrides):
    """Apply --set key=value pairs. Bare keys target [experiment]."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        if len(parts) == 1:
            parts = ["experiment", parts[0]]
        node = config
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a scalar")
        node[parts[-1]] = _parse_override_value(raw.strip())
    return config


def _method_config(label, section):
    unknown = set(section) - _METHOD_KEYS
    if unknown:
        raise ConfigError(
            f"unknown keys in [methods.{label}]: {', '.join(sorted(unknown))}"
        )
    method = section.get("method", label)
    if method not in METHODS:
        raise ConfigError(
            f"unknown method {method!r} in [methods.{label}]; "
            f"valid: {', '.join(sorted(METHODS))}"
        )
    ls_kwargs = {k: section[k] for k in _LINESEARCH_KEYS if k in section}
    cfg_kwargs = {
        k: section[k]
        for k in section
        if k not in _LINESEARCH_KEYS and k != "method"
    }
    if "spsa_gains" in cfg_kwargs:
        gains = cfg_kwargs["spsa_gains"]
        cfg_kwargs["spsa_gains"] = tuple(float(g) for g in gains)
    return OptimizerConfig(
        method=method, linesearch=LineSearchConfig(**ls_kwargs), **cfg_kwargs
    )


def spec_from_config(config):
    """Turn a parsed TOML document into an ExperimentSpec."""
    unknown_sections = set(config) - {"experiment", "problem", "methods"}
    if unknown_sections:
        raise ConfigError(
            f"unknown config sections: {', '.join(sorted(unknown_sections))}"
        )
    exp = dict(config.get("experiment", {}))
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in [experiment]: {', '.join(sorted(unknown))}")

    preset = exp.get("preset")
    if preset is not None:
        if preset not in EXPERIMENTS:
            raise ConfigError(
                f"unknown preset {preset!r}; valid: {', '.join(sorted(EXPERIMENTS))}"
            )
        if "methods" in config or "problem" in config:
            raise ConfigError("a preset config cannot also declare [methods] or [problem]")
        kwargs = {}
        if "trials" in exp:
            kwargs["trials"] = int(exp["trials"])
        if "base_seed" in exp:
            kwargs["base_seed"] = int(exp["base_seed"])
        if "budget" in exp:
            kwargs["budget"] = float(exp["budget"])
        spec = EXPERIMENTS[preset](**kwargs)
        if "name" in exp:
            spec.name = str(exp["name"])
        if "grid" in exp:
            spec.checkpoint_grid = tuple(float(g) for g in exp["grid"])
        return spec

    for required in ("problem",):
        if required not in exp:
            raise ConfigError(f"[experiment] is missing the {required!r} key")
    methods_cfg = config.get("methods", {})
    if not methods_cfg:
        raise ConfigError("config declares no [methods.<label>] sections")
    problem = exp["problem"]
    if problem not in PROBLEMS:
        raise ConfigError(
            f"unknown problem {problem!r}; valid: {', '.join(sorted(PROBLEMS))}"
        )
    params = dict(config.get("problem", {}))
    unknown = set(params) - PROBLEM_PARAM_KEYS[problem]
    if unknown:
        raise ConfigError(
            f"unknown keys in [problem] for {problem!r}: {', '.join(sorted(unknown))}"
        )
    methods = {
        label: _method_config(label, dict(section))
        for label, section in methods_cfg.items()
    }
    spec = ExperimentSpec(
        name=str(exp.get("name", "experiment")),
        problem=problem,
        methods=methods,
        trials=int(exp.get("trials", 10)),
        base_seed=int(exp.get("base_seed", 1000)),
        budget_equiv_hf=float(exp.get("budget", 30000.0)),
        checkpoint_grid=tuple(float(g) for g in exp.get("grid", (100.0, 1000.0))),
        problem_params=params,
    )
    return spec


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return repr(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")


def echo_config(spec):
    """Serialize the effective experiment back to TOML.

    Re-running from this text reproduces the run: every setting is
    written out explicitly, defaults included.
    """
    lines = ["[experiment]"]
    lines.append(f"name = {_toml_value(spec.name)}")
    lines.append(f"problem = {_toml_value(spec.problem)}")
    lines.append(f"trials = {_toml_value(spec.trials)}")
    lines.append(f"base_seed = {_toml_value(spec.base_seed)}")
    lines.append(f"budget = {_toml_value(float(spec.budget_equiv_hf))}")
    lines.append(f"grid = {_toml_value([float(g) for g in spec.checkpoint_grid])}")
    if spec.problem_params:
        lines.append("")
        lines.append("[problem]")
        for key in sorted(spec.problem_params):
            lines.append(f"{key} = {_toml_value(spec.problem_params[key])}")
    for label, cfg in spec.methods.items():
        lines.append("")
        lines.append(f"[methods.{label}]")
        lines.append(f"method = {_toml_value(cfg.method)}")
        lines.append(f"ell = {_toml_value(cfg.ell)}")
        if cfg.fixed_step is not None:
            lines.append(f"fixed_step = {_toml_value(float(cfg.fixed_step))}")
        lines.append(f"n_k = {_toml_value(cfg.n_k)}")
        lines.append(f"fd_scale = {_toml_value(float(cfg.fd_scale))}")
        lines.append(f"fd_central = {_toml_value(cfg.fd_central)}")
        lines.append(f"spsa_gains = {_toml_value(list(cfg.spsa_gains))}")
        if cfg.vr_epoch_length is not None:
            lines.append(f"vr_epoch_length = {_toml_value(cfg.vr_epoch_length)}")
        lines.append(f"nag_momentum = {_toml_value(cfg.nag_momentum)}")
        ls = cfg.linesearch
        if ls.beta is not None:
            lines.append(f"beta = {_toml_value(float(ls.beta))}")
        lines.append(f"shrink_c = {_toml_value(float(ls.shrink_c))}")
        lines.append(f"alpha_max = {_toml_value(float(ls.alpha_max))}")
        lines.append(f"max_shrinks_M = {_toml_value(ls.max_shrinks_M)}")
        lines.append(f"armijo_decrease_mode = {_toml_value(ls.armijo_decrease_mode)}")
    return "\n".join(lines) + "\n"


def _cmd_run(args):
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                config = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {args.config}: {exc}")
    else:
        raise ConfigError("run needs --config pointing at a TOML experiment file")
    apply_overrides(config, args.set or [])
    spec = spec_from_config(config)
    if args.seed is not None:
        spec.base_seed = args.seed
    out_dir = args.out or os.environ.get(OUT_ENV_VAR, DEFAULT_OUT)
    summaries, path = run_and_write(spec, out_dir, workers=args.workers)
    with open(os.path.join(path, "config.toml"), "w") as fh:
        fh.write(echo_config(spec))
    sys.stdout.write(emit_table(summaries, spec.checkpoint_grid))
    print(f"outputs written to {path}")
    return 0


def _cmd_list_problems(_args):
    for name in sorted(PROBLEMS):
        keys = ", ".join(sorted(PROBLEM_PARAM_KEYS[name]))
        print(f"{name}  (parameters: {keys})")
    return 0


def _cmd_list_methods(_args):
    for name in sorted(METHODS):
        print(name)
    return 0


def _cmd_inspect_surrogate(args):
    problem = build_problem(args.problem)
    ledger = EvaluationLedger(problem.lf_cost_ratio)
    rng = RngStream(args.seed).generator()
    x = np.zeros(problem.dim)
    fx = float(ledger.eval_hf(problem, x))
    P = sample_projection(problem.dim, args.ell, rng)
    est = estimate_gradient(
        problem, ledger, x, P, fd_delta(x), base_value=fx
    )
    if est.direction is None:
        raise ConfigError("gradient estimate is zero at the origin; nothing to inspect")
    surrogate = build_surrogate(
        problem, ledger, x, -est.direction, args.n_k, args.alpha_max, fx
    )
    alphas = np.linspace(0.0, args.alpha_max, args.samples)
    rows = surrogate_profile(surrogate, problem, ledger, alphas)
    out_dir = args.out or os.environ.get(OUT_ENV_VAR, DEFAULT_OUT)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(
        out_dir, f"surrogate_{args.problem}_ell{args.ell}_seed{args.seed}.csv"
    )
    with open(path, "w", newline="") as fh:
        fh.write("alpha,surrogate_value,hf_value\n")
        for alpha, sv, hv in rows:
            fh.write(f"{alpha:.17g},{sv:.17g},{hv:.17g}\n")
    print(f"surrogate profile written to {path}")
    print(f"rho = {surrogate.rho:.6g}, knots at {np.array2string(surrogate.knots)}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bfssd",
        description="Bi-fidelity stochastic subspace descent benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a TOML config")
    p_run.add_argument("--config", help="path to the experiment TOML file")
    p_run.add_argument(
        "--set", action="append", metavar="KEY=VALUE",
        help="override a config key (repeatable); bare keys target [experiment]",
    )
    p_run.add_argument("--out", help=f"output root (default ${OUT_ENV_VAR} or {DEFAULT_OUT})")
    p_run.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    p_run.add_argument("--seed", type=int, help="override the base seed")
    p_run.set_defaults(func=_cmd_run)

    p_lp = sub.add_parser("list-problems", help="print registered problems")
    p_lp.set_defaults(func=_cmd_list_problems)

    p_lm = sub.add_parser("list-methods", help="print optimizer names")
    p_lm.set_defaults(func=_cmd_list_methods)

    p_is = sub.add_parser(
        "inspect-surrogate",
        help="build one bi-fidelity surrogate and dump its profile as CSV",
    )
    p_is.add_argument("--problem", default="worst")
    p_is.add_argument("--ell", type=int, default=20)
    p_is.add_argument("--n-k", dest="n_k", type=int, default=1)
    p_is.add_argument("--alpha-max", dest="alpha_max", type=float, default=1.0)
    p_is.add_argument("--seed", type=int, default=0)
    p_is.add_argument("--samples", type=int, default=101)
    p_is.add_argument("--out", help=f"output root (default ${OUT_ENV_VAR} or {DEFAULT_OUT})")
    p_is.set_defaults(func=_cmd_inspect_surrogate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - surface aborts as exit code 2
        print(f"runtime abort: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
