"""Batch driver: run adaptive solves from a config file and report on them.

Subcommands::

    ptcfem run <config> [--out DIR] [--levels-dump k1,k2,...]
    ptcfem table <levels.csv>
    ptcfem curve <levels.csv> [--out DIR]

The config is a flat ``key = value`` text file; ``#`` starts a comment.
``run`` writes ``levels.csv``, ``iterations.csv``, a convergence figure,
and mesh/solution dumps (text + figure) for any requested levels.
"""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import problems, report
from .adaptivity import AdaptiveRunConfig, adaptive_solve
from .fields import write_field
from .mesh import crisscross_mesh, unit_square_mesh, write_mesh
from .solver import VARIANTS, SolverConfig


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    problem: str
    epsilon: Optional[float] = None
    initial_mesh_n: int = 6
    initial_split: str = "crisscross"
    gamma0: float = 10.0
    theta: float = 0.6
    sigma0: float = 0.9
    K0: float = 2000.0
    tol: float = 1e-7
    M: float = 2.0
    max_iterations: int = 50
    max_levels: int = 40
    max_elements: Optional[int] = None
    xbar_choice: str = "zero"
    variant: str = "sigma_split_newmark"
    coarse_split_scale: float = 100.0
    rate_tolerance: float = 0.05
    seed: int = 0


_FIELD_PARSERS = {
    "problem": str,
    "epsilon": float,
    "initial_mesh_n": int,
    "initial_split": str,
    "gamma0": float,
    "theta": float,
    "sigma0": float,
    "K0": float,
    "tol": float,
    "M": float,
    "max_iterations": int,
    "max_levels": int,
    "max_elements": int,
    "xbar_choice": str,
    "variant": str,
    "coarse_split_scale": float,
    "rate_tolerance": float,
    "seed": int,
}

_PROBLEMS_NEEDING_EPSILON = ("example_1", "example_2", "example_3")


def parse_config(path):
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown parameter {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: invalid value for {key!r}: {exc}") from exc
    if "problem" not in values:
        raise ConfigError("missing required parameter 'problem'")
    config = RunConfig(**values)
    _validate(config)
    return config


def _validate(config):
    if config.problem in _PROBLEMS_NEEDING_EPSILON and config.epsilon is None:
        raise ConfigError(
            f"missing required parameter 'epsilon' for problem {config.problem!r}")
    if config.problem not in _PROBLEMS_NEEDING_EPSILON + ("linear_poisson",):
        raise ConfigError(f"unknown problem {config.problem!r}")
    if config.initial_split not in ("crisscross", "diagonal"):
        raise ConfigError("initial_split must be 'crisscross' or 'diagonal'")
    if config.initial_mesh_n < 1:
        raise ConfigError("initial_mesh_n must be >= 1")
    if config.variant not in VARIANTS:
        raise ConfigError(f"unknown variant {config.variant!r}")
    for name in ("gamma0", "theta", "sigma0", "K0", "tol", "M"):
        if getattr(config, name) <= 0:
            raise ConfigError(f"parameter {name!r} must be positive")


def build_problem(config):
    if config.problem == "linear_poisson":
        return problems.linear_poisson()
    builder = getattr(problems, config.problem)
    return builder(config.epsilon)


def build_mesh(config):
    if config.initial_split == "crisscross":
        return crisscross_mesh(config.initial_mesh_n)
    return unit_square_mesh(config.initial_mesh_n)


def build_run_config(config):
    solver = SolverConfig(
        variant=config.variant, gamma=config.gamma0, sigma0=config.sigma0,
        K0=config.K0, tol=config.tol, rate_slack=config.M,
        max_iterations=config.max_iterations, xbar_choice=config.xbar_choice)
    return AdaptiveRunConfig(
        solver=solver, gamma0=config.gamma0, theta=config.theta,
        max_levels=config.max_levels,
        coarse_split_scale=config.coarse_split_scale,
        rate_tolerance=config.rate_tolerance,
        max_elements=config.max_elements)


def cmd_run(args):
    config = parse_config(args.config)
    problem = build_problem(config)
    mesh = build_mesh(config)
    run_config = build_run_config(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_levels = set(args.levels_dump or [])

    def callback(level, mesh, x0, outcome, report_row):
        if level not in dump_levels:
            return
        write_mesh(mesh, out / f"mesh_L{level}.txt")
        write_field(outcome.iterate, out / f"sol_L{level}.txt")
        report.save_mesh_figure(mesh, out / f"mesh_L{level}.png")
        report.save_solution_figure(mesh, outcome.iterate,
                                    out / f"sol_L{level}.png")

    reports = adaptive_solve(run_config, problem, mesh, level_callback=callback)
    report.write_levels_csv(reports, out / "levels.csv")
    report.write_iterations_csv(reports, out / "iterations.csv")
    report.save_levels_figure(reports, out / "levels.png")
    return 0


def cmd_table(args):
    sys.stdout.write(report.table_report(args.levels_csv))
    return 0


def cmd_curve(args):
    rows = report.error_curve(args.levels_csv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "curve.csv", "w") as fh:
        fh.write(report.error_curve_csv_text(rows))
    report.save_error_curve_figure(rows, out / "curve.png")
    return 0


def _parse_levels_dump(text):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            "expected a comma-separated list of level indices") from exc


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="ptcfem",
        description="Adaptive pseudo-transient continuation runs for "
                    "quasilinear convection-diffusion problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an adaptive run from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--levels-dump", type=_parse_levels_dump, default=None,
                       metavar="k1,k2,...",
                       help="levels whose mesh and solution are dumped")
    p_run.set_defaults(func=cmd_run)

    p_table = sub.add_parser("table", help="print a text summary of levels.csv")
    p_table.add_argument("levels_csv")
    p_table.set_defaults(func=cmd_table)

    p_curve = sub.add_parser("curve", help="emit plot-ready error curve data")
    p_curve.add_argument("levels_csv")
    p_curve.add_argument("--out", default="out", help="output directory")
    p_curve.set_defaults(func=cmd_curve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
