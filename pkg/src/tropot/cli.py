"""Command-line experiment runner.

Subcommands: ``run <config>`` executes an experiment and writes artifacts,
``validate <config>`` checks a config (and its density specs) without
solving, ``version`` prints the package version.  Exit codes: 0 converged,
2 infeasible masses, 3 iteration budget exhausted, 4 bad configuration.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .experiment import (
    EXIT_CONFIG_ERROR,
    EXIT_INFEASIBLE,
    EXIT_OK,
    ConfigError,
    build_problem,
    bundled_config_names,
    load_config,
    run_experiment,
)
from .pdhg import InfeasibleProblemError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tropot",
        description="Tropical Wasserstein distances and geodesics on a grid.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="config path or bundled name "
                       f"({', '.join(bundled_config_names())})")
    run_p.add_argument("--output-dir", help="override the artifact directory")
    run_p.add_argument("--full-scale", action="store_true",
                       help="double the grid resolution of the config")

    val_p = sub.add_parser("validate", help="check a config without solving")
    val_p.add_argument("config")

    sub.add_parser("version", help="print the package version")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "version":
        print(__version__)
        return EXIT_OK

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if args.command == "validate":
        try:
            build_problem(cfg)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG_ERROR
        except InfeasibleProblemError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"{args.config}: ok ({cfg.kind}, {cfg.nx}x{cfg.ny})")
        return EXIT_OK

    try:
        return run_experiment(cfg, output_dir=args.output_dir,
                              full_scale=args.full_scale)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
