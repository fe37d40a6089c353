"""Command-line interface.

Subcommands::

    markov-admm run --config exp.json --out results [--seed 7] [--trials 50]
    markov-admm constants --config exp.json
    markov-admm validate --config exp.json

Exit codes: 0 success, 2 configuration error, 3 numerical error.  The
``MARKOV_ADMM_THREADS`` environment variable caps the trial worker count.
"""

from __future__ import annotations

import argparse
import json
import sys

from .analysis import contraction_constants
from .config import validate_config
from .errors import NumericalError, ValidationError
from .experiment import emit, run_experiment
from .markov import stationary_comparison

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="markov-admm",
        description="Consensus ADMM simulator with Markov-sampled asynchronous updates")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured experiment and emit results")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override master_seed")
    p_run.add_argument("--trials", type=int, default=None, help="override trial count")

    p_const = sub.add_parser("constants",
                             help="print certified contraction constants as JSON")
    p_const.add_argument("--config", required=True)

    p_val = sub.add_parser("validate", help="validate a config and echo the resolution")
    p_val.add_argument("--config", required=True)
    return parser


def _cmd_run(args) -> int:
    overrides = {"master_seed": args.seed, "trials": args.trials}
    cfg = validate_config(args.config, overrides=overrides)
    out_dir = args.out or cfg.out_dir or "results"
    bundle = run_experiment(cfg)
    files = emit(bundle, out_dir)
    for f in files:
        print(f)
    return EXIT_OK


def _cmd_constants(args) -> int:
    cfg = validate_config(args.config)
    if cfg.chain is None:
        raise ValidationError("constants need a chain in the config")
    payload = contraction_constants(cfg.problem, cfg.rho, cfg.chain).as_dict()
    if cfg.chain_alpha is not None:
        payload["stationary_comparison"] = stationary_comparison(
            cfg.chain, cfg.chain_alpha)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = validate_config(args.config)
    print(json.dumps(cfg.echo, indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "constants": _cmd_constants,
               "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
