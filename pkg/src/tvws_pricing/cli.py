"""Command-line entry point.

    tvws-pricing run CONFIG [--out DIR]
    tvws-pricing preset NAME [--seed S] [--out DIR]
    tvws-pricing validate CONFIG
    tvws-pricing list-presets

Exit status is 0 on success, 1 for a bad config and 2 when the computation
or the output write fails.  Without ``--out`` results go to the config's
``output`` key, then ``$TVWS_PRICING_OUTPUT_DIR``, then ``./results``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, ExperimentSpec, load_config
from .experiments import run_experiment, write_outputs
from .model import PricingError
from .presets import DEFAULT_SEED, PRESETS, load_preset

ENV_OUTPUT = "TVWS_PRICING_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2

log = logging.getLogger("tvws_pricing")


def _output_dir(spec: ExperimentSpec, flag: str | None) -> Path:
    if flag:
        return Path(flag)
    if spec.output:
        return Path(spec.output)
    return Path(os.environ.get(ENV_OUTPUT, "results"))


def _execute(spec: ExperimentSpec, out: str | None) -> int:
    target = _output_dir(spec, out)
    try:
        result = run_experiment(spec)
        paths = write_outputs(spec, target, result)
    except (PricingError, ArithmeticError, ValueError) as exc:
        print(f"error: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"error: cannot write to {target}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_COMPUTE
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        spec = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(spec, args.out)


def _cmd_preset(args) -> int:
    try:
        spec = load_preset(args.name, args.seed)
    except KeyError:
        print(f"error: unknown preset {args.name!r}; see list-presets", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: preset {args.name}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(spec, args.out)


def _cmd_validate(args) -> int:
    try:
        spec = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {spec.name} ({spec.experiment}), config hash {spec.config_hash()[:12]}")
    return EXIT_OK


def _cmd_list(args) -> int:
    for name in PRESETS:
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvws-pricing",
        description="Hybrid registration / query-plan pricing experiments.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("preset", help="run a built-in experiment")
    p.add_argument("name")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("validate", help="parse and check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("list-presets", help="print the built-in experiment names")
    p.set_defaults(func=_cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; report those as config errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
