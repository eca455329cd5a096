"""Command-line front end.

Verbs::

    atlaslab run <config.yaml> [--out DIR] [--threads K]
    atlaslab validate <config.yaml>
    atlaslab version

Exit codes: 0 success, 2 config validation failure, 3 runtime numeric error,
4 I/O failure. ``--threads`` parallelizes independent path substreams and is
guaranteed not to change any output byte.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import load_config
from .errors import NumericalError, ValidationError
from .runner import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atlaslab",
        description="Rank-based market model simulations and integral-identity verification.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute every experiment in a config")
    p_run.add_argument("config", help="path to a YAML run configuration")
    p_run.add_argument("--out", default=None, help="override the configured output directory")
    p_run.add_argument(
        "--threads", type=int, default=1,
        help="worker threads for path generation (does not affect results)",
    )

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config", help="path to a YAML run configuration")

    sub.add_parser("version", help="print the package version")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.verb == "version":
        print(__version__)
        return EXIT_OK

    try:
        config = load_config(args.config)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.verb == "validate":
        print(f"{args.config}: valid ({len(config.experiments)} experiments)")
        return EXIT_OK

    try:
        written = run(config, out_dir=args.out, threads=args.threads)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
