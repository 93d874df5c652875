"""Command-line entry point.

    hometrend all --config run.toml --out results --seed 7

Verbs run one pipeline stage (or all of them); each later stage consumes
the artifacts the earlier ones left in the output directory, so partial
reruns are cheap. ``--out`` and ``--seed`` override the config file; the
config path itself may come from the HOMETREND_CONFIG environment
variable when --config is omitted.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .errors import HometrendError, InputError
from .pipeline import RunConfig, main_verb

VERBS = ("qc", "homogeneity", "homogenize", "trends", "all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hometrend",
        description=(
            "Quality control, homogeneity testing, reference-based "
            "homogenization and trend detection for daily station "
            "temperature records."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, blurb in (
        ("qc", "quality-control the daily inputs and write cleaned series"),
        ("homogeneity", "run the four-test battery on the DTR aggregates"),
        ("homogenize", "adjust Tmax/Tmin against the reference series"),
        ("trends", "trend tests and Sen slopes, original and homogenized"),
        ("all", "run every stage and write the reproducibility manifest"),
    ):
        p = sub.add_parser(verb, help=blurb)
        p.add_argument(
            "--config",
            type=Path,
            default=None,
            help="run configuration (TOML); default from $HOMETREND_CONFIG",
        )
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="root random seed")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    config_path = args.config or os.environ.get("HOMETREND_CONFIG")
    if not config_path:
        raise InputError("no config given: pass --config or set HOMETREND_CONFIG")
    config = RunConfig.from_file(config_path)
    if args.out is not None:
        config.out_dir = args.out
    if args.seed is not None:
        config.seed = args.seed
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HometrendError as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    return main_verb(args.verb, config)


if __name__ == "__main__":
    raise SystemExit(main())
