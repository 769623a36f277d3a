"""Command line entry point: ``python -m rmfchaos <subcommand> [flags]``.

Exit status is 0 when every check passes, 1 when any check fails and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .config import load_config
from .errors import ConfigError, RMFError

SUBCOMMANDS = {
    "clt": "clt",
    "chaos": "chaos-convergence",
    "multifractal": "multifractal",
    "coupling": "coupling",
    "analytics": "analytics",
    "dickman-table": "dickman-table",
}


def _u64(raw: str) -> int:
    v = int(raw, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {raw} is not an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmfchaos", description="Random multiplicative function and chaos experiments.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--seed", type=_u64, metavar="U64", help="master seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    common.add_argument("--workers", type=int, metavar="N", help="worker processes (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        sub.add_parser(name, parents=[common], help=f"run the {kind} experiment")
    return parser


def make_config(args: argparse.Namespace):
    kind = SUBCOMMANDS[args.command]
    base = experiments.base_config(kind)
    cfg = load_config(args.config, base) if args.config else base
    if cfg.experiment != kind:
        raise ConfigError(f"experiment: config declares {cfg.experiment!r} but subcommand runs {kind!r}")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    return cfg.with_overrides(**overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        record = experiments.run(cfg)
    except RMFError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    rows, summary = record.write(cfg.out_dir)
    for c in record.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: value={c.value!r} reference={c.reference!r} tol={c.tolerance!r}")
    print(f"wrote {rows} and {summary}")
    return 0 if record.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
