"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 capacity error,
4 oracle violation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import tomli

from .config import load_config, with_overrides
from .errors import CapacityError, ConfigError, InputError
from .pipeline import (
    build_setup,
    draw_samples,
    read_samples,
    run_certify,
    run_oracle_check,
    run_sweep,
    uses_scores,
    write_outputs,
    write_samples,
    write_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_ORACLE = 0, 2, 3, 4


def _load(args):
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        overrides["collective.mode"] = args.mode
    if getattr(args, "out", None) is not None:
        overrides["output.dir"] = args.out
    return with_overrides(cfg, overrides) if overrides else cfg


def _certify(cfg, samples_path=None) -> int:
    samples = None
    if samples_path is not None:
        samples = read_samples(samples_path, cfg, build_setup(cfg))
    run = run_certify(cfg, samples)
    report, curve = write_outputs(run, cfg.output.dir)
    print(f"wrote {report} and {curve}")
    return EXIT_OK


def cmd_certify(args) -> int:
    return _certify(_load(args), args.samples)


def cmd_sweep(args) -> int:
    cfg = _load(args)
    try:
        with open(args.grid, "rb") as handle:
            grid = tomli.load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"grid file not found: {args.grid}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{args.grid}: {exc}") from exc
    rows = run_sweep(cfg, grid, args.variant)
    path = Path(cfg.output.dir) / "sweep.csv"
    write_sweep(rows, path)
    print(f"wrote {path} ({sum(r['dominated'] for r in rows)} of {len(rows)} points dominated)")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    summary = run_oracle_check(_load(args))
    for line in summary.violations + summary.ordering:
        print(f"VIOLATION {line}")
    status = "PASS" if summary.ok else "FAIL"
    print(f"{status}: {summary.checks} checks, {len(summary.violations)} soundness and {len(summary.ordering)} ordering violations")
    return EXIT_OK if summary.ok else EXIT_ORACLE


def cmd_samples(args) -> int:
    cfg = _load(args)
    if args.action == "export":
        setup = build_setup(cfg)
        write_samples(draw_samples(cfg, setup), args.path, uses_scores(cfg))
        print(f"wrote {args.path}")
        return EXIT_OK
    return _certify(cfg, args.path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="locsmooth", description="Collective robustness certificates for localized smoothing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="certify a configured run and write report.json and curve.csv")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("relaxed", "exact", "both"))
    p.add_argument("--out")
    p.add_argument("--samples", help="certify from a sample CSV instead of sampling")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="certify every point of a parameter grid and flag dominated points")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--variant", choices=("naive", "relaxed", "exact"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle-check", help="compare all bounds against brute force on the configured inputs")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("samples", help="export sampled predictions or certify from them")
    p.add_argument("action", choices=("export", "import"))
    p.add_argument("--config", required=True)
    p.add_argument("--path", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_samples)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
