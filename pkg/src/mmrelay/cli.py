"""Command-line entry point.

Subcommands:
  sweep    Monte-Carlo + deterministic sum-rate sweep, CSV and figure output.
  verify   Concentration/identity checks with gap statistics.
  quadform Signal quadratic form vs its deterministic equivalents.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 verification failure.
"""

import argparse
import dataclasses
import sys

from . import report as rpt
from . import verify as vf
from .config import load_config
from .exceptions import ConfigError, NumericError
from .presets import DEFAULT_GRID_DBM, PRESET_NAMES, preset_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmrelay",
        description="Two-hop relay downlink simulator with regularized "
                    "zero-forcing precoding.")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="sum-rate sweep over transmit power")
    src = sweep.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=PRESET_NAMES)
    src.add_argument("--config", help="path to a JSON scenario file")
    sweep.add_argument("--trials", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--out", default=".", help="output directory")
    sweep.add_argument("--format", default="csv,svg",
                       help="comma-separated subset of csv,svg")
    sweep.add_argument("--grid", default=None,
                       help="comma-separated power points in dBm "
                            "(default -20..50 step 5)")
    sweep.add_argument("--workers", type=int, default=1)

    verify = sub.add_parser("verify", help="numerical verification suite")
    verify.add_argument("--only", default=None,
                        help="substring filter on check names")
    verify.add_argument("--ladder", default="64,128,256",
                        help="comma-separated dimension ladder")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", default=None,
                        help="optional CSV path for the gap statistics")

    quad = sub.add_parser("quadform",
                          help="signal quadratic form vs deterministic values")
    quad.add_argument("--preset", choices=PRESET_NAMES, required=True)
    quad.add_argument("--trials", type=int, default=None)
    quad.add_argument("--seed", type=int, default=None)
    quad.add_argument("--out", default=".")
    quad.add_argument("--format", default="csv,svg")
    quad.add_argument("--grid", default=None)
    return parser


def _resolve_config(args):
    if getattr(args, "preset", None):
        cfg = preset_config(args.preset, trials=args.trials,
                            seed=0 if args.seed is None else args.seed)
        name = args.preset
    else:
        cfg = load_config(args.config)
        if args.trials is not None:
            cfg = dataclasses.replace(cfg, trials=args.trials)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        import os
        name = os.path.splitext(os.path.basename(args.config))[0]
    return cfg, name


def _parse_grid(text):
    if text is None:
        return list(DEFAULT_GRID_DBM)
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --grid value: {exc}") from exc


def _formats(text):
    fmts = {f.strip() for f in text.split(",") if f.strip()}
    unknown = fmts - {"csv", "svg"}
    if unknown:
        raise ConfigError(f"unknown output formats: {sorted(unknown)}")
    return fmts


def cmd_sweep(args):
    import os

    cfg, name = _resolve_config(args)
    grid = _parse_grid(args.grid)
    fmts = _formats(args.format)
    os.makedirs(args.out, exist_ok=True)
    result = rpt.run_sweep(cfg, power_grid_dbm=grid, workers=args.workers,
                           cache_dir=args.out)
    written = []
    if "csv" in fmts:
        written.append(rpt.emit_csv(result, os.path.join(args.out, f"{name}_sweep.csv")))
    if "svg" in fmts:
        written.append(rpt.emit_plot(result, os.path.join(args.out, f"{name}_sweep.svg"),
                                     title=f"{name}: M={cfg.M}, K={cfg.K}"))
    for path in written:
        print(path)
    return EXIT_OK


def cmd_verify(args):
    ladder = tuple(int(x) for x in args.ladder.split(",") if x.strip())
    passed, failures, reports = vf.run_verification(ladder=ladder,
                                                    seed=args.seed,
                                                    only=args.only)
    for r in reports:
        print(f"{r.statistic:28s} N={r.dimension:<5d} median={r.median_gap:.3e} "
              f"max={r.max_gap:.3e}")
    if args.out:
        rpt.emit_gap_csv(reports, args.out)
        print(args.out)
    if not passed:
        for f in failures:
            print(f"FAIL: {f}", file=sys.stderr)
        return EXIT_VERIFY
    print("all checks passed")
    return EXIT_OK


def cmd_quadform(args):
    import os

    cfg, name = _resolve_config(args)
    grid = _parse_grid(args.grid)
    fmts = _formats(args.format)
    os.makedirs(args.out, exist_ok=True)
    rows = rpt.run_quadratic_form_sweep(cfg, power_grid_dbm=grid,
                                        trials=args.trials, cache_dir=args.out)
    written = []
    if "csv" in fmts:
        written.append(rpt.emit_quadform_csv(rows, os.path.join(args.out, f"{name}_quadform.csv")))
    if "svg" in fmts:
        written.append(rpt.emit_quadform_plot(rows, os.path.join(args.out, f"{name}_quadform.svg"),
                                              title=f"{name}: M={cfg.M}, K={cfg.K}"))
    for path in written:
        print(path)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"sweep": cmd_sweep, "verify": cmd_verify, "quadform": cmd_quadform}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
