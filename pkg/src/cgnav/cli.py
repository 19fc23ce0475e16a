"""Command-line entry point: ``cgnav {generate,run,sweep,compare,report}``.

Exit status is 0 when every trial ran, 1 when at least one trial raised, and 2
for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .runner import MissingInputError, generate_maps, run_batch, sweep_batch, write_report

EXIT_OK, EXIT_TRIAL_FAILURE, EXIT_CONFIG = 0, 1, 2
COMPARE_PREDICTORS = ("ci", "cn", "cg")


def _fraction(text: str) -> float:
    try:
        f = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= f <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction {f} outside [0, 1]")
    return f


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # Shared by the top-level parser and every subcommand so flags work in either position.
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=default, help="YAML experiment config")
    p.add_argument("--seed", type=int, default=default, help="master seed (overrides config)")
    p.add_argument("--out", default=default, help="output directory (overrides config)")
    p.add_argument("--jobs", type=int, default=default, help="parallel worker processes")
    p.add_argument("--timing", action="store_true", default=default,
                   help="record wall-clock time per step (logs are then not reproducible)")
    p.add_argument("--print-defaults", action="store_true", default=default,
                   help="print the full default config as YAML and exit")
    p.add_argument("-v", "--verbose", action="store_true", default=default)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgnav", parents=[_global_flags(False)], description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command")
    shared = _global_flags(True)
    sub.add_parser("generate", parents=[shared], help="write map files and a manifest")
    run = sub.add_parser("run", parents=[shared], help="one episode per (map, predictor, trial)")
    run.add_argument("--predictors", nargs="+", help="predictor kinds (default: from config)")
    sub.add_parser("compare", parents=[shared], help="run over the ci, cn and cg predictors")
    sweep = sub.add_parser("sweep", parents=[shared], help="episodes with partially revealed maps")
    sweep.add_argument("--predictors", nargs="+")
    sweep.add_argument("--fractions", nargs="+", type=_fraction, help="reveal fractions in [0, 1]")
    sweep.add_argument("--contiguous", action="store_true", help="reveal a disc around the start")
    report = sub.add_parser("report", parents=[shared], help="summary CSVs from episode logs")
    report.add_argument("--logs", help="log directory (default: <out>/logs)")
    return parser


def _load(args) -> ExperimentConfig:
    overrides = {"seed": args.seed, "out": args.out, "jobs": args.jobs}
    if args.timing:
        overrides["timing"] = True
    if getattr(args, "contiguous", False):
        overrides["contiguous_reveal"] = True
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.print_defaults:
            sys.stdout.write(dump_config(ExperimentConfig()))
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        cfg = _load(args)
        out = Path(cfg.out)
        if args.command == "generate":
            entries = generate_maps(cfg)
            print(f"wrote {len(entries)} maps to {out / 'maps'}")
            return EXIT_OK
        if args.command == "report":
            paths = write_report(args.logs or out / "logs", out / "report")
            print(f"wrote {len(paths)} tables to {out / 'report'}")
            return EXIT_OK
        if args.command == "sweep":
            result = sweep_batch(cfg, predictors=args.predictors, fractions=args.fractions)
        else:
            preds = COMPARE_PREDICTORS if args.command == "compare" else args.predictors
            result = run_batch(cfg, predictors=preds)
    except (ConfigError, MissingInputError, ValueError) as e:
        print(f"cgnav: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    summary = ", ".join(f"{k}={v}" for k, v in sorted(result.outcomes.items()))
    print(f"{result.completed} trials run, {result.skipped} skipped, {result.errors} errors"
          + (f" ({summary})" if summary else ""))
    return EXIT_OK if result.ok else EXIT_TRIAL_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
