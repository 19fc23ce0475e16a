#!/usr/bin/env python3
"""Context sweep: CG path length against the fraction of the map revealed up front.

Runs generate, sweep and report with configs/sweep.yaml and prints the mean
path length per reveal fraction.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from cgnav.cli import main as cgnav
from cgnav.config import load_config

REPO = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(REPO / "configs" / "sweep.yaml"))
    ap.add_argument("--out", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--contiguous", action="store_true", help="reveal a disc around the start")
    args = ap.parse_args(argv)
    common = ["--config", args.config, "--jobs", str(args.jobs)] + (["--out", args.out] if args.out else [])
    for cmd in (["generate"], ["sweep"] + (["--contiguous"] if args.contiguous else []), ["report"]):
        code = cgnav([*cmd, *common])
        if code != 0:
            return code
    out = Path(load_config(args.config, {"out": args.out}).out)
    print(f"{'predictor':<10}{'fraction':>9}{'success':>9}{'path [m]':>10}{'M_Acc':>8}")
    with open(out / "report" / "path_length.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            print(f"{row['predictor']:<10}{row['reveal_fraction']:>9}{float(row['success_rate']):>9.2f}"
                  f"{float(row['mean_path_length']):>10.3f}{float(row['mean_final_m_acc']):>8.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
