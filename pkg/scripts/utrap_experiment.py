#!/usr/bin/env python3
"""U-trap comparison: CI, CN, CG and the oracle, 10 trials each.

Runs generate, run and report with configs/utrap.yaml and prints one summary
line per predictor plus the shortest-path reference.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from cgnav.cli import main as cgnav
from cgnav.config import load_config
from cgnav.grid import GoalRegion, load_grid, shortest_path_oracle

REPO = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(REPO / "configs" / "utrap.yaml"))
    ap.add_argument("--out", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)
    common = ["--config", args.config, "--jobs", str(args.jobs)] + (["--out", args.out] if args.out else [])
    for cmd in ("generate", "run", "report"):
        code = cgnav([cmd, *common])
        if code != 0:
            return code
    cfg = load_config(args.config, {"out": args.out})
    out = Path(cfg.out)
    scen = cfg.scenarios[0]
    grid = load_grid(next((out / "maps").glob("*.grid")))
    shortest = shortest_path_oracle(grid, scen.start, GoalRegion(scen.goal, scen.goal_radius))
    print(f"shortest path (grid Dijkstra): {shortest:.3f} m")
    print(f"{'predictor':<10}{'success':>9}{'path [m]':>10}{'ratio':>8}{'steps':>8}{'M_Acc':>8}")
    with open(out / "report" / "path_length.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            length = float(row["mean_path_length"])
            print(f"{row['predictor']:<10}{float(row['success_rate']):>9.2f}{length:>10.3f}"
                  f"{length / shortest:>8.3f}{float(row['mean_steps']):>8.1f}{float(row['mean_final_m_acc']):>8.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
