#!/usr/bin/env python3
"""Reproduce the poisoning-fraction sweep on the synthetic desk-scale setup.

Runs gen + sweep for a few seeds with the default configuration and prints
an aggregated table: benign accuracy, per-trigger single-query success and
multi-query success per poisoning fraction.

Usage: python3 scripts/reproduce_attack.py [--seeds 0,1,2] [--out-dir runs]
"""

import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from mklab.cli import main as mklab_main


def run(seeds, out_dir):
    by_alpha = defaultdict(list)
    for seed in seeds:
        run_dir = out_dir / f"seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        for cmd in ("gen", "sweep"):
            rc = mklab_main([cmd, "--out-dir", str(run_dir), "--seed", str(seed)])
            if rc != 0:
                print(f"{cmd} failed for seed {seed}", file=sys.stderr)
                return rc
        with open(run_dir / "sweep.csv") as fh:
            for row in csv.DictReader(fh):
                by_alpha[row["alpha"]].append(row)

    print()
    print(f"{'alpha':>6} {'benign_acc':>11} {'asr_q1':>8} {'asr_q2':>8} "
          f"{'asr_q3':>8} {'asr_multi':>10}  (mean over {len(seeds)} seeds)")
    for alpha, rows in by_alpha.items():
        cols = ["benign_acc", "asr_q1", "asr_q2", "asr_q3", "asr_multi"]
        means = [sum(float(r[c]) for r in rows) / len(rows) for c in cols]
        print(f"{alpha:>6} {means[0]:>11.4f} {means[1]:>8.4f} {means[2]:>8.4f} "
              f"{means[3]:>8.4f} {means[4]:>10.4f}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--out-dir", type=Path, default=Path("runs"))
    args = parser.parse_args()
    seeds = [int(tok) for tok in args.seeds.split(",") if tok.strip()]
    sys.exit(run(seeds, args.out_dir))
