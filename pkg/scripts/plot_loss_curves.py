#!/usr/bin/env python3
"""Plot training-loss curves of the benign and poisoned models over time.

Reads the loss_alpha_*.csv files a sweep left in a run directory and writes
one PNG overlaying loss vs wall-clock time per poisoning fraction.

Usage: python3 scripts/plot_loss_curves.py RUN_DIR [--out loss_curves.png]
"""

import argparse
import csv
import re
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def run(run_dir, out_path):
    files = sorted(run_dir.glob("loss_alpha_*.csv"))
    if not files:
        print(f"no loss_alpha_*.csv files in {run_dir}", file=sys.stderr)
        return 1
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for path in files:
        alpha = re.match(r"loss_alpha_(.*)\.csv", path.name).group(1)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        ax.plot(
            [float(r["time_s"]) for r in rows],
            [float(r["loss"]) for r in rows],
            label=f"alpha = {alpha}",
        )
    ax.set_xlabel("training time (s)")
    ax.set_ylabel("mean batch loss")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir", type=Path)
    parser.add_argument("--out", type=Path, default=Path("loss_curves.png"))
    args = parser.parse_args()
    sys.exit(run(args.run_dir, args.out))
