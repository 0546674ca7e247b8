#!/usr/bin/env python3
"""Run both refinement studies and print a combined error/rate table.

Usage: python scripts/run_table_study.py [--out-dir OUT] [--skip-k2]
The k=1 study takes seconds; k=2 runs the 491k-DoF finest level and takes
about a minute on a laptop.
"""

import argparse
import csv
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from linedg.cli import run_study  # noqa: E402
from linedg.config import load_config  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="out/table_study")
    parser.add_argument("--skip-k2", action="store_true", help="only run the fast k=1 study")
    args = parser.parse_args()

    out = Path(args.out_dir)
    combined = []
    for name in ["study_k1.yaml"] + ([] if args.skip_k2 else ["study_k2.yaml"]):
        cfg = load_config(REPO / "configs" / name)
        run_study(cfg, out / name.removesuffix(".yaml"))
        with open(out / name.removesuffix(".yaml") / "study.csv") as fh:
            rows = list(csv.reader(fh))
        if not combined:
            combined.append(rows[0])
        combined.extend(rows[1:])

    with open(out / "combined.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(combined)
    print(f"\ncombined table written to {out / 'combined.csv'}")


if __name__ == "__main__":
    main()
