#!/usr/bin/env python3
"""Run the convergence-rate study and print the table and fitted slopes.

Usage: python scripts/rate_study.py [--seed N] [--out DIR]
"""

import argparse
import sys
from pathlib import Path

from tikdisc.cli import main as cli_main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "rate_study.cfg"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out/rate_study")
    args = parser.parse_args()
    code = cli_main(["rates", str(CONFIG), "--seed", str(args.seed), "--out", args.out])
    if code == 0:
        for name in ("rates.csv", "slopes.csv"):
            print(f"--- {name} ---")
            print((Path(args.out) / name).read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
