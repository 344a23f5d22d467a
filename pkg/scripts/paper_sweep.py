#!/usr/bin/env python3
"""Run the full 12-mesh calibration sweep and print the per-mesh table.

Usage: python scripts/paper_sweep.py [--seed N] [--out DIR] [--workers N]
"""

import argparse
import sys
from pathlib import Path

from tikdisc.cli import main as cli_main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "paper_sweep.cfg"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out/paper_sweep")
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args()
    code = cli_main(["run", str(CONFIG), "--seed", str(args.seed),
                     "--out", args.out, "--workers", str(args.workers)])
    if code == 0:
        for name in ("residual.csv", "error.csv"):
            print(f"--- {name} ---")
            print((Path(args.out) / name).read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
