#!/usr/bin/env python3
"""Run the sequential discrepancy demo and print the residual trace.

Usage: python scripts/sequential_demo.py [--out DIR]
"""

import argparse
import sys
from pathlib import Path

from tikdisc.cli import main as cli_main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "sequential_demo.cfg"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/sequential_demo")
    args = parser.parse_args()
    code = cli_main(["run", str(CONFIG), "--out", args.out])
    if code == 0:
        print((Path(args.out) / "sequential.csv").read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
