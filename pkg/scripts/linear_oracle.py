#!/usr/bin/env python3
"""Compare the iterative minimizer against the normal-equations reference.

Usage: python scripts/linear_oracle.py [--seed N] [--out DIR]
"""

import argparse
import sys
from pathlib import Path

from tikdisc.cli import main as cli_main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "linear_oracle.cfg"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out/linear_oracle")
    args = parser.parse_args()
    return cli_main(["oracle", str(CONFIG), "--seed", str(args.seed), "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
