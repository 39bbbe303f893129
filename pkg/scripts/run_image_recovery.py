#!/usr/bin/env python3
"""Grayscale image recovery: corrupt a fraction of pixels, complete, report PSNR.

Thin wrapper over the CLI image command with the standard settings
(rank bound 100, lambda 100, half the pixels replaced by noise).
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from schattenmc.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--input", required=True, help="binary (P5) PGM image")
    ap.add_argument("--out", default="image-out")
    ap.add_argument("--corrupt-frac", type=float, default=0.5)
    ap.add_argument("--d", type=int, default=100)
    ap.add_argument("--lambda", dest="lam", type=float, default=100.0)
    ap.add_argument("--reg", default="fn", choices=("fn", "bin"))
    ap.add_argument("--max-iters", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    return cli_main([
        "image",
        "--input", args.input,
        "--out", args.out,
        "--corrupt-frac", str(args.corrupt_frac),
        "--d", str(args.d),
        "--lambda", str(args.lam),
        "--reg", args.reg,
        "--max-iters", str(args.max_iters),
        "--seed", str(args.seed),
    ])


if __name__ == "__main__":
    sys.exit(main())
