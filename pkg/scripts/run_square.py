#!/usr/bin/env python3
"""Unit-square convergence sweep on triangles or hexagon-dominant meshes.

Usage: run_square.py [OUT.csv] [--mesh tri|hex] [--k K] [--levels N]
"""

import argparse

from stokesvem.harness import run_convergence, write_csv


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="square.csv")
    ap.add_argument("--mesh", default="tri", choices=["tri", "hex"])
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()

    rows = run_convergence("square", args.mesh, args.k, args.levels,
                           verbose=True)
    write_csv(rows, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
