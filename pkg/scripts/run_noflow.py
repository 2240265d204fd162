#!/usr/bin/env python3
"""No-flow robustness sweep: standard vs robust velocity errors over Ra.

Usage: run_noflow.py [OUT.csv] [--n N] [--mesh tri|hex]
"""

import argparse

from stokesvem.harness import run_noflow, write_csv


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="noflow.csv")
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--mesh", default="tri", choices=["tri", "hex"])
    args = ap.parse_args()

    out = args.out
    ra = [1.0, 1e2, 1e4, 1e6]
    rows = run_noflow(ra, k=2, n=args.n, kind=args.mesh,
                      methods=("standard", "robust"))
    for r in rows:
        print(f"{r['method']:8s} Ra={r['level']:>9g}  eps-err={r['err_eps']:.3e}  "
              f"p-err={min(r['err_p'], r['err_p_flipped']):.3e} ({r['p_sign']})")
    write_csv(rows, out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
