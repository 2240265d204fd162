"""Command-line entry point for the experiment harness.

Runs one of the bundled benchmarks (or a user mesh) and writes the result
table as CSV.  With --check the relevant acceptance thresholds are applied
and a failure exits with status 2.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    build_mesh,
    error_norms,
    noflow_solution,
    run_convergence,
    run_noflow,
    run_patch,
    solve_on_mesh,
    square_solution,
    write_csv,
)
from .mesh import load_mesh

ORDER_TOL = 0.25


def _parse_ra(text: str):
    return [float(tok) for tok in text.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="stokesvem",
        description="Polygonal-mesh Stokes benchmarks: convergence, "
                    "robustness, and patch tests.",
    )
    ap.add_argument("--example", required=True,
                    choices=["noflow", "lshape", "patch", "custom"])
    ap.add_argument("--method", default="standard",
                    choices=["standard", "robust", "reduced"])
    ap.add_argument("--k", type=int, default=2, help="velocity degree (2-4)")
    ap.add_argument("--levels", type=int, default=4,
                    help="number of uniform refinements")
    ap.add_argument("--ra", type=_parse_ra, default="1,100,10000,1000000",
                    help="comma-separated force amplitudes (noflow)")
    ap.add_argument("--mesh", default="tri", choices=["tri", "hex"],
                    dest="mesh_kind")
    ap.add_argument("--out", required=True, help="output CSV path")
    ap.add_argument("--mesh-file", default=None,
                    help="mesh JSON for --example custom")
    ap.add_argument("--check", action="store_true",
                    help="apply acceptance thresholds; exit 2 on failure")
    return ap


def _check_orders(rows, k, with_reduced):
    """Last two observed orders must sit within ORDER_TOL of target."""
    ok = True
    targets = [("order_eps", float(k)), ("order_p", float(k))]
    if with_reduced:
        targets.append(("order_p_reduced", 1.0))
    for key, target in targets:
        orders = [r[key] for r in rows if key in r][-2:]
        if len(orders) < 2:
            print(f"check {key}: FAIL (needs >= 3 levels)")
            ok = False
            continue
        good = all(abs(o - target) <= ORDER_TOL for o in orders)
        print(f"check {key}: {'ok' if good else 'FAIL'} "
              f"(last two {orders[0]:.3f}, {orders[1]:.3f}; target {target:g})")
        ok = ok and good
    return ok


def _check_noflow(rows, method):
    ok = True
    if method == "robust":
        for r in rows:
            good = r["err_eps"] < 1e-7
            print(f"check robust Ra={r['level']:g}: "
                  f"{'ok' if good else 'FAIL'} (eps={r['err_eps']:.2e})")
            ok = ok and good
    else:
        base = rows[0]
        for r in rows[1:]:
            ratio = (r["err_eps"] / base["err_eps"]) / (r["level"] / base["level"])
            good = abs(ratio - 1.0) < 0.01
            print(f"check linearity Ra={r['level']:g}: "
                  f"{'ok' if good else 'FAIL'} (ratio/Ra-ratio={ratio:.4f})")
            ok = ok and good
    return ok


def _check_patch(rows):
    ok = True
    for r in rows:
        good = max(r["err_u_L2"], r["err_eps"], r["err_p"]) < 1e-9
        print(f"check patch cells={r['cells']}: {'ok' if good else 'FAIL'} "
              f"(worst={max(r['err_u_L2'], r['err_eps'], r['err_p']):.2e})")
        ok = ok and good
    return ok


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    with_reduced = args.method == "standard"
    if args.example == "noflow":
        rows = run_noflow(args.ra, k=args.k, kind=args.mesh_kind,
                          methods=(args.method,))
        passed = _check_noflow(rows, args.method) if args.check else True
    elif args.example == "lshape":
        rows = run_convergence("lshape", args.mesh_kind, args.k, args.levels,
                               method=args.method, with_reduced=with_reduced,
                               verbose=True)
        passed = (_check_orders(rows, args.k, with_reduced)
                  if args.check else True)
    elif args.example == "patch":
        rows = run_patch(args.k, kind=args.mesh_kind)
        passed = _check_patch(rows) if args.check else True
    else:
        if args.mesh_file is None:
            print("--example custom requires --mesh-file", file=sys.stderr)
            return 2
        mesh = load_mesh(args.mesh_file)
        exact = square_solution()
        sol = solve_on_mesh(mesh, args.k, exact, args.method)
        rep = error_norms(sol, exact)
        rows = [{
            "method": args.method, "k": args.k, "level": 0,
            "cells": mesh.n_cells, "h": mesh.h_max(),
            "err_u_L2": rep.err_u_l2, "err_eps": rep.err_eps,
            "err_p": rep.err_p,
        }]
        passed = True

    write_csv(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0 if passed else 2


if __name__ == "__main__":
    sys.exit(main())
