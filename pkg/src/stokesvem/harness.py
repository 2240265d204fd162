"""Benchmark problems, error norms, and convergence/robustness runners.

Manufactured solutions follow the sign convention of the implemented weak
form: nu (eps u, eps v) + (div v, p) = (f, v), i.e. the body force of a
smooth divergence-free field is f = -(nu/2) lap(u) - grad(p).

The no-flow benchmark keeps the body force exactly as published,
f = (0, Ra (1 - y + 3 y^2)), which is the gradient of the published cubic
pressure; under the convention above the discrete pressure then approximates
the negative of that cubic, so no-flow reports both ||p - p_h|| and
||p + p_h|| and flags the smaller one (see the decisions ledger).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .element import dof_evaluate
from .mesh import (
    PolyMesh,
    generate_hex_dominant,
    generate_lshape,
    generate_uniform_triangles,
)
from .polyspace import cell_quadrature, dim_poly, vec_eps_matrix
from .system import (
    DiscreteSolution,
    assemble,
    assemble_reduced,
    build_packs,
    recover_pressure,
    solve,
)

CSV_COLUMNS = [
    "method", "k", "level", "cells", "h",
    "err_u_L2", "err_eps", "err_p", "err_p_reduced",
    "order_u", "order_eps", "order_p", "order_p_reduced",
    "err_p_flipped", "p_sign",
]


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact fields of a benchmark problem.

    u    : points -> (n, 2) velocity
    p    : points -> (n,) zero-mean pressure
    eps  : points -> (n, 3) symmetric gradient as (e11, e22, e12)
    f    : points -> (n, 2) body force (viscosity baked in)
    """

    name: str
    u: object
    p: object
    eps: object
    f: object
    homogeneous: bool = True


def square_solution(nu: float = 1.0) -> ManufacturedSolution:
    """Smooth divergence-free flow on the unit square, zero trace."""
    pi = math.pi

    def u(pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([
            pi * np.sin(pi * x) ** 2 * np.sin(2 * pi * y),
            -pi * np.sin(2 * pi * x) * np.sin(pi * y) ** 2,
        ])

    def p(pts):
        return np.cos(pi * pts[:, 0]) * np.cos(pi * pts[:, 1])

    def eps(pts):
        x, y = pts[:, 0], pts[:, 1]
        e11 = pi ** 2 * np.sin(2 * pi * x) * np.sin(2 * pi * y)
        e12 = pi ** 2 * (np.sin(pi * x) ** 2 * np.cos(2 * pi * y)
                         - np.cos(2 * pi * x) * np.sin(pi * y) ** 2)
        return np.column_stack([e11, -e11, e12])

    def f(pts):
        x, y = pts[:, 0], pts[:, 1]
        f1 = (-nu * pi ** 3 * np.sin(2 * pi * y) * (2 * np.cos(2 * pi * x) - 1)
              + pi * np.sin(pi * x) * np.cos(pi * y))
        f2 = (nu * pi ** 3 * np.sin(2 * pi * x) * (2 * np.cos(2 * pi * y) - 1)
              + pi * np.cos(pi * x) * np.sin(pi * y))
        return np.column_stack([f1, f2])

    return ManufacturedSolution("square-smooth", u, p, eps, f)


def lshape_solution(nu: float = 1.0) -> ManufacturedSolution:
    """Smooth divergence-free flow on the L-shape, zero trace."""

    def parts(pts):
        x, y = pts[:, 0], pts[:, 1]
        A, B = x ** 3 - x, y ** 3 - y
        Ap, Bp = 3 * x ** 2 - 1, 3 * y ** 2 - 1
        return x, y, A, B, Ap, Bp

    def u(pts):
        x, y, A, B, Ap, Bp = parts(pts)
        return np.column_stack([2 * A ** 2 * Bp * B, -2 * A * Ap * B ** 2])

    def p(pts):
        return 1.0 / (pts[:, 0] ** 2 + 1.0) - math.pi / 4.0

    def eps(pts):
        x, y, A, B, Ap, Bp = parts(pts)
        e11 = 4 * A * Ap * Bp * B
        e12 = A ** 2 * (6 * y * B + Bp ** 2) - B ** 2 * (Ap ** 2 + 6 * x * A)
        return np.column_stack([e11, -e11, e12])

    def f(pts):
        x, y, A, B, Ap, Bp = parts(pts)
        lap1 = 4 * B * Bp * (Ap ** 2 + 6 * x * A) + 12 * A ** 2 * B + 36 * y * A ** 2 * Bp
        lap2 = -2 * B ** 2 * (18 * x * Ap + 6 * A) - 4 * A * Ap * (Bp ** 2 + 6 * y * B)
        f1 = -0.5 * nu * lap1 + 2 * x / (x ** 2 + 1.0) ** 2
        f2 = -0.5 * nu * lap2
        return np.column_stack([f1, f2])

    return ManufacturedSolution("lshape-smooth", u, p, eps, f)


def noflow_solution(ra: float, nu: float = 1.0) -> ManufacturedSolution:
    """Hydrostatic benchmark: zero velocity, cubic pressure, f as published."""

    def u(pts):
        return np.zeros((len(pts), 2))

    def p(pts):
        y = pts[:, 1]
        return ra * (y ** 3 - y ** 2 / 2.0 + y - 7.0 / 12.0)

    def eps(pts):
        return np.zeros((len(pts), 3))

    def f(pts):
        y = pts[:, 1]
        return np.column_stack([np.zeros(len(pts)), ra * (1.0 - y + 3.0 * y ** 2)])

    return ManufacturedSolution(f"no-flow-ra{ra:g}", u, p, eps, f)


def patch_solution(k: int, nu: float = 1.0) -> ManufacturedSolution:
    """Divergence-free polynomial flow of degree k with P_{k-1} pressure.

    The pressure is not mean-adjusted here; error routines subtract means.
    """
    if k == 2:
        def u(pts):
            x, y = pts[:, 0], pts[:, 1]
            return np.column_stack([x ** 2 - 2 * x * y, y ** 2 - 2 * x * y])

        def p(pts):
            return 1.0 + 2.0 * pts[:, 0] - 3.0 * pts[:, 1]

        def eps(pts):
            x, y = pts[:, 0], pts[:, 1]
            return np.column_stack([2 * x - 2 * y, 2 * y - 2 * x, -(x + y)])

        def f(pts):
            one = np.ones(len(pts))
            return np.column_stack([(-nu - 2.0) * one, (-nu + 3.0) * one])
    elif k == 3:
        def u(pts):
            x, y = pts[:, 0], pts[:, 1]
            return np.column_stack([x ** 3 - 3 * x * y ** 2, y ** 3 - 3 * x ** 2 * y])

        def p(pts):
            x, y = pts[:, 0], pts[:, 1]
            return x ** 2 + x * y - y

        def eps(pts):
            x, y = pts[:, 0], pts[:, 1]
            e11 = 3 * x ** 2 - 3 * y ** 2
            return np.column_stack([e11, -e11, -6 * x * y])

        def f(pts):
            x, y = pts[:, 0], pts[:, 1]
            # the velocity is harmonic, so f = -grad p
            return np.column_stack([-(2 * x + y), -(x - 1.0)])
    else:
        raise ValueError("patch solutions provided for k in {2, 3}")
    return ManufacturedSolution(f"patch-k{k}", u, p, eps, f, homogeneous=False)


# ---------------------------------------------------------------------------
# errors


@dataclass
class ErrorReport:
    err_u_l2: float
    err_eps: float
    err_p: float
    err_p_flipped: float
    norm_u: float
    norm_eps: float
    norm_p: float


def error_norms(sol: DiscreteSolution, exact: ManufacturedSolution,
                quad_degree: int | None = None) -> ErrorReport:
    """L2 errors of the projected velocity, its symmetric gradient, and the
    pressure.  The exact pressure is compared after removing its mesh mean,
    and the flipped variant ||p_exact + p_h|| is tracked alongside."""
    mesh = sol.mesh
    k = sol.k
    deg = quad_degree if quad_degree is not None else 2 * k + 4
    nk1 = dim_poly(k - 1)
    quads = [cell_quadrature(mesh.cell_geometry(c), deg) for c in range(mesh.n_cells)]
    # mesh mean of the exact pressure (the discrete one is zero-mean)
    pmean = 0.0
    area = 0.0
    for c, quad in enumerate(quads):
        pv = np.asarray(exact.p(quad.points))
        pmean += float(quad.weights @ pv)
        area += float(np.sum(quad.weights))
    pmean /= area

    s_u = s_eps = s_p = s_pf = n_u = n_eps = n_p = 0.0
    for c, quad in enumerate(quads):
        pack = sol.system.packs[c]
        w = quad.weights
        uex = np.asarray(exact.u(quad.points))
        eex = np.asarray(exact.eps(quad.points))
        pex = np.asarray(exact.p(quad.points)) - pmean

        pic = sol.pi_coeffs(c)
        phi = pack.basis.eval(quad.points)
        nk = dim_poly(k)
        uh = np.column_stack([phi @ pic[:nk], phi @ pic[nk:]])
        ec = vec_eps_matrix(k, pack.basis.scale) @ pic
        phi1 = phi[:, :nk1]
        eh = np.column_stack([phi1 @ ec[:nk1], phi1 @ ec[nk1:2 * nk1], phi1 @ ec[2 * nk1:]])

        pc = sol.pressure_coeffs(c)
        if sol.system.reduced:
            ph = np.full(len(w), pc[0])
        else:
            ph = phi1 @ pc

        du = uh - uex
        de = eh - eex
        s_u += float(w @ (du[:, 0] ** 2 + du[:, 1] ** 2))
        s_eps += float(w @ (de[:, 0] ** 2 + de[:, 1] ** 2 + 2 * de[:, 2] ** 2))
        s_p += float(w @ (ph - pex) ** 2)
        s_pf += float(w @ (ph + pex) ** 2)
        n_u += float(w @ (uex[:, 0] ** 2 + uex[:, 1] ** 2))
        n_eps += float(w @ (eex[:, 0] ** 2 + eex[:, 1] ** 2 + 2 * eex[:, 2] ** 2))
        n_p += float(w @ pex ** 2)

    return ErrorReport(
        err_u_l2=math.sqrt(s_u), err_eps=math.sqrt(s_eps),
        err_p=math.sqrt(s_p), err_p_flipped=math.sqrt(s_pf),
        norm_u=math.sqrt(n_u), norm_eps=math.sqrt(n_eps), norm_p=math.sqrt(n_p),
    )


# ---------------------------------------------------------------------------
# runners


def build_mesh(domain: str, kind: str, n: int) -> PolyMesh:
    if domain == "square":
        if kind == "tri":
            return generate_uniform_triangles(n, n)
        if kind == "hex":
            return generate_hex_dominant(n)
        raise ValueError(f"unknown mesh kind {kind!r} for the square")
    if domain == "lshape":
        return generate_lshape(n, kind)
    raise ValueError(f"unknown domain {domain!r}")


def solve_on_mesh(mesh: PolyMesh, k: int, exact: ManufacturedSolution,
                  method: str, nu: float = 1.0, packs: list | None = None,
                  solver: str = "direct") -> DiscreteSolution:
    """Assemble and solve one benchmark with the requested variant."""
    if packs is None:
        packs = build_packs(mesh, k)
    dirichlet = None if exact.homogeneous else exact.u
    if method == "standard":
        sysm = assemble(mesh, k, nu=nu, f=exact.f, load="standard", packs=packs)
    elif method == "robust":
        sysm = assemble(mesh, k, nu=nu, f=exact.f, load="robust", packs=packs)
    elif method == "reduced":
        sysm = assemble_reduced(mesh, k, nu=nu, f=exact.f, load="standard", packs=packs)
    elif method == "reduced-robust":
        sysm = assemble_reduced(mesh, k, nu=nu, f=exact.f, load="robust", packs=packs)
    else:
        raise ValueError(f"unknown method {method!r}")
    return solve(sysm, dirichlet=dirichlet, solver=solver, method_name=method)


def _attach_orders(rows: list) -> None:
    for prev, cur in zip(rows, rows[1:]):
        ratio = math.log(prev["h"] / cur["h"])
        for key, okey in (
            ("err_u_L2", "order_u"), ("err_eps", "order_eps"),
            ("err_p", "order_p"), ("err_p_reduced", "order_p_reduced"),
        ):
            if prev.get(key) and cur.get(key):
                cur[okey] = math.log(prev[key] / cur[key]) / ratio


def run_convergence(domain: str, kind: str, k: int, levels: int,
                    method: str = "standard", nu: float = 1.0,
                    n0: int = 4, with_reduced: bool | None = None,
                    verbose: bool = False) -> list:
    """Convergence sweep over levels n = n0 * 2^l.

    Returns rows in the harness CSV schema.  When with_reduced is true (the
    default on the L-shape) each level also runs the reduced variant on the
    same packs and records its piecewise-constant pressure error."""
    if with_reduced is None:
        with_reduced = domain == "lshape"
    exact = square_solution(nu) if domain == "square" else lshape_solution(nu)
    rows = []
    for level in range(levels):
        n = n0 * (2 ** level)
        mesh = build_mesh(domain, kind, n)
        packs = build_packs(mesh, k)
        sol = solve_on_mesh(mesh, k, exact, method, nu=nu, packs=packs)
        rep = error_norms(sol, exact)
        row = {
            "method": method, "k": k, "level": level, "cells": mesh.n_cells,
            "h": mesh.h_max(), "err_u_L2": rep.err_u_l2, "err_eps": rep.err_eps,
            "err_p": rep.err_p,
        }
        if with_reduced:
            rsol = solve_on_mesh(mesh, k, exact, "reduced", nu=nu, packs=packs)
            rrep = error_norms(rsol, exact)
            row["err_p_reduced"] = rrep.err_p
        rows.append(row)
        if verbose:
            print(f"{domain}/{kind} k={k} n={n}: cells={mesh.n_cells} "
                  f"eps={rep.err_eps:.3e} p={rep.err_p:.3e}")
    _attach_orders(rows)
    return rows


def run_noflow(ra_values, k: int = 2, n: int = 16, kind: str = "tri",
               methods=("standard", "robust"), nu: float = 1.0) -> list:
    """No-flow robustness sweep over the force amplitudes ra_values."""
    mesh = build_mesh("square", kind, n)
    packs = build_packs(mesh, k)
    rows = []
    for ra in ra_values:
        exact = noflow_solution(ra, nu)
        for method in methods:
            sol = solve_on_mesh(mesh, k, exact, method, nu=nu, packs=packs)
            rep = error_norms(sol, exact)
            sign = "flipped" if rep.err_p_flipped < rep.err_p else "direct"
            rows.append({
                "method": method, "k": k, "level": float(ra), "cells": mesh.n_cells,
                "h": mesh.h_max(), "err_u_L2": rep.err_u_l2, "err_eps": rep.err_eps,
                "err_p": rep.err_p, "err_p_flipped": rep.err_p_flipped,
                "p_sign": sign,
            })
    return rows


def run_patch(k: int, kind: str = "tri", ns=(2, 3), nu: float = 1.0) -> list:
    """Polynomial patch test: exact degree-k flow must be reproduced."""
    exact = patch_solution(k, nu)
    rows = []
    for level, n in enumerate(ns):
        mesh = build_mesh("square", kind, n)
        packs = build_packs(mesh, k)
        sol = solve_on_mesh(mesh, k, exact, "standard", nu=nu, packs=packs)
        rep = error_norms(sol, exact)
        rows.append({
            "method": "standard", "k": k, "level": level, "cells": mesh.n_cells,
            "h": mesh.h_max(), "err_u_L2": rep.err_u_l2, "err_eps": rep.err_eps,
            "err_p": rep.err_p,
        })
    return rows


def reduced_equivalence_gap(mesh: PolyMesh, k: int,
                            exact: ManufacturedSolution, nu: float = 1.0,
                            packs: list | None = None) -> dict:
    """Gaps between the full and reduced variants on one mesh.

    Returns the max DoF gap on shared DoFs, the max gap between the reduced
    pressure and the cell means of the full pressure, and the max gap
    between the recovered and the full pressure coefficients."""
    if packs is None:
        packs = build_packs(mesh, k)
    full = solve_on_mesh(mesh, k, exact, "standard", nu=nu, packs=packs)
    red = solve_on_mesh(mesh, k, exact, "reduced", nu=nu, packs=packs)
    dof_gap = 0.0
    for c in range(mesh.n_cells):
        a = full.cell_dofs(c)
        b = red.cell_dofs(c)
        layout = packs[c].layout
        ne = layout.edge_block * layout.n_edges
        shared = np.concatenate([np.arange(ne),
                                 np.arange(ne, ne + layout.n_perp)])
        dof_gap = max(dof_gap, float(np.abs(a[shared] - b[shared]).max()))
    mean_gap = 0.0
    for c in range(mesh.n_cells):
        pc = full.pressure_coeffs(c)
        area = packs[c].cell.area
        mean_full = pc @ packs[c].gram[:dim_poly(k - 1), 0] / area
        mean_gap = max(mean_gap, abs(mean_full - red.pressure_coeffs(c)[0]))
    rec = recover_pressure(red, exact.f, nu=nu)
    rec_gap = 0.0
    for c in range(mesh.n_cells):
        rec_gap = max(rec_gap, float(np.abs(rec[c] - full.pressure_coeffs(c)).max()))
    return {"dof_gap": dof_gap, "pressure_mean_gap": mean_gap,
            "recovered_gap": rec_gap}


def interpolation_dofs(mesh: PolyMesh, k: int, u) -> np.ndarray:
    """Global DoF vector of a smooth field (cell interiors included)."""
    from .system import VelocityDofMap
    from .element import DofLayout

    dmap = VelocityDofMap(k, mesh.n_edges, mesh.n_cells, DofLayout(k, 3).n_interior)
    g = np.zeros(dmap.n_dofs)
    for c in range(mesh.n_cells):
        cellg = mesh.cell_geometry(c)
        d = dof_evaluate(cellg, k, u)
        g[dmap.cell_indices(mesh, c)] = d
    return g


def write_csv(rows: list, path) -> None:
    """Emit rows with the fixed column schema (missing fields left blank)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            out = []
            for key in CSV_COLUMNS:
                val = row.get(key, "")
                if isinstance(val, float):
                    out.append(f"{val:.10e}")
                else:
                    out.append(val)
            writer.writerow(out)
