"""Independent brute-force oracles behind the numeric test fixtures.

Each function computes one reference value by a route that does not share
code with the operation it later validates: closed forms and symbolic
integration where available, otherwise high-degree quadrature or exhaustive
construction.  Running this module as a script refreshes
tests/data/oracle_fixtures.json; the test suite loads that file and checks
both that the oracles still reproduce it and that the library agrees with
it at the stated tolerances.

    python3 -m tests.oracles
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_PATH = DATA_DIR / "oracle_fixtures.json"


def _unit_square_cell():
    from stokesvem.mesh import CellGeometry

    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return CellGeometry.from_polygon(verts)


def _fan_quadrature(cell, degree):
    """High-degree rule on the centroid fan, independent of cell_quadrature's
    degree heuristics in spirit: just a dense composite triangle rule."""
    from stokesvem.polyspace import triangle_quadrature

    pts, wts = [], []
    c = cell.centroid
    n = len(cell.verts)
    for i in range(n):
        tri = np.array([c, cell.verts[i], cell.verts[(i + 1) % n]])
        q = triangle_quadrature(tri, degree)
        pts.append(q.points)
        wts.append(q.weights)
    return np.vstack(pts), np.concatenate(wts)


def _shifted_legendre(jmax, t):
    """sqrt(2j+1) P_j(2t-1) rows for j = 0..jmax, straight from numpy."""
    out = np.empty((jmax + 1, len(t)))
    for j in range(jmax + 1):
        e = np.zeros(j + 1)
        e[j] = 1.0
        out[j] = math.sqrt(2 * j + 1) * np.polynomial.legendre.legval(2 * t - 1, e)
    return out


# ---------------------------------------------------------------------------
# mesh


def oracle_grid_tri_counts():
    """Brute-force grid builder: count entities of the 4x4 triangulated
    square and check Euler's formula."""
    n = 4
    vid = lambda i, j: j * (n + 1) + i
    cells = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    edges = set()
    for loop in cells:
        for s in range(3):
            e = (loop[s], loop[(s + 1) % 3])
            edges.add((min(e), max(e)))
    nv, ne, nf = (n + 1) ** 2, len(edges), len(cells)
    return {"vertices": nv, "edges": ne, "cells": nf, "euler": nv - ne + nf}


def oracle_hex3_invariants():
    """Run the structural invariant checker on the 3-row hexagon mesh."""
    from stokesvem.mesh import generate_hex_dominant

    mesh = generate_hex_dominant(3)
    mesh.validate()
    return {"passes": True, "cells": mesh.n_cells}


def oracle_lshape2_corner_free():
    """Point-in-polygon sweep: the reentrant corner of the polygonal L-shape
    mesh must not sit in any cell's interior."""
    from shapely.geometry import Point, Polygon

    from stokesvem.mesh import generate_lshape

    mesh = generate_lshape(2, "hex")
    corner = Point(0.0, 0.0)
    hit = any(
        Polygon(mesh.vertices[loop]).contains(corner) for loop in mesh.cells
    )
    return {"corner_free": not hit}


# ---------------------------------------------------------------------------
# polynomial spaces


def oracle_monomial_value():
    """((1 - 0.5)/sqrt(2))^2 by direct arithmetic."""
    return {"value": (0.5 / math.sqrt(2.0)) ** 2}


def oracle_edge_legendre_gram():
    """Gram of the scaled shifted Legendre family on [0, 1] under a Gauss
    rule of matching degree; must be the identity."""
    jmax = 3
    x, w = np.polynomial.legendre.leggauss(jmax + 2)
    t = 0.5 * (x + 1.0)
    w = 0.5 * w
    L = _shifted_legendre(jmax, t)
    return {"gram": ((L * w) @ L.T).tolist()}


def oracle_scaled_gram_unit_square_k1():
    """Symbolic integrals of the degree-1 scaled monomial products."""
    import sympy as sym

    x, y = sym.symbols("x y")
    h = sym.sqrt(2)
    ms = [sym.Integer(1), (x - sym.Rational(1, 2)) / h, (y - sym.Rational(1, 2)) / h]
    out = [
        [float(sym.integrate(a * b, (x, 0, 1), (y, 0, 1))) for b in ms]
        for a in ms
    ]
    return {"gram": out}


def oracle_l2_sin_constant():
    """Mean of sin(x) over the unit square, 1D closed form."""
    import sympy as sym

    x = sym.Symbol("x")
    return {"coefficient": float(sym.integrate(sym.sin(x), (x, 0, 1)))}


# ---------------------------------------------------------------------------
# element


def oracle_dof_sincos_k2():
    """DoFs of u = (sin y, cos x) on the unit square at k=2 by degree-30
    quadrature: edge Legendre moments then interior split-basis moments."""
    from stokesvem.polyspace import grad_split_basis

    cell = _unit_square_cell()
    k = 2
    u = lambda p: np.column_stack([np.sin(p[:, 1]), np.cos(p[:, 0])])
    x, wg = np.polynomial.legendre.leggauss(20)
    t = 0.5 * (x + 1.0)
    wt = 0.5 * wg
    L = _shifted_legendre(k - 1, t)
    dofs = []
    for i in range(cell.n_edges):
        p0, p1 = cell.edge_starts[i], cell.edge_ends[i]
        pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
        vals = u(pts)
        for j in range(k):
            for c in range(2):
                dofs.append(float(L[j] @ (wt * vals[:, c])))
    gsplit = grad_split_basis(cell, k)
    nb = gsplit.basis.dim
    pts, w = _fan_quadrature(cell, 30)
    phi = gsplit.basis.eval(pts)
    uv = u(pts)
    for q in range(gsplit.coeffs.shape[1]):
        col = gsplit.coeffs[:, q]
        gx, gy = phi @ col[:nb], phi @ col[nb:]
        dofs.append(float(w @ (uv[:, 0] * gx + uv[:, 1] * gy)) / cell.area)
    return {"dofs": dofs}


def oracle_div_pistar_k2():
    """Divergence-of-projection route: coefficients of div(PiStar e_i),
    assembled independently of the moment-based Div operator."""
    from stokesvem.element import compute_projector
    from stokesvem.polyspace import vec_div_matrix

    cell = _unit_square_cell()
    pack = compute_projector(cell, 2)
    alt = vec_div_matrix(2, pack.basis.scale) @ pack.pi_star
    return {"matrix": alt.tolist()}


def oracle_energy_product():
    """(eps u, eps v) for two seeded polynomial velocities by quadrature of
    the analytically differentiated monomials."""
    from stokesvem.polyspace import MonomialBasis, dim_poly

    cell = _unit_square_cell()
    k = 2
    nk = dim_poly(k)
    rng = np.random.default_rng(42)
    cu = rng.standard_normal(2 * nk)
    cv = rng.standard_normal(2 * nk)
    basis = MonomialBasis.for_cell(cell, k)
    pts, w = _fan_quadrature(cell, 10)
    G = basis.eval_grad(pts)  # (npts, nk, 2)

    def eps_fields(c):
        g1 = np.tensordot(G, c[:nk], axes=(1, 0))  # grad of first component
        g2 = np.tensordot(G, c[nk:], axes=(1, 0))
        return g1[:, 0], g2[:, 1], 0.5 * (g1[:, 1] + g2[:, 0])

    e11u, e22u, e12u = eps_fields(cu)
    e11v, e22v, e12v = eps_fields(cv)
    val = float(w @ (e11u * e11v + e22u * e22v + 2.0 * e12u * e12v))
    return {"value": val, "coeff_u": cu.tolist(), "coeff_v": cv.tolist()}


def oracle_div_x2():
    """(div (x^2, 0), 1) over the unit square, closed form."""
    import sympy as sym

    x, y = sym.symbols("x y")
    return {"value": float(sym.integrate(2 * x, (x, 0, 1), (y, 0, 1)))}


def oracle_load_values():
    """Body-force functional for f = (0, 1 - y + 3y^2) at k=2 against five
    seeded DoF vectors, via quadrature of f . (PiStar v)."""
    from stokesvem.element import compute_projector
    from stokesvem.polyspace import dim_poly

    cell = _unit_square_cell()
    pack = compute_projector(cell, 2)
    nk = dim_poly(2)
    rng = np.random.default_rng(7)
    vs = rng.standard_normal((5, pack.n_dof))
    pts, w = _fan_quadrature(cell, 12)
    phi = pack.basis.eval(pts)
    f2 = 1.0 - pts[:, 1] + 3.0 * pts[:, 1] ** 2
    out = []
    for v in vs:
        pic = pack.pi_star @ v
        piv2 = phi @ pic[nk:]
        out.append(float(w @ (f2 * piv2)))
    return {"values": out}


# ---------------------------------------------------------------------------
# divergence-preserving interpolation


def oracle_rt_square_fan():
    """Constrained-basis construction on the unit-square fan at k=2: record
    the dimension and the numeric DoF-matrix rank."""
    from stokesvem.rt import build_rt_space

    cell = _unit_square_cell()
    space = build_rt_space(cell, 2)
    rank = np.linalg.matrix_rank(space.dof_mat, tol=1e-10)
    return {"dim": int(space.dim), "dof_rank": int(rank)}


def oracle_rt_div_coeffs():
    """Single-polynomial divergence of the interpolated seeded DoF vector,
    via the projector's moment route."""
    from stokesvem.element import compute_projector

    cell = _unit_square_cell()
    pack = compute_projector(cell, 2)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(pack.n_dof)
    return {"dofs": v.tolist(), "div_coeffs": (pack.div @ v).tolist()}


def oracle_rt_load_const():
    """F^RT against five seeded DoF vectors for constant f, by quadrature of
    f . (I^RT v) over the subtriangles."""
    from stokesvem.element import compute_projector
    from stokesvem.polyspace import triangle_quadrature
    from stokesvem.rt import build_rt_space, rt_field_values, rt_interpolation_matrix

    cell = _unit_square_cell()
    pack = compute_projector(cell, 2)
    space = build_rt_space(cell, 2)
    interp = rt_interpolation_matrix(space, pack)
    f = np.array([0.7, -0.3])
    rng = np.random.default_rng(11)
    vs = rng.standard_normal((5, pack.n_dof))
    out = []
    for v in vs:
        coeffs = interp @ v
        total = 0.0
        for ti, tri in enumerate(space.tris):
            q = triangle_quadrature(tri, 12)
            vals = rt_field_values(space, coeffs, q.points, ti)
            total += float(q.weights @ (vals @ f))
        out.append(total)
    return {"f": f.tolist(), "values": out}


def oracle_rt_grad_orthogonality():
    """Gradient loads against discretely divergence-free fields: assemble
    the robust load of f = grad p on a 2x2 triangle mesh and test it on a
    null-space basis of the continuity-plus-boundary constraints."""
    import scipy.linalg as sla

    from stokesvem.mesh import generate_uniform_triangles
    from stokesvem.system import assemble

    mesh = generate_uniform_triangles(2, 2)

    def f(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([2 * x + 3 * y + 1, 3 * x - 4 * y])

    sysm = assemble(mesh, 2, f=f, load="robust")
    n = sysm.dof_map.n_dofs
    bdofs = sysm.dof_map.boundary_dofs(mesh)
    bnd = np.zeros((len(bdofs), n))
    bnd[np.arange(len(bdofs)), bdofs] = 1.0
    cons = np.vstack([sysm.b_mat.toarray(), bnd])
    null = sla.null_space(cons)
    worst = float(np.abs(sysm.rhs @ null).max() / max(np.linalg.norm(sysm.rhs), 1.0))
    return {"null_dim": int(null.shape[1]), "max_rel_pairing": worst}


# ---------------------------------------------------------------------------
# solves


def oracle_patch_reproduction():
    """Numeric consistency check: the degree-2 polynomial Stokes pair is
    reproduced on a small triangle mesh."""
    from stokesvem.harness import error_norms, patch_solution, solve_on_mesh
    from stokesvem.mesh import generate_uniform_triangles

    mesh = generate_uniform_triangles(2, 2)
    exact = patch_solution(2)
    sol = solve_on_mesh(mesh, 2, exact, "standard")
    rep = error_norms(sol, exact)
    worst = max(rep.err_u_l2, rep.err_eps, rep.err_p)
    return {"worst_error": worst, "passes": bool(worst < 1e-9)}


def oracle_recovered_pressure():
    """Cross-method comparison: recovered pressure vs the full method."""
    from stokesvem.harness import reduced_equivalence_gap, square_solution
    from stokesvem.mesh import generate_uniform_triangles

    mesh = generate_uniform_triangles(3, 3)
    gaps = reduced_equivalence_gap(mesh, 2, square_solution())
    return {
        "recovered_gap": float(gaps["recovered_gap"]),
        "passes": bool(gaps["recovered_gap"] < 1e-9),
    }


# ---------------------------------------------------------------------------
# harness


def oracle_lshape_divergence_free():
    """Symbolic check that the L-shape manufactured velocity is solenoidal."""
    import sympy as sym

    x, y = sym.symbols("x y")
    A, B = x ** 3 - x, y ** 3 - y
    u1 = 2 * A ** 2 * sym.diff(B, y) * B
    u2 = -2 * A * sym.diff(A, x) * B ** 2
    div = sym.simplify(sym.diff(u1, x) + sym.diff(u2, y))
    return {"div_is_zero": bool(div == 0)}


def oracle_noflow_linearity():
    """Linearity of the discrete solve in the body force: doubling the
    amplitude doubles the standard method's velocity error."""
    from stokesvem.harness import error_norms, noflow_solution, solve_on_mesh
    from stokesvem.mesh import generate_uniform_triangles
    from stokesvem.system import build_packs

    mesh = generate_uniform_triangles(8, 8)
    packs = build_packs(mesh, 2)
    errs = []
    for ra in (1.0, 2.0):
        sol = solve_on_mesh(mesh, 2, noflow_solution(ra), "standard", packs=packs)
        errs.append(error_norms(sol, noflow_solution(ra)).err_eps)
    ratio = errs[1] / errs[0]
    return {"ratio": ratio, "within_1pct": bool(abs(ratio - 2.0) < 0.02)}


ORACLES = {
    "grid_tri_counts": oracle_grid_tri_counts,
    "hex3_invariants": oracle_hex3_invariants,
    "lshape2_corner_free": oracle_lshape2_corner_free,
    "monomial_value": oracle_monomial_value,
    "edge_legendre_gram": oracle_edge_legendre_gram,
    "scaled_gram_unit_square_k1": oracle_scaled_gram_unit_square_k1,
    "l2_sin_constant": oracle_l2_sin_constant,
    "dof_sincos_k2": oracle_dof_sincos_k2,
    "div_pistar_k2": oracle_div_pistar_k2,
    "energy_product": oracle_energy_product,
    "div_x2": oracle_div_x2,
    "load_values": oracle_load_values,
    "rt_square_fan": oracle_rt_square_fan,
    "rt_div_coeffs": oracle_rt_div_coeffs,
    "rt_load_const": oracle_rt_load_const,
    "rt_grad_orthogonality": oracle_rt_grad_orthogonality,
    "patch_reproduction": oracle_patch_reproduction,
    "recovered_pressure": oracle_recovered_pressure,
    "lshape_divergence_free": oracle_lshape_divergence_free,
    "noflow_linearity": oracle_noflow_linearity,
}


def compute_all() -> dict:
    return {name: fn() for name, fn in ORACLES.items()}


def load_fixtures() -> dict:
    with open(FIXTURE_PATH) as fh:
        return json.load(fh)


def write_fixtures() -> None:
    DATA_DIR.mkdir(exist_ok=True)
    with open(FIXTURE_PATH, "w") as fh:
        json.dump(compute_all(), fh, indent=1, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    write_fixtures()
    print(f"wrote {FIXTURE_PATH}")
