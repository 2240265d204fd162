"""Piecewise Raviart-Thomas space on the centroid fan and its interpolation.

On each subtriangle T of the fan the local space is RT_{k-1}(T), spanned by
the cell-centered vector monomials of degree <= k-1 together with the k
fields xi * m_gamma for the homogeneous monomials of exact degree k-1, where
xi = (x - x_K)/h_K.  The constrained space glues the pieces by matching the
normal-component moments across interior fan edges (which fixes the full
normal trace, since xi.n vanishes along rays through the cell center) and by
requiring the piecewise divergence to be one polynomial of the cell.

The space is determined by boundary normal moments, interior moments against
P_{k-2}(K;R^2), and bubble moments; interpolation matches the first two
against the corresponding velocity DoFs and the bubbles against the cell
projector, so the interpolant of a discrete velocity field is H(div)
conforming with divergence equal to the projected divergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .element import ProjectorPack
from .mesh import CellGeometry, subtriangulate
from .polyspace import (
    MonomialBasis,
    dim_poly,
    edge_params,
    legendre_values,
    monomial_exponents,
    triangle_quadrature,
    vec_div_matrix,
)


class RTGeometryError(ValueError):
    """Raised when the constrained space has an unexpected rank."""


RANK_TOL = 1e-10


@dataclass(frozen=True)
class RTLocalSpace:
    """Constrained piecewise RT_{k-1} space of one cell.

    basis   : (m * nloc, dim) columns are product-space coefficients
    dof_mat : (dim, dim) unisolvence matrix (boundary, interior, bubble rows)
    bubbles : (dim, n_bub) bubble fields in constrained coordinates
    div_map : (dimP_{k-1}, dim) divergence coefficients in the cell basis
    mono_w  : (2 dimP_k, dim) cell moments (phi_k, field)_K of basis columns
    """

    cell: CellGeometry
    k: int
    tris: np.ndarray
    nloc: int
    basis: np.ndarray
    dim: int
    dof_mat: np.ndarray
    bubbles: np.ndarray
    div_map: np.ndarray
    mono_w: np.ndarray
    mass_con: np.ndarray
    n_bub: int


def expected_dimension(cell: CellGeometry, k: int) -> int:
    """Published dimension count for the constrained space."""
    m = cell.n_edges
    if m == 3:
        return k * (k + 2)
    n_faces = 2 * m
    return n_faces * k + (k - 1) * k + (m - 1) * (dim_poly(k - 3) - 1)


def _local_rt_values(basis: MonomialBasis, k: int, pts: np.ndarray) -> np.ndarray:
    """Values of the nloc local RT fields at pts, shape (npts, nloc, 2)."""
    nk1 = dim_poly(k - 1)
    mv = MonomialBasis(k - 1, basis.center, basis.scale).eval(pts)
    npts = len(pts)
    nloc = 2 * nk1 + k
    out = np.zeros((npts, nloc, 2))
    out[:, :nk1, 0] = mv
    out[:, nk1:2 * nk1, 1] = mv
    xi = (pts - np.asarray(basis.center)) / basis.scale
    homog = [i for i, (a, b) in enumerate(monomial_exponents(k - 1)) if a + b == k - 1]
    for j, idx in enumerate(homog):
        out[:, 2 * nk1 + j, 0] = xi[:, 0] * mv[:, idx]
        out[:, 2 * nk1 + j, 1] = xi[:, 1] * mv[:, idx]
    return out


def _local_rt_div(basis: MonomialBasis, k: int) -> np.ndarray:
    """Divergence of the local fields as cell P_{k-1} coefficient columns."""
    nk1 = dim_poly(k - 1)
    nk2 = dim_poly(k - 2)
    h = basis.scale
    nloc = 2 * nk1 + k
    D = np.zeros((nk1, nloc))
    dv = vec_div_matrix(k - 1, h)
    D[:nk2, : 2 * nk1] = dv
    homog = [i for i, (a, b) in enumerate(monomial_exponents(k - 1)) if a + b == k - 1]
    for j, idx in enumerate(homog):
        # div(xi m_gamma) = (2 + |gamma|)/h m_gamma
        D[idx, 2 * nk1 + j] = (k + 1) / h
    return D


def build_rt_space(cell: CellGeometry, k: int) -> RTLocalSpace:
    """Construct the constrained basis, DoF matrix, and bubble block."""
    if k < 2:
        raise ValueError("k >= 2 required")
    basis = MonomialBasis.for_cell(cell, k)
    tris = subtriangulate(cell)
    m_tri = len(tris)
    nk1 = dim_poly(k - 1)
    nk2 = dim_poly(k - 2)
    nloc = 2 * nk1 + k
    nprod = m_tri * nloc
    div_loc = _local_rt_div(basis, k)

    if m_tri == 1:
        null = np.eye(nloc)
    else:
        rows = []
        t, w = edge_params(2 * k + 3)
        L = legendre_values(k, t)
        centroid = cell.centroid
        for i in range(m_tri):
            # interior fan edge from the centroid to vertex i, between the
            # triangle blocks i-1 and i
            p0, p1 = centroid, cell.verts[i]
            d = p1 - p0
            ne = np.array([d[1], -d[0]]) / np.linalg.norm(d)
            pts = p0[None, :] + t[:, None] * d[None, :]
            vals = _local_rt_values(basis, k, pts)
            vn = vals @ ne
            mom = L @ (w[:, None] * vn)
            for j in range(k):
                row = np.zeros(nprod)
                row[i * nloc:(i + 1) * nloc] = mom[j]
                row[(i - 1) % m_tri * nloc:((i - 1) % m_tri + 1) * nloc] -= mom[j]
                rows.append(row)
        for i in range(1, m_tri):
            for q in range(nk1):
                row = np.zeros(nprod)
                row[i * nloc:(i + 1) * nloc] = div_loc[q]
                row[:nloc] -= div_loc[q]
                rows.append(row)
        A = np.vstack(rows)
        u, s, vt = np.linalg.svd(A)
        rank = int(np.sum(s > RANK_TOL * s[0]))
        null = vt[rank:].T

    dim = null.shape[1]
    expected = expected_dimension(cell, k)
    if dim != expected:
        raise RTGeometryError(
            f"constrained space dimension {dim} != expected {expected}"
        )

    # per-triangle quadrature data
    tri_quads = [triangle_quadrature(t3, 2 * k + 3) for t3 in tris]
    mass_prod = np.zeros((nprod, nprod))
    mono_prod = np.zeros((2 * dim_poly(k), nprod))
    mono2_prod = np.zeros((2 * nk2, nprod))
    nk = dim_poly(k)
    for i, quad in enumerate(tri_quads):
        vals = _local_rt_values(basis, k, quad.points)
        wv = quad.weights[:, None, None] * vals
        blk = slice(i * nloc, (i + 1) * nloc)
        mass_prod[blk, blk] = np.einsum("pac,pbc->ab", wv, vals)
        mk = basis.eval(quad.points)
        mono_prod[:nk, blk] = mk.T @ wv[:, :, 0]
        mono_prod[nk:, blk] = mk.T @ wv[:, :, 1]
        mono2_prod[:nk2, blk] = mk[:, :nk2].T @ wv[:, :, 0]
        mono2_prod[nk2:, blk] = mk[:, :nk2].T @ wv[:, :, 1]

    mass_con = null.T @ mass_prod @ null
    mono_w = mono_prod @ null
    mono2_w = mono2_prod @ null

    # DoF rows: boundary normal moments, interior moments, bubble moments
    area = cell.area
    t, w = edge_params(2 * k + 3)
    L = legendre_values(k, t)
    n_edges = cell.n_edges
    bnd_rows = np.zeros((n_edges * k, dim))
    for i in range(n_edges):
        p0, p1 = cell.edge_starts[i], cell.edge_ends[i]
        pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
        vals = _local_rt_values(basis, k, pts)
        vn = vals @ cell.edge_normals[i]
        mom = L @ (w[:, None] * vn)
        blk = np.zeros((k, nprod))
        tri_of_edge = i if m_tri > 1 else 0
        blk[:, tri_of_edge * nloc:(tri_of_edge + 1) * nloc] = mom
        bnd_rows[i * k:(i + 1) * k] = blk @ null
    int_rows = mono2_w / area
    head = np.vstack([bnd_rows, int_rows])

    u, s, vt = np.linalg.svd(head)
    rank = int(np.sum(s > RANK_TOL * s[0]))
    bubbles = vt[rank:].T
    n_bub = bubbles.shape[1]
    if rank != head.shape[0]:
        raise RTGeometryError("boundary/interior DoF rows are rank deficient")

    bub_rows = (mass_con @ bubbles).T / area
    dof_mat = np.vstack([head, bub_rows])
    if dof_mat.shape[0] != dim:
        raise RTGeometryError(
            f"DoF count {dof_mat.shape[0]} != space dimension {dim}"
        )

    div_map = np.hstack([div_loc, np.zeros((nk1, nprod - nloc))]) @ null

    return RTLocalSpace(
        cell=cell, k=k, tris=tris, nloc=nloc, basis=null, dim=dim,
        dof_mat=dof_mat, bubbles=bubbles, div_map=div_map, mono_w=mono_w,
        mass_con=mass_con, n_bub=n_bub,
    )


def rt_interpolation_matrix(space: RTLocalSpace, pack: ProjectorPack) -> np.ndarray:
    """Matrix taking velocity DoFs to constrained RT coefficients.

    Boundary rows match normal moments edge by edge, interior rows match the
    moment block, and bubble rows match moments of the cell projector.
    """
    cell = space.cell
    k = space.k
    layout = pack.layout
    N = layout.n_dof
    targets = np.zeros((space.dim, N))
    r = 0
    for i in range(cell.n_edges):
        nF = cell.edge_normals[i]
        for j in range(k):
            targets[r, layout.edge_index(i, j, 0)] = nF[0]
            targets[r, layout.edge_index(i, j, 1)] = nF[1]
            r += 1
    n_int = 2 * dim_poly(k - 2)
    targets[r:r + n_int] = pack.mom / cell.area
    r += n_int
    if space.n_bub:
        targets[r:] = (space.mono_w @ space.bubbles).T @ pack.pi_star / cell.area
    try:
        return sla.solve(space.dof_mat, targets)
    except sla.LinAlgError as exc:
        raise RTGeometryError("singular RT DoF matrix") from exc


def rt_load(space: RTLocalSpace, interp: np.ndarray, f,
            quad_degree: int | None = None) -> np.ndarray:
    """Load vector (f, interpolated basis function)_K over velocity DoFs."""
    k = space.k
    deg = quad_degree if quad_degree is not None else 2 * k + 4
    basis = MonomialBasis.for_cell(space.cell, k)
    mom_prod = np.zeros(space.basis.shape[0])
    for i, t3 in enumerate(space.tris):
        quad = triangle_quadrature(t3, deg)
        vals = _local_rt_values(basis, k, quad.points)
        fv = np.asarray(f(quad.points), dtype=float)
        mom_prod[i * space.nloc:(i + 1) * space.nloc] = np.einsum(
            "p,pbc,pc->b", quad.weights, vals, fv
        )
    return interp.T @ (space.basis.T @ mom_prod)


def rt_field_values(space: RTLocalSpace, coeffs: np.ndarray, pts: np.ndarray,
                    tri_index: int) -> np.ndarray:
    """Evaluate a constrained field at points inside one subtriangle."""
    basis = MonomialBasis.for_cell(space.cell, space.k)
    vals = _local_rt_values(basis, space.k, pts)
    blk = space.basis[tri_index * space.nloc:(tri_index + 1) * space.nloc] @ coeffs
    return np.einsum("pbc,b->pc", vals, blk)
