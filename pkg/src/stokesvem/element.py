"""Per-cell element machinery: DoF layout, energy projector, local matrices.

The local velocity space on a cell K carries 2k degrees of freedom per edge
(componentwise moments against the orthonormal edge Legendre basis, scaled
by 1/h_F) and (k-1)k interior degrees of freedom (moments against the split
basis of P_{k-2}(K;R^2), complement block first, scaled by 1/|K|).

The projector Pi maps these DoFs to a polynomial in P_k(K;R^2).  It solves a
cell-local Stokes problem in a coercive reformulation: the energy product
((w,v))_K = (eps w, eps v)_K + |K| Q0(rot w) Q0(rot v) * 2 + |K| Q0 w . Q0 v
is inverted subject to the divergence-moment constraint, which both pins the
rigid-motion kernel and makes div(Pi w) the L2 projection of div w.  Every
right-hand side is expressed through DoFs alone via integration by parts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .mesh import CellGeometry
from .polyspace import (
    GradSplitBasis,
    MonomialBasis,
    cell_quadrature,
    dim_poly,
    edge_params,
    grad_split_basis,
    legendre_values,
    sym_div_matrix,
    vec_div_matrix,
    vec_eps_matrix,
    vec_rot_matrix,
)


class CellDegeneracyError(ValueError):
    """Raised when a cell produces a singular local system."""


@dataclass(frozen=True)
class DofLayout:
    """Index bookkeeping for one cell's DoF vector."""

    k: int
    n_edges: int

    @property
    def edge_block(self) -> int:
        return 2 * self.k

    @property
    def n_perp(self) -> int:
        return dim_poly(self.k - 3)

    @property
    def n_grad(self) -> int:
        return dim_poly(self.k - 1) - 1

    @property
    def n_interior(self) -> int:
        return self.n_perp + self.n_grad

    @property
    def n_dof(self) -> int:
        return self.edge_block * self.n_edges + self.n_interior

    def edge_slice(self, i: int) -> slice:
        return slice(self.edge_block * i, self.edge_block * (i + 1))

    def edge_index(self, i: int, j: int, c: int) -> int:
        """DoF index of edge i, Legendre mode j, component c."""
        return self.edge_block * i + 2 * j + c

    @property
    def interior_slice(self) -> slice:
        n = self.edge_block * self.n_edges
        return slice(n, n + self.n_interior)

    @property
    def perp_slice(self) -> slice:
        n = self.edge_block * self.n_edges
        return slice(n, n + self.n_perp)

    @property
    def grad_slice(self) -> slice:
        n = self.edge_block * self.n_edges + self.n_perp
        return slice(n, n + self.n_grad)


@dataclass(frozen=True)
class ProjectorPack:
    """Projector and moment operators of one cell, all acting on DoF vectors.

    pi_star : (2 dimP_k, N) DoFs -> coefficients of Pi w
    p_mul   : (dimP_{k-1}, N) DoFs -> coefficients of the local multiplier
    eps     : (3 dimP_{k-1}, N) DoFs -> coefficients of Q_{k-1} eps(w)
    div     : (dimP_{k-1}, N) DoFs -> coefficients of Q_{k-1} div(w)
    mom     : (2 dimP_{k-2}, N) DoFs -> interior moments (w, phi)_K
    d_mat   : (N, 2 dimP_k) DoF matrix of the vector monomial basis
    div_mom : (dimP_{k-1}, N) DoFs -> (div w, m_q)_K (the local divergence form)
    """

    cell: CellGeometry
    k: int
    layout: DofLayout
    basis: MonomialBasis
    gsplit: GradSplitBasis
    gram: np.ndarray
    pi_star: np.ndarray
    p_mul: np.ndarray
    eps: np.ndarray
    div: np.ndarray
    mom: np.ndarray
    d_mat: np.ndarray
    div_mom: np.ndarray
    emom: np.ndarray
    gram_s: np.ndarray
    perp_gram: np.ndarray

    @property
    def n_dof(self) -> int:
        return self.layout.n_dof


@dataclass(frozen=True)
class LocalMatrices:
    """Assembled cell contributions (viscosity multiplies at assembly)."""

    a: np.ndarray
    s: np.ndarray
    b: np.ndarray


def _edge_projection_tables(cell: CellGeometry, basis: MonomialBasis, k: int):
    """Per edge: matrix of \\int_0^1 m_q(x(t)) l_j(t) dt, shape (k, dim)."""
    deg = 2 * k + 3
    t, w = edge_params(deg)
    L = legendre_values(k, t)
    tables = []
    for i in range(cell.n_edges):
        p0, p1 = cell.edge_starts[i], cell.edge_ends[i]
        pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
        mv = basis.eval(pts)
        tables.append(L @ (w[:, None] * mv))
    return tables


def dof_evaluate(cell: CellGeometry, k: int, u, quad_degree: int | None = None) -> np.ndarray:
    """DoF vector of a smooth vector field u (moments per DofLayout)."""
    if k < 2:
        raise ValueError("k >= 2 required")
    layout = DofLayout(k, cell.n_edges)
    dofs = np.zeros(layout.n_dof)
    deg = quad_degree if quad_degree is not None else 2 * k + 3
    t, w = edge_params(deg)
    L = legendre_values(k, t)
    for i in range(cell.n_edges):
        p0, p1 = cell.edge_starts[i], cell.edge_ends[i]
        pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
        vals = np.asarray(u(pts), dtype=float)
        for c in range(2):
            mom = L @ (w * vals[:, c])
            for j in range(k):
                dofs[layout.edge_index(i, j, c)] = mom[j]
    gs = grad_split_basis(cell, k)
    quad = cell_quadrature(cell, deg)
    vals = np.asarray(u(quad.points), dtype=float)
    gvals = gs.basis.eval(quad.points)
    # g_l = (first-component coeffs, second-component coeffs) over gvals
    n = gs.basis.dim
    for l in range(layout.n_interior):
        g1 = gvals @ gs.coeffs[:n, l]
        g2 = gvals @ gs.coeffs[n:, l]
        dofs[layout.interior_slice][l] = (
            np.sum(quad.weights * (vals[:, 0] * g1 + vals[:, 1] * g2)) / cell.area
        )
    return dofs


def compute_projector(cell: CellGeometry, k: int) -> ProjectorPack:
    """Build the projector pack of one cell (see module docstring)."""
    if k < 2:
        raise ValueError("k >= 2 required (the k = 1 variant is out of scope)")
    layout = DofLayout(k, cell.n_edges)
    N = layout.n_dof
    basis = MonomialBasis.for_cell(cell, k)
    h = basis.scale
    area = cell.area
    nk = dim_poly(k)
    nk1 = dim_poly(k - 1)
    nk2 = dim_poly(k - 2)

    quad = cell_quadrature(cell, 2 * k + 3)
    phi = basis.eval(quad.points)
    gram = phi.T @ (quad.weights[:, None] * phi)
    g_km1 = gram[:nk1, :nk1]
    g_km2 = gram[:nk2, :nk2]
    intvec = gram[:, 0]

    gs = grad_split_basis(cell, k)
    GS = gs.coeffs
    try:
        GS_inv = np.linalg.inv(GS)
    except np.linalg.LinAlgError as exc:
        raise CellDegeneracyError("interior moment basis is singular") from exc

    eps_poly = vec_eps_matrix(k, h)
    div_poly = vec_div_matrix(k, h)
    rot_poly = vec_rot_matrix(k, h)
    div_sym = sym_div_matrix(k, h)
    gram_s = sla.block_diag(g_km1, g_km1, 2.0 * g_km1)

    tables = _edge_projection_tables(cell, basis, k)

    # DoF matrix of the vector monomial basis
    D = np.zeros((N, 2 * nk))
    for i in range(cell.n_edges):
        for j in range(k):
            for c in range(2):
                D[layout.edge_index(i, j, c), c * nk:(c + 1) * nk] = tables[i][j]
    gvec_sel = np.zeros((2 * nk2, 2 * nk))
    gvec_sel[:nk2, :nk] = gram[:nk2, :nk]
    gvec_sel[nk2:, nk:] = gram[:nk2, :nk]
    D[layout.interior_slice, :] = (GS.T @ gvec_sel) / area

    # moments of eps(w) against the symmetric tensor basis, from DoFs:
    # (eps w, sigma)_K = -(w, div sigma)_K + sum_F (w, sigma n)_F
    emom = np.zeros((3 * nk1, N))
    gamma_s = GS_inv @ div_sym            # div sigma in split-basis coords
    emom[:, layout.interior_slice] = -area * gamma_s.T
    for i in range(cell.n_edges):
        n_out = cell.edge_signs[i] * cell.edge_normals[i]
        hF = cell.edge_lengths[i]
        T = tables[i][:, :nk1]
        for j in range(k):
            r0 = layout.edge_index(i, j, 0)
            r1 = layout.edge_index(i, j, 1)
            emom[0 * nk1:1 * nk1, r0] += hF * n_out[0] * T[j]
            emom[1 * nk1:2 * nk1, r1] += hF * n_out[1] * T[j]
            emom[2 * nk1:3 * nk1, r0] += hF * n_out[1] * T[j]
            emom[2 * nk1:3 * nk1, r1] += hF * n_out[0] * T[j]

    # divergence moments: (div w, m_q)_K = -(w, grad m_q)_K + (w.n, m_q)_dK
    div_mom = np.zeros((nk1, N))
    gsl = layout.grad_slice
    for q in range(1, nk1):
        div_mom[q, gsl.start + (q - 1)] = -area
    for i in range(cell.n_edges):
        n_out = cell.edge_signs[i] * cell.edge_normals[i]
        hF = cell.edge_lengths[i]
        T = tables[i][:, :nk1]
        for j in range(k):
            div_mom[:, layout.edge_index(i, j, 0)] += hF * n_out[0] * T[j]
            div_mom[:, layout.edge_index(i, j, 1)] += hF * n_out[1] * T[j]

    # mean rotation of w from the boundary circulation
    crow = np.zeros(N)
    for i in range(cell.n_edges):
        tang = cell.edge_signs[i] * cell.edge_tangents[i]
        hF = cell.edge_lengths[i]
        crow[layout.edge_index(i, 0, 0)] += hF * tang[0] / area
        crow[layout.edge_index(i, 0, 1)] += hF * tang[1] / area

    # mean value of w from interior moments: e_c expanded in the split basis
    mrow = np.zeros((2, N))
    for c in range(2):
        e_c = np.zeros(2 * nk2)
        e_c[c * nk2] = 1.0
        mrow[c, layout.interior_slice] = GS_inv @ e_c

    # energy Gram on P_k(K;R^2) and the matching DoF functionals
    rp = rot_poly.T @ intvec[:nk1] / area
    tv = np.zeros((2, 2 * nk))
    tv[0, :nk] = intvec[:nk] / area
    tv[1, nk:] = intvec[:nk] / area
    M = eps_poly.T @ gram_s @ eps_poly
    M += 2.0 * area * np.outer(rp, rp)
    M += area * (np.outer(tv[0], tv[0]) + np.outer(tv[1], tv[1]))

    B = eps_poly.T @ emom
    B += 2.0 * area * np.outer(rp, crow)
    B += area * (np.outer(tv[0], mrow[0]) + np.outer(tv[1], mrow[1]))

    C = g_km1 @ div_poly
    sad = np.zeros((2 * nk + nk1, 2 * nk + nk1))
    sad[: 2 * nk, : 2 * nk] = M
    sad[: 2 * nk, 2 * nk:] = C.T
    sad[2 * nk:, : 2 * nk] = C
    rhs = np.vstack([B, div_mom])
    try:
        sol = sla.solve(sad, rhs)
    except sla.LinAlgError as exc:
        raise CellDegeneracyError("singular local projector system") from exc
    pi_star = sol[: 2 * nk]
    p_mul = sol[2 * nk:]

    div = sla.solve(g_km1, div_mom, assume_a="pos")
    eps = sla.solve(gram_s, emom, assume_a="pos")

    mom = np.zeros((2 * nk2, N))
    mom[:, layout.interior_slice] = area * GS_inv.T

    # Gram of the complement block (for the interior stabilization weight)
    gperp = GS[:, : gs.n_perp]
    gvec_km2 = sla.block_diag(g_km2, g_km2)
    perp_gram = gperp.T @ gvec_km2 @ gperp

    return ProjectorPack(
        cell=cell, k=k, layout=layout, basis=basis, gsplit=gs, gram=gram,
        pi_star=pi_star, p_mul=p_mul, eps=eps, div=div, mom=mom,
        d_mat=D, div_mom=div_mom, emom=emom, gram_s=gram_s, perp_gram=perp_gram,
    )


def local_stiffness(pack: ProjectorPack) -> LocalMatrices:
    """Consistency-plus-stabilization stiffness of one cell.

    a_K(w, v) = (Q eps w, Q eps v)_K
              + sum_F h_F^{-1} (Q^F d, Q^F e)_F + h_K^{-2} (Q_perp d, Q_perp e)_K
    with d = w - Pi w, e = v - Pi v.  Under the DoF scalings both projection
    terms are exact functions of the DoF vector of d: the edge term is the
    plain product of edge DoFs and the interior term weights the complement
    moments by the inverse complement Gram.
    """
    layout = pack.layout
    N = layout.n_dof
    cons = pack.emom.T @ pack.eps
    X = np.eye(N) - pack.d_mat @ pack.pi_star
    w = np.zeros((N, N))
    idx = np.arange(layout.edge_block * layout.n_edges)
    w[idx, idx] = 1.0
    if layout.n_perp:
        ps = layout.perp_slice
        h = pack.basis.scale
        w[ps, ps] = (pack.cell.area ** 2 / h ** 2) * np.linalg.inv(pack.perp_gram)
    stab = X.T @ w @ X
    a = cons + stab
    a = 0.5 * (a + a.T)
    stab = 0.5 * (stab + stab.T)
    return LocalMatrices(a=a, s=stab, b=pack.div_mom)


def local_div_matrix(pack: ProjectorPack) -> np.ndarray:
    """Rows (div v, m_q)_K of the local divergence form."""
    return pack.div_mom


def local_load(pack: ProjectorPack, f, quad_degree: int | None = None) -> np.ndarray:
    """Standard load vector: (f, Pi w)_K for k = 2, (f, Q_{k-2} w)_K for k >= 3."""
    cell = pack.cell
    k = pack.k
    deg = quad_degree if quad_degree is not None else 2 * k + 4
    quad = cell_quadrature(cell, deg)
    fv = np.asarray(f(quad.points), dtype=float)
    if k == 2:
        phi = pack.basis.eval(quad.points)
        mom = np.concatenate([
            phi.T @ (quad.weights * fv[:, 0]),
            phi.T @ (quad.weights * fv[:, 1]),
        ])
        return pack.pi_star.T @ mom
    sub = MonomialBasis(k - 2, pack.basis.center, pack.basis.scale)
    phi = sub.eval(quad.points)
    mom = np.concatenate([
        phi.T @ (quad.weights * fv[:, 0]),
        phi.T @ (quad.weights * fv[:, 1]),
    ])
    nk2 = dim_poly(k - 2)
    g = sla.block_diag(pack.gram[:nk2, :nk2], pack.gram[:nk2, :nk2])
    return pack.mom.T @ sla.solve(g, mom, assume_a="pos")


def rigid_motion_dofs(cell: CellGeometry, k: int) -> np.ndarray:
    """DoF vectors of the rigid motions (1,0), (0,1), (-y,x), as columns."""
    modes = [
        lambda p: np.column_stack([np.ones(len(p)), np.zeros(len(p))]),
        lambda p: np.column_stack([np.zeros(len(p)), np.ones(len(p))]),
        lambda p: np.column_stack([-p[:, 1], p[:, 0]]),
    ]
    return np.column_stack([dof_evaluate(cell, k, m) for m in modes])
