"""Scaled monomial bases, quadrature, Gram matrices, L2 projections.

Scalar polynomials on a cell K are expanded in scaled monomials
m_alpha(x) = ((x - x_K)/h_K)^alpha in graded lexicographic order.  Vector
polynomials use the component-major layout (all first components, then all
second components), and symmetric 2x2 tensor polynomials use the layout
(t11 block, t22 block, t12 block) with the off-diagonal entry stored once.

Edge polynomials use the shifted Legendre basis l_j(t) = sqrt(2j+1) P_j(2t-1)
on the unit parameter interval, orthonormal with respect to int_0^1 dt; cell
edges are parametrized by their global orientation (see mesh.py).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

from .mesh import CellGeometry, subtriangulate


class QuadratureError(ValueError):
    """Raised when a quadrature rule cannot honor the requested exactness."""


@lru_cache(maxsize=None)
def monomial_exponents(k: int) -> tuple:
    """Exponent pairs (a, b) with a + b <= k, graded lexicographic."""
    if k < 0:
        return ()
    return tuple((d - i, i) for d in range(k + 1) for i in range(d + 1))


def dim_poly(k: int) -> int:
    """Dimension of P_k in two variables (0 for negative k)."""
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


@dataclass(frozen=True)
class MonomialBasis:
    """Scaled monomial basis of degree <= k centered at a cell."""

    degree: int
    center: tuple
    scale: float

    @classmethod
    def for_cell(cls, cell: CellGeometry, degree: int) -> "MonomialBasis":
        return cls(degree, (float(cell.centroid[0]), float(cell.centroid[1])), float(cell.diameter))

    @property
    def exponents(self) -> np.ndarray:
        return np.asarray(monomial_exponents(self.degree))

    @property
    def dim(self) -> int:
        return dim_poly(self.degree)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Values at pts as an (npts, dim) array."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xi = (pts - np.asarray(self.center)) / self.scale
        exps = self.exponents
        return xi[:, 0][:, None] ** exps[:, 0] * xi[:, 1][:, None] ** exps[:, 1]

    def eval_grad(self, pts: np.ndarray) -> np.ndarray:
        """Gradients at pts as an (npts, dim, 2) array."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xi = (pts - np.asarray(self.center)) / self.scale
        exps = self.exponents
        out = np.zeros((len(pts), len(exps), 2))
        for c, (da, db) in enumerate(((1, 0), (0, 1))):
            a = exps[:, 0] - da
            b = exps[:, 1] - db
            coef = exps[:, c] / self.scale
            mask = exps[:, c] > 0
            out[:, mask, c] = (
                coef[mask]
                * xi[:, 0][:, None] ** a[mask]
                * xi[:, 1][:, None] ** b[mask]
            )
        return out


def eval_basis(basis: MonomialBasis, pts: np.ndarray) -> np.ndarray:
    return basis.eval(pts)


def eval_grad(basis: MonomialBasis, pts: np.ndarray) -> np.ndarray:
    return basis.eval_grad(pts)


@lru_cache(maxsize=None)
def _derivative_exponent_map(k: int, axis: int) -> tuple:
    """Rows (target index in P_{k-1}, source index in P_k, exponent factor)."""
    src = monomial_exponents(k)
    dst_index = {e: i for i, e in enumerate(monomial_exponents(k - 1))}
    rows = []
    for j, (a, b) in enumerate(src):
        e = a if axis == 0 else b
        if e > 0:
            tgt = (a - 1, b) if axis == 0 else (a, b - 1)
            rows.append((dst_index[tgt], j, e))
    return tuple(rows)


def derivative_matrix(k: int, scale: float, axis: int) -> np.ndarray:
    """Matrix of d/dx_axis from degree-k coefficients to degree-(k-1)."""
    D = np.zeros((dim_poly(k - 1), dim_poly(k)))
    for tgt, src, e in _derivative_exponent_map(k, axis):
        D[tgt, src] = e / scale
    return D


# ---------------------------------------------------------------------------
# vector / tensor coefficient operators (center independent)


def vec_div_matrix(k: int, scale: float) -> np.ndarray:
    """Divergence: vector degree-k coefficients -> scalar degree-(k-1)."""
    Dx = derivative_matrix(k, scale, 0)
    Dy = derivative_matrix(k, scale, 1)
    return np.hstack([Dx, Dy])


def vec_rot_matrix(k: int, scale: float) -> np.ndarray:
    """Scalar rotation d(v2)/dx - d(v1)/dy of a vector polynomial."""
    Dx = derivative_matrix(k, scale, 0)
    Dy = derivative_matrix(k, scale, 1)
    return np.hstack([-Dy, Dx])


def vec_eps_matrix(k: int, scale: float) -> np.ndarray:
    """Symmetric gradient: vector degree-k coefficients to the tensor layout
    (e11, e22, e12) of degree k-1."""
    Dx = derivative_matrix(k, scale, 0)
    Dy = derivative_matrix(k, scale, 1)
    n = dim_poly(k - 1)
    Z = np.zeros((n, dim_poly(k)))
    top = np.hstack([Dx, Z])
    mid = np.hstack([Z, Dy])
    bot = np.hstack([0.5 * Dy, 0.5 * Dx])
    return np.vstack([top, mid, bot])


def sym_div_matrix(k: int, scale: float) -> np.ndarray:
    """Row-wise divergence of a symmetric tensor polynomial of degree k-1,
    from the (t11, t22, t12) layout to vector degree-(k-2) coefficients."""
    Dx = derivative_matrix(k - 1, scale, 0)
    Dy = derivative_matrix(k - 1, scale, 1)
    n = dim_poly(k - 2)
    Z = np.zeros((n, dim_poly(k - 1)))
    row1 = np.hstack([Dx, Z, Dy])
    row2 = np.hstack([Z, Dy, Dx])
    return np.vstack([row1, row2])


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Positions (physical coordinates), weights, and the exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def _gauss01(npts: int) -> tuple:
    x, w = npleg.leggauss(npts)
    return tuple(0.5 * (x + 1.0)), tuple(0.5 * w)


@lru_cache(maxsize=None)
def _duffy_reference(degree: int) -> tuple:
    """Collapsed Gauss rule on the unit reference triangle, exact to degree.

    Maps the square (u, v) to (u, v(1-u)); the Jacobian (1-u) raises the u
    degree by one, hence the extra point in u.
    """
    nu = degree // 2 + 2
    nv = degree // 2 + 1
    ux, uw = _gauss01(nu)
    vx, vw = _gauss01(nv)
    pts = []
    wts = []
    for xu, wu in zip(ux, uw):
        for xv, wv in zip(vx, vw):
            pts.append((xu, xv * (1.0 - xu)))
            wts.append(wu * wv * (1.0 - xu))
    return tuple(pts), tuple(wts)


def triangle_quadrature(tri: np.ndarray, degree: int) -> QuadratureRule:
    """Rule on one physical triangle, exact for polynomials up to degree."""
    if degree < 0:
        raise QuadratureError("quadrature degree must be nonnegative")
    ref_pts, ref_wts = _duffy_reference(degree)
    tri = np.asarray(tri, dtype=float)
    a, b, c = tri
    jac = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    pts = np.array([a + u * (b - a) + v * (c - a) for u, v in ref_pts])
    wts = np.asarray(ref_wts) * jac
    return QuadratureRule(points=pts, weights=wts, degree=degree)


def cell_quadrature(cell: CellGeometry, degree: int) -> QuadratureRule:
    """Composite rule over the centroid fan of the cell."""
    tris = subtriangulate(cell)
    parts = [triangle_quadrature(t, degree) for t in tris]
    pts = np.vstack([p.points for p in parts])
    wts = np.concatenate([p.weights for p in parts])
    return QuadratureRule(points=pts, weights=wts, degree=degree)


def edge_quadrature(p0, p1, degree: int) -> QuadratureRule:
    """Gauss rule along the segment p0 -> p1; weights sum to the length."""
    if degree < 0:
        raise QuadratureError("quadrature degree must be nonnegative")
    npts = degree // 2 + 1
    t, w = _gauss01(npts)
    t = np.asarray(t)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    h = float(np.linalg.norm(p1 - p0))
    return QuadratureRule(points=pts, weights=np.asarray(w) * h, degree=degree)


def edge_params(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-interval Gauss nodes and weights matching edge_quadrature."""
    t, w = _gauss01(degree // 2 + 1)
    return np.asarray(t), np.asarray(w)


# ---------------------------------------------------------------------------
# Gram matrices and projections


def gram_matrix(cell: CellGeometry, basis_a: MonomialBasis, basis_b: MonomialBasis,
                quad: QuadratureRule | None = None) -> np.ndarray:
    """Cell mass matrix between two scalar monomial bases."""
    needed = basis_a.degree + basis_b.degree
    if quad is None:
        quad = cell_quadrature(cell, needed)
    elif quad.degree < needed:
        raise QuadratureError(
            f"quadrature degree {quad.degree} below required {needed}"
        )
    va = basis_a.eval(quad.points)
    vb = basis_b.eval(quad.points)
    return va.T @ (quad.weights[:, None] * vb)


def l2_project(cell: CellGeometry, f, k: int, quad_degree: int | None = None) -> np.ndarray:
    """Coefficients of the L2(K) projection of f onto scaled monomials.

    f maps an (n, 2) point array to (n,) scalar or (n, 2) vector values;
    vector data returns a (2, dim) coefficient array.
    """
    basis = MonomialBasis.for_cell(cell, k)
    quad = cell_quadrature(cell, quad_degree if quad_degree is not None else 2 * k + 3)
    vals = np.asarray(f(quad.points), dtype=float)
    phi = basis.eval(quad.points)
    G = phi.T @ (quad.weights[:, None] * phi)
    if vals.ndim == 1:
        mom = phi.T @ (quad.weights * vals)
        return np.linalg.solve(G, mom)
    mom = phi.T @ (quad.weights[:, None] * vals)
    return np.linalg.solve(G, mom).T


def legendre_values(n: int, t: np.ndarray) -> np.ndarray:
    """Values of the orthonormal shifted Legendre basis, shape (n, len(t))."""
    t = np.asarray(t, dtype=float)
    out = np.empty((n, len(t)))
    s = 2.0 * t - 1.0
    for j in range(n):
        coef = np.zeros(j + 1)
        coef[j] = 1.0
        out[j] = np.sqrt(2.0 * j + 1.0) * npleg.legval(s, coef)
    return out


def edge_l2_project(p0, p1, f, k: int, quad_degree: int | None = None) -> np.ndarray:
    """Shifted-Legendre coefficients of the edge L2 projection of f.

    f maps physical points to scalars or vectors; vector data returns a
    (2, k+1) array.  The parametrization runs from p0 to p1.
    """
    deg = quad_degree if quad_degree is not None else 2 * k + 9
    quad = edge_quadrature(p0, p1, deg)
    t, w = edge_params(deg)
    L = legendre_values(k + 1, t)
    vals = np.asarray(f(quad.points), dtype=float)
    if vals.ndim == 1:
        return L @ (w * vals)
    return np.stack([L @ (w * vals[:, c]) for c in range(vals.shape[1])])


# ---------------------------------------------------------------------------
# gradient / complement split of P_{k-2}(K; R^2)


@dataclass(frozen=True)
class GradSplitBasis:
    """Basis of P_{k-2}(K;R^2) split into a rotated-complement block and a
    gradient block, as coefficient columns over the component-major vector
    monomial basis of degree k-2.

    Column order: first the (k-1)(k-2)/2 complement fields
    xi_perp * m_beta with xi = (x - x_K)/h_K and xi_perp = (xi_2, -xi_1),
    then the k(k+1)/2 - 1 gradients grad m_alpha of the non-constant scaled
    monomials of degree <= k-1.  Interior degrees of freedom are moments
    against these columns in this order, so the complement block is a prefix.
    """

    k: int
    basis: MonomialBasis
    coeffs: np.ndarray
    n_perp: int
    n_grad: int


def grad_split_basis(cell: CellGeometry, k: int) -> GradSplitBasis:
    if k < 2:
        raise ValueError("grad_split_basis requires k >= 2")
    base = MonomialBasis.for_cell(cell, k - 2)
    n = base.dim
    h = base.scale
    exps = monomial_exponents(k - 2)
    index = {e: i for i, e in enumerate(exps)}

    n_perp = dim_poly(k - 3)
    cols_perp = np.zeros((2 * n, n_perp))
    for j, (a, b) in enumerate(monomial_exponents(k - 3)):
        # xi_perp * m_beta = (xi_2 m_beta, -xi_1 m_beta)
        cols_perp[index[(a, b + 1)], j] = 1.0
        cols_perp[n + index[(a + 1, b)], j] = -1.0

    grads = monomial_exponents(k - 1)[1:]
    cols_grad = np.zeros((2 * n, len(grads)))
    for j, (a, b) in enumerate(grads):
        if a > 0:
            cols_grad[index[(a - 1, b)], j] = a / h
        if b > 0:
            cols_grad[n + index[(a, b - 1)], j] = b / h
    coeffs = np.hstack([cols_perp, cols_grad])
    return GradSplitBasis(k=k, basis=base, coeffs=coeffs,
                          n_perp=n_perp, n_grad=len(grads))
