"""Scaled monomials, quadrature, projections, and the gradient split."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stokesvem.mesh import CellGeometry
from stokesvem.polyspace import (
    MonomialBasis,
    QuadratureError,
    cell_quadrature,
    dim_poly,
    edge_l2_project,
    edge_params,
    edge_quadrature,
    grad_split_basis,
    gram_matrix,
    l2_project,
    legendre_values,
    monomial_exponents,
    triangle_quadrature,
    vec_div_matrix,
    vec_eps_matrix,
)
from tests.conftest import polygon_cells, random_cells

UNIT_SQUARE = CellGeometry.from_polygon(
    [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
)


def test_exponent_tables_are_graded():
    for k in range(1, 6):
        assert dim_poly(k) == (k + 1) * (k + 2) // 2
        exps = monomial_exponents(k)
        assert len(exps) == dim_poly(k)
        assert exps[: dim_poly(k - 1)] == monomial_exponents(k - 1)
        assert all(a + b <= k for a, b in exps)


def test_monomial_value_fixture(fixtures):
    basis = MonomialBasis.for_cell(UNIT_SQUARE, 2)
    idx = monomial_exponents(2).index((2, 0))
    val = basis.eval(np.array([[1.0, 0.5]]))[0, idx]
    assert abs(val - fixtures["monomial_value"]["value"]) <= 1e-15


def test_eval_grad_matches_derivative_matrix():
    basis = MonomialBasis.for_cell(UNIT_SQUARE, 3)
    rng = np.random.default_rng(5)
    c = rng.standard_normal(basis.dim)
    pts = rng.uniform(0.0, 1.0, (30, 2))
    G = basis.eval_grad(pts)
    eps = vec_eps_matrix(3, basis.scale)
    # symmetric gradient of (q, 0) recovers (dq/dx, 0, dq/dy / 2)
    ec = eps @ np.concatenate([c, np.zeros(basis.dim)])
    nk1 = dim_poly(2)
    phi1 = MonomialBasis(2, basis.center, basis.scale).eval(pts)
    assert np.allclose(phi1 @ ec[:nk1], G[:, :, 0] @ c, atol=1e-12)
    assert np.allclose(2.0 * (phi1 @ ec[2 * nk1:]), G[:, :, 1] @ c, atol=1e-12)
    assert np.allclose(phi1 @ ec[nk1:2 * nk1], 0.0, atol=1e-14)


def test_triangle_quadrature_closed_forms():
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    quad = triangle_quadrature(tri, 6)
    for a in range(7):
        for b in range(7 - a):
            exact = (
                math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            )
            got = quad.weights @ (quad.points[:, 0] ** a * quad.points[:, 1] ** b)
            assert abs(got - exact) <= 1e-14


def test_cell_quadrature_closed_forms():
    quad = cell_quadrature(UNIT_SQUARE, 5)
    assert abs(np.sum(quad.weights) - 1.0) <= 1e-14
    for a in range(6):
        for b in range(6 - a):
            exact = 1.0 / ((a + 1) * (b + 1))
            got = quad.weights @ (quad.points[:, 0] ** a * quad.points[:, 1] ** b)
            assert abs(got - exact) <= 1e-13


def test_edge_quadrature_closed_forms():
    p0, p1 = np.array([0.0, 0.0]), np.array([2.0, 1.0])
    length = math.sqrt(5.0)
    for d in (0, 3, 7):
        quad = edge_quadrature(p0, p1, d)
        assert abs(np.sum(quad.weights) - length) <= 1e-13
        got = quad.weights @ quad.points[:, 0] ** d
        assert abs(got - length * 2.0 ** d / (d + 1)) <= 1e-12 * length * 2.0 ** d


def test_edge_legendre_orthonormal(fixtures):
    ref = np.asarray(fixtures["edge_legendre_gram"]["gram"])
    assert np.allclose(ref, np.eye(4), atol=1e-13)
    t, w = edge_params(9)
    L = legendre_values(4, t)
    assert np.allclose((L * w) @ L.T, ref, atol=1e-13)


def test_scaled_gram_closed_form(fixtures):
    basis = MonomialBasis.for_cell(UNIT_SQUARE, 1)
    G = gram_matrix(UNIT_SQUARE, basis, basis)
    assert np.allclose(G, np.asarray(fixtures["scaled_gram_unit_square_k1"]["gram"]),
                       atol=1e-13)


def test_gram_rejects_weak_quadrature():
    basis = MonomialBasis.for_cell(UNIT_SQUARE, 3)
    weak = cell_quadrature(UNIT_SQUARE, 2)
    with pytest.raises(QuadratureError, match="below required"):
        gram_matrix(UNIT_SQUARE, basis, basis, quad=weak)
    with pytest.raises(QuadratureError):
        triangle_quadrature(np.zeros((3, 2)), -1)
    with pytest.raises(QuadratureError):
        edge_quadrature([0.0, 0.0], [1.0, 0.0], -2)


def test_l2_project_sin_constant(fixtures):
    f = lambda p: np.sin(p[:, 0])
    coeff = l2_project(UNIT_SQUARE, f, 0, quad_degree=20)
    assert abs(coeff[0] - fixtures["l2_sin_constant"]["coefficient"]) <= 1e-13


@given(cell=polygon_cells(), data=st.data())
def test_l2_project_reproduces_polynomials(cell, data):
    k = data.draw(st.integers(2, 3))
    basis = MonomialBasis.for_cell(cell, k)
    c = np.asarray(
        data.draw(st.lists(st.floats(-2.0, 2.0), min_size=basis.dim,
                           max_size=basis.dim))
    )
    f = lambda p: basis.eval(p) @ c
    got = l2_project(cell, f, k)
    assert np.allclose(got, c, atol=1e-12 * max(1.0, np.abs(c).max()))


def test_l2_project_vector_mode():
    basis = MonomialBasis.for_cell(UNIT_SQUARE, 2)
    rng = np.random.default_rng(1)
    c = rng.standard_normal((2, basis.dim))
    f = lambda p: (basis.eval(p) @ c.T)
    got = l2_project(UNIT_SQUARE, f, 2)
    assert got.shape == (2, basis.dim)
    assert np.allclose(got, c, atol=1e-12)


def test_edge_projection_closed_form():
    coeffs = edge_l2_project(
        np.array([0.0, 0.0]), np.array([1.0, 0.0]), lambda p: p[:, 0], 2
    )
    assert np.allclose(
        coeffs, [0.5, math.sqrt(3.0) / 6.0, 0.0], atol=1e-14
    )
    # vector data: one row per component
    v = edge_l2_project(
        np.array([0.0, 0.0]), np.array([1.0, 0.0]),
        lambda p: np.column_stack([p[:, 0], 1.0 - p[:, 0]]), 1,
    )
    assert v.shape == (2, 2)
    assert np.allclose(v[0], [0.5, math.sqrt(3.0) / 6.0], atol=1e-14)


def test_grad_split_counts_and_rank():
    cells = random_cells(20, seed=12)
    for k in (2, 3, 4):
        for cell in cells:
            gs = grad_split_basis(cell, k)
            assert gs.n_perp == dim_poly(k - 3)
            assert gs.n_grad == dim_poly(k - 1) - 1
            assert gs.n_perp + gs.n_grad == (k - 1) * k
            assert gs.coeffs.shape == (2 * dim_poly(k - 2), (k - 1) * k)
            s = np.linalg.svd(gs.coeffs, compute_uv=False)
            assert int(np.sum(s > 1e-10 * s[0])) == (k - 1) * k


def test_perp_block_divergences():
    """div(xi_perp q) lies in P_{k-3} and vanishes for constant q."""
    for cell in random_cells(5, seed=21):
        for k in (3, 4):
            gs = grad_split_basis(cell, k)
            nb = gs.basis.dim
            h = gs.basis.scale
            dv = vec_div_matrix(k - 2, h)
            pts = cell.centroid + 0.3 * cell.diameter * (
                np.random.default_rng(0).uniform(-0.5, 0.5, (25, 2))
            )
            G = gs.basis.eval_grad(pts)
            low = MonomialBasis(k - 3, gs.basis.center, h).eval(pts)
            for j in range(gs.n_perp):
                col = gs.coeffs[:, j]
                div_pts = G[:, :, 0] @ col[:nb] + G[:, :, 1] @ col[nb:]
                div_coef = dv @ col
                assert np.allclose(low @ div_coef, div_pts, atol=1e-12)
                if j == 0:
                    assert np.abs(div_coef).max() <= 1e-14
