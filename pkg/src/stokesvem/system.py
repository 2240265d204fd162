"""Global assembly and solution of the discrete Stokes system.

Velocity DoFs are shared through global edge blocks (2k slots per edge,
ordered like the local blocks) followed by per-cell interior blocks, so
scattering needs no sign flips.  The pressure space is discontinuous
P_{k-1} in scaled cell monomials (constants for the reduced variant) with a
single Lagrange multiplier enforcing zero mean; homogeneous or interpolated
Dirichlet data is eliminated at the boundary edge blocks.

The saddle system

    [ nu A   B^T   0 ] [u]   [F]
    [ B      0     m ] [p] = [0]
    [ 0      m^T   0 ] [l]   [0]

is symmetric indefinite; the default direct path factors an augmented
velocity operator once and polishes the saddle residual with a few
defect-correction sweeps, with a diagonally preconditioned MINRES fallback
behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .element import (
    DofLayout,
    ProjectorPack,
    compute_projector,
    local_load,
    local_stiffness,
)
from .mesh import PolyMesh
from .polyspace import dim_poly, edge_params, legendre_values
from .rt import RTLocalSpace, build_rt_space, rt_interpolation_matrix, rt_load


class SolverError(RuntimeError):
    """Raised when the linear solve fails its residual contract."""


@dataclass(frozen=True)
class VelocityDofMap:
    """Global velocity numbering: edge blocks then cell interior blocks."""

    k: int
    n_edges: int
    n_cells: int
    interior_per_cell: int

    @property
    def edge_block(self) -> int:
        return 2 * self.k

    @property
    def n_dofs(self) -> int:
        return self.edge_block * self.n_edges + self.interior_per_cell * self.n_cells

    def edge_base(self, e: int) -> int:
        return self.edge_block * e

    def cell_base(self, c: int) -> int:
        return self.edge_block * self.n_edges + self.interior_per_cell * c

    def cell_indices(self, mesh: PolyMesh, c: int) -> np.ndarray:
        rows = mesh.cell_edges[c]
        idx = np.empty(self.edge_block * len(rows) + self.interior_per_cell, dtype=int)
        for i, (e, _sign) in enumerate(rows):
            base = self.edge_base(int(e))
            idx[self.edge_block * i:self.edge_block * (i + 1)] = np.arange(
                base, base + self.edge_block
            )
        idx[self.edge_block * len(rows):] = np.arange(
            self.cell_base(c), self.cell_base(c) + self.interior_per_cell
        )
        return idx

    def boundary_dofs(self, mesh: PolyMesh) -> np.ndarray:
        out = []
        for e in np.nonzero(mesh.boundary_edge_mask)[0]:
            base = self.edge_base(int(e))
            out.extend(range(base, base + self.edge_block))
        return np.asarray(out, dtype=int)


def build_packs(mesh: PolyMesh, k: int) -> list:
    """Projector packs for every cell, in cell order."""
    return [compute_projector(mesh.cell_geometry(c), k) for c in range(mesh.n_cells)]


def boundary_values(mesh: PolyMesh, k: int, u) -> np.ndarray:
    """Velocity vector with Dirichlet edge moments of u on boundary edges."""
    dmap = VelocityDofMap(k, mesh.n_edges, mesh.n_cells, DofLayout(k, 3).n_interior)
    g = np.zeros(dmap.n_dofs)
    deg = 2 * k + 3
    t, w = edge_params(deg)
    L = legendre_values(k, t)
    for e in np.nonzero(mesh.boundary_edge_mask)[0]:
        a, b = mesh.edges[e]
        p0, p1 = mesh.vertices[a], mesh.vertices[b]
        pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
        vals = np.asarray(u(pts), dtype=float)
        base = dmap.edge_base(int(e))
        for c in range(2):
            mom = L @ (w * vals[:, c])
            for j in range(k):
                g[base + 2 * j + c] = mom[j]
    return g


@dataclass
class GlobalSystem:
    """Assembled (viscosity-free) operators plus metadata."""

    mesh: PolyMesh
    k: int
    nu: float
    dof_map: VelocityDofMap
    packs: list
    a_mat: sp.csr_matrix
    b_mat: sp.csr_matrix
    rhs: np.ndarray
    mean_row: np.ndarray
    n_pressure: int
    pressure_dim: int
    reduced: bool = False
    recs: list | None = None
    rt_spaces: list | None = None
    local_dofs_cache: list = field(default_factory=list, repr=False)


@dataclass
class DiscreteSolution:
    """Velocity DoFs, pressure coefficients, and solve diagnostics."""

    system: GlobalSystem
    u: np.ndarray
    p: np.ndarray
    lam: float
    residual: float
    method: str

    @property
    def mesh(self) -> PolyMesh:
        return self.system.mesh

    @property
    def k(self) -> int:
        return self.system.k

    def cell_dofs(self, c: int) -> np.ndarray:
        """Full local DoF vector of cell c (reconstructed when reduced)."""
        sysm = self.system
        idx = sysm.local_dofs_cache[c]
        loc = self.u[idx]
        if sysm.reduced:
            loc = sysm.recs[c] @ loc
        return loc

    def pi_coeffs(self, c: int) -> np.ndarray:
        return self.system.packs[c].pi_star @ self.cell_dofs(c)

    def pressure_coeffs(self, c: int) -> np.ndarray:
        d = self.system.pressure_dim
        return self.p[c * d:(c + 1) * d]


def _triplet_append(rows, cols, vals, gidx_r, gidx_c, block):
    R, C = np.meshgrid(gidx_r, gidx_c, indexing="ij")
    rows.append(R.ravel())
    cols.append(C.ravel())
    vals.append(np.asarray(block).ravel())


def assemble(mesh: PolyMesh, k: int, nu: float = 1.0, f=None,
             load: str = "standard", packs: list | None = None,
             rt_spaces: list | None = None) -> GlobalSystem:
    """Assemble the full method (pressures in P_{k-1} per cell).

    load selects the body-force treatment: 'standard' uses the projected
    load of the plain scheme, 'robust' runs f through the divergence
    preserving interpolation.  f may be None for a zero body force.
    """
    if k < 2 or k > 4:
        raise ValueError("k must be in {2, 3, 4}")
    if packs is None:
        packs = build_packs(mesh, k)
    layout0 = packs[0].layout
    dmap = VelocityDofMap(k, mesh.n_edges, mesh.n_cells, layout0.n_interior)
    nk1 = dim_poly(k - 1)
    n_press = nk1 * mesh.n_cells

    if load == "robust" and rt_spaces is None:
        rt_spaces = [build_rt_space(mesh.cell_geometry(c), k) for c in range(mesh.n_cells)]
    elif load != "robust":
        rt_spaces = None

    rows_a, cols_a, vals_a = [], [], []
    rows_b, cols_b, vals_b = [], [], []
    rhs = np.zeros(dmap.n_dofs)
    mean_row = np.zeros(n_press)
    cache = []
    for c in range(mesh.n_cells):
        pack = packs[c]
        gidx = dmap.cell_indices(mesh, c)
        cache.append(gidx)
        loc = local_stiffness(pack)
        _triplet_append(rows_a, cols_a, vals_a, gidx, gidx, loc.a)
        pidx = np.arange(c * nk1, (c + 1) * nk1)
        _triplet_append(rows_b, cols_b, vals_b, pidx, gidx, loc.b)
        mean_row[pidx] = pack.gram[:nk1, 0]
        if f is not None:
            if load == "standard":
                rhs[gidx] += local_load(pack, f)
            elif load == "robust":
                interp = rt_interpolation_matrix(rt_spaces[c], pack)
                rhs[gidx] += rt_load(rt_spaces[c], interp, f)
            else:
                raise ValueError(f"unknown load mode {load!r}")

    n = dmap.n_dofs
    a_mat = sp.coo_matrix(
        (np.concatenate(vals_a), (np.concatenate(rows_a), np.concatenate(cols_a))),
        shape=(n, n)).tocsr()
    b_mat = sp.coo_matrix(
        (np.concatenate(vals_b), (np.concatenate(rows_b), np.concatenate(cols_b))),
        shape=(n_press, n)).tocsr()
    return GlobalSystem(
        mesh=mesh, k=k, nu=nu, dof_map=dmap, packs=packs, a_mat=a_mat,
        b_mat=b_mat, rhs=rhs, mean_row=mean_row, n_pressure=n_press,
        pressure_dim=nk1, rt_spaces=rt_spaces, local_dofs_cache=cache,
    )


def reduction_matrix(pack: ProjectorPack) -> np.ndarray:
    """Local map from reduced DoFs (edges + complement block) to full DoFs.

    The gradient-block moments of a field with piecewise-constant divergence
    are boundary quantities: |K| dof_alpha = (v.n, m_alpha - mean_K m_alpha)
    over the cell boundary.
    """
    from .element import _edge_projection_tables

    layout = pack.layout
    cell = pack.cell
    n_red = layout.edge_block * layout.n_edges + layout.n_perp
    rec = np.zeros((layout.n_dof, n_red))
    ne = layout.edge_block * layout.n_edges
    rec[:ne, :ne] = np.eye(ne)
    rec[layout.perp_slice, ne:] = np.eye(layout.n_perp)
    tables = _edge_projection_tables(cell, pack.basis, pack.k)
    nk1 = dim_poly(pack.k - 1)
    area = cell.area
    means = pack.gram[:nk1, 0] / area
    gsl = layout.grad_slice
    for alpha in range(1, nk1):
        row = np.zeros(n_red)
        for i in range(cell.n_edges):
            n_out = cell.edge_signs[i] * cell.edge_normals[i]
            hF = cell.edge_lengths[i]
            for j in range(pack.k):
                proj = tables[i][j, alpha] - (means[alpha] if j == 0 else 0.0)
                row[layout.edge_index(i, j, 0)] += hF * n_out[0] * proj / area
                row[layout.edge_index(i, j, 1)] += hF * n_out[1] * proj / area
        rec[gsl.start + alpha - 1] = row
    return rec


@dataclass(frozen=True)
class ReducedDofMap:
    """Edge blocks (shared with the full map) plus per-cell complement block."""

    k: int
    n_edges: int
    n_cells: int
    n_perp: int

    @property
    def edge_block(self) -> int:
        return 2 * self.k

    @property
    def n_dofs(self) -> int:
        return self.edge_block * self.n_edges + self.n_perp * self.n_cells

    def edge_base(self, e: int) -> int:
        return self.edge_block * e

    def cell_base(self, c: int) -> int:
        return self.edge_block * self.n_edges + self.n_perp * c

    def cell_indices(self, mesh: PolyMesh, c: int) -> np.ndarray:
        rows = mesh.cell_edges[c]
        idx = np.empty(self.edge_block * len(rows) + self.n_perp, dtype=int)
        for i, (e, _sign) in enumerate(rows):
            base = self.edge_base(int(e))
            idx[self.edge_block * i:self.edge_block * (i + 1)] = np.arange(
                base, base + self.edge_block
            )
        idx[self.edge_block * len(rows):] = np.arange(
            self.cell_base(c), self.cell_base(c) + self.n_perp
        )
        return idx

    def boundary_dofs(self, mesh: PolyMesh) -> np.ndarray:
        out = []
        for e in np.nonzero(mesh.boundary_edge_mask)[0]:
            base = self.edge_base(int(e))
            out.extend(range(base, base + self.edge_block))
        return np.asarray(out, dtype=int)


def assemble_reduced(mesh: PolyMesh, k: int, nu: float = 1.0, f=None,
                     load: str = "standard", packs: list | None = None,
                     rt_spaces: list | None = None) -> GlobalSystem:
    """Assemble the reduced method (constant pressures, slaved gradients)."""
    if k < 2 or k > 4:
        raise ValueError("k must be in {2, 3, 4}")
    if packs is None:
        packs = build_packs(mesh, k)
    layout0 = packs[0].layout
    dmap = ReducedDofMap(k, mesh.n_edges, mesh.n_cells, layout0.n_perp)
    n_press = mesh.n_cells
    if load == "robust" and rt_spaces is None:
        rt_spaces = [build_rt_space(mesh.cell_geometry(c), k) for c in range(mesh.n_cells)]
    elif load != "robust":
        rt_spaces = None

    rows_a, cols_a, vals_a = [], [], []
    rows_b, cols_b, vals_b = [], [], []
    rhs = np.zeros(dmap.n_dofs)
    mean_row = np.zeros(n_press)
    cache = []
    recs = []
    for c in range(mesh.n_cells):
        pack = packs[c]
        rec = reduction_matrix(pack)
        recs.append(rec)
        gidx = dmap.cell_indices(mesh, c)
        cache.append(gidx)
        loc = local_stiffness(pack)
        _triplet_append(rows_a, cols_a, vals_a, gidx, gidx, rec.T @ loc.a @ rec)
        _triplet_append(rows_b, cols_b, vals_b, [c], gidx, (loc.b[0] @ rec)[None, :])
        mean_row[c] = pack.cell.area
        if f is not None:
            if load == "standard":
                rhs[gidx] += rec.T @ local_load(pack, f)
            elif load == "robust":
                interp = rt_interpolation_matrix(rt_spaces[c], pack)
                rhs[gidx] += rec.T @ rt_load(rt_spaces[c], interp, f)
            else:
                raise ValueError(f"unknown load mode {load!r}")

    n = dmap.n_dofs
    a_mat = sp.coo_matrix(
        (np.concatenate(vals_a), (np.concatenate(rows_a), np.concatenate(cols_a))),
        shape=(n, n)).tocsr()
    b_mat = sp.coo_matrix(
        (np.concatenate(vals_b), (np.concatenate(rows_b), np.concatenate(cols_b))),
        shape=(n_press, n)).tocsr()
    return GlobalSystem(
        mesh=mesh, k=k, nu=nu, dof_map=dmap, packs=packs, a_mat=a_mat,
        b_mat=b_mat, rhs=rhs, mean_row=mean_row, n_pressure=n_press,
        pressure_dim=1, reduced=True, recs=recs, rt_spaces=rt_spaces,
        local_dofs_cache=cache,
    )


def _direct_saddle_solve(system: GlobalSystem, Aii, Bi, f_i, g_b,
                         tol: float = 1e-12, max_sweeps: int = 50):
    """Direct saddle solve: one SPD factorization plus defect correction.

    Factoring the bordered matrix as assembled lets fill explode (the zero
    pressure block defeats the column ordering), so the factorization is done
    on the augmented velocity operator A + gamma B^T W^{-1} B, which shares
    A's sparsity; W is the block-diagonal pressure Gram matrix.  A handful of
    defect-correction sweeps against the true saddle residual then reaches
    residuals near round-off regardless of gamma.  The global-constant
    pressure mode is invisible to B^T, so it is projected out with the mean
    row each sweep; the multiplier is recovered from the continuity residual
    at the end.
    """
    d = system.pressure_dim
    if system.reduced:
        w_blocks = [np.array([[p.cell.area]]) for p in system.packs]
    else:
        w_blocks = [p.gram[:d, :d] for p in system.packs]
    w_inv = sp.block_diag([np.linalg.inv(w) for w in w_blocks], format="csc")
    coupling = (Bi.T @ (w_inv @ Bi)).tocsc()
    a_scale = np.abs(Aii.diagonal()).mean()
    c_scale = coupling.diagonal().mean()
    gamma = 1e4 * a_scale / max(c_scale, 1e-300)
    lu = spla.splu((Aii + gamma * coupling).tocsc())

    m = system.mean_row
    n_p = Bi.shape[0]
    u = np.zeros(Aii.shape[0])
    p = np.zeros(n_p)
    c0 = np.zeros(n_p)
    c0[0::d] = 1.0
    mc0 = m @ c0
    scale = max(1.0, np.hypot(np.linalg.norm(f_i), np.linalg.norm(g_b)))
    # sweep until the residual stagnates, not merely below tol: forces that
    # nearly annihilate the solution (no-flow at large amplitudes) need the
    # full attainable accuracy, eps * ||rhs|| rather than tol * ||rhs||
    prev = np.inf
    stalls = 0
    for _ in range(max_sweeps):
        ru = f_i - (Aii @ u + Bi.T @ p)
        rc = g_b - Bi @ u
        r = np.hypot(np.linalg.norm(ru), np.linalg.norm(rc))
        if r <= 1e-16 * scale:
            break
        if r >= 0.5 * prev:
            stalls += 1
            if stalls >= 4 or (stalls >= 2 and r <= tol * scale):
                break
        else:
            stalls = 0
        prev = min(prev, r)
        du = lu.solve(ru + gamma * (Bi.T @ (w_inv @ rc)))
        u += du
        p += gamma * (w_inv @ (Bi @ du - rc))
        p -= c0 * (m @ p) / mc0
    lam = float(m @ (g_b - Bi @ u) / (m @ m))
    return u, p, lam


def solve(system: GlobalSystem, dirichlet=None, solver: str = "direct",
          method_name: str = "standard") -> DiscreteSolution:
    """Solve the assembled saddle system with eliminated Dirichlet DoFs."""
    mesh = system.mesh
    n = system.dof_map.n_dofs
    g = np.zeros(n)
    if dirichlet is not None:
        g_full = boundary_values(mesh, system.k, dirichlet)
        bdofs_full = VelocityDofMap(
            system.k, mesh.n_edges, mesh.n_cells,
            system.packs[0].layout.n_interior).boundary_dofs(mesh)
        # edge numbering is shared between the full and reduced maps
        g[system.dof_map.boundary_dofs(mesh)] = g_full[bdofs_full]
    bdofs = system.dof_map.boundary_dofs(mesh)
    mask = np.ones(n, dtype=bool)
    mask[bdofs] = False
    idx_i = np.nonzero(mask)[0]

    A = system.a_mat
    B = system.b_mat
    nu = system.nu
    Aii = A[idx_i][:, idx_i] * nu
    Aib = A[idx_i][:, bdofs] * nu
    Bi = B[:, idx_i]
    Bb = B[:, bdofs]
    f_i = system.rhs[idx_i] - Aib @ g[bdofs]
    g_b = -(Bb @ g[bdofs])

    m = system.mean_row
    npress = system.n_pressure
    ni = len(idx_i)
    rhs = np.concatenate([f_i, g_b, [0.0]])
    if solver == "direct":
        u_i, p, lam = _direct_saddle_solve(system, Aii, Bi, f_i, g_b)
        x = np.concatenate([u_i, p, [lam]])
    elif solver == "minres":
        K = sp.bmat(
            [
                [Aii, Bi.T, None],
                [Bi, None, m[:, None]],
                [None, m[None, :], None],
            ],
            format="csc",
        )
        d = np.abs(K.diagonal())
        d[d < 1e-12] = 1.0
        M = sp.diags(1.0 / d)
        x, info = spla.minres(K, rhs, M=M, rtol=1e-12, maxiter=20 * K.shape[0])
        if info != 0:
            raise SolverError(f"minres did not converge (info={info})")
    else:
        raise ValueError(f"unknown solver {solver!r}")

    u_i, p, lam = x[:ni], x[ni:ni + npress], float(x[-1])
    res = np.sqrt(
        np.linalg.norm(f_i - Aii @ u_i - Bi.T @ p) ** 2
        + np.linalg.norm(g_b - Bi @ u_i - m * lam) ** 2
        + (m @ p) ** 2
    ) / max(1.0, np.linalg.norm(rhs))
    if not res <= 1e-9:
        raise SolverError(f"solver residual {res:.3e} exceeds contract")

    u = g.copy()
    u[idx_i] = u_i
    return DiscreteSolution(system=system, u=u, p=p, lam=lam,
                            residual=res, method=method_name)


def recover_pressure(sol: DiscreteSolution, f, nu: float | None = None) -> list:
    """Element-wise P_{k-1} pressure from a reduced solution.

    Tests the momentum residual against the local fields whose only nonzero
    DoFs sit in the gradient block; their divergences are the zero-mean
    monomials, which makes the local systems diagonal.  Returns per-cell
    coefficient vectors in the cell monomial basis, including the constant
    carried over from the reduced pressure.
    """
    system = sol.system
    if not system.reduced:
        raise ValueError("pressure recovery applies to reduced solutions")
    if nu is None:
        nu = system.nu
    k = system.k
    nk1 = dim_poly(k - 1)
    out = []
    for c in range(system.mesh.n_cells):
        pack = system.packs[c]
        loc = local_stiffness(pack)
        if f is None:
            F = np.zeros(pack.n_dof)
        elif system.rt_spaces is not None:
            space = system.rt_spaces[c]
            F = rt_load(space, rt_interpolation_matrix(space, pack), f)
        else:
            F = local_load(pack, f)
        dofs = sol.cell_dofs(c)
        resid = F - nu * (loc.a @ dofs)
        area = pack.cell.area
        means = pack.gram[:nk1, 0] / area
        gsl = pack.layout.grad_slice
        coeffs = np.zeros(nk1)
        pi = -resid[gsl] / area
        coeffs[1:] = pi
        coeffs[0] = sol.pressure_coeffs(c)[0] - pi @ means[1:]
        out.append(coeffs)
    return out
