"""Polygonal meshes: data structures, generators, validation, JSON I/O.

Cells are simple polygons stored as counterclockwise vertex loops.  Every
cell must be star-shaped with respect to its centroid so that the centroid
fan provides a valid subtriangulation for quadrature and for the piecewise
Raviart-Thomas construction.

Edge orientation convention: an edge is the sorted vertex pair (a, b) with
a < b, parametrized from vertices[a] to vertices[b].  The unit tangent is
t = (x_b - x_a)/|F| and the edge normal is n = (t_y, -t_x).  A cell whose
boundary loop traverses the edge from a to b carries sign +1 for that edge
(its outward normal equals n), otherwise sign -1.  Edge moments are always
taken in the global parametrization, so neighbouring cells agree on shared
degrees of freedom without sign flips.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np


class MeshFormatError(ValueError):
    """Raised when a mesh file cannot be parsed into vertices and cells."""


class MeshValidationError(ValueError):
    """Raised when a mesh violates a structural invariant."""


class CellGeometryError(ValueError):
    """Raised for degenerate or non-star-shaped cells."""


def polygon_area(verts: np.ndarray) -> float:
    """Signed area of a polygon (positive for counterclockwise loops)."""
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def polygon_centroid(verts: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon."""
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * np.sum(cross)
    if abs(a) < 1e-300:
        raise CellGeometryError("zero-area polygon has no centroid")
    cx = np.sum((x + xn) * cross) / (6.0 * a)
    cy = np.sum((y + yn) * cross) / (6.0 * a)
    return np.array([cx, cy])


def polygon_diameter(verts: np.ndarray) -> float:
    """Largest pairwise vertex distance."""
    d = verts[:, None, :] - verts[None, :, :]
    return float(np.sqrt((d ** 2).sum(axis=2)).max())


@dataclass(frozen=True)
class CellGeometry:
    """Geometry of one polygonal cell, with globally oriented edge data.

    ``edge_starts[i] -> edge_ends[i]`` is the global parametrization of local
    edge i; ``edge_signs[i]`` is +1 when the cell's counterclockwise loop
    traverses the edge in that direction.  ``edge_normals`` are the global
    edge normals, so the outward normal of the cell on edge i is
    ``edge_signs[i] * edge_normals[i]``.
    """

    verts: np.ndarray
    centroid: np.ndarray
    area: float
    diameter: float
    edge_starts: np.ndarray
    edge_ends: np.ndarray
    edge_signs: np.ndarray
    edge_lengths: np.ndarray
    edge_tangents: np.ndarray
    edge_normals: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.verts)

    @classmethod
    def from_polygon(cls, verts) -> "CellGeometry":
        """Standalone cell: global edge orientation equals the cell loop."""
        verts = np.asarray(verts, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise CellGeometryError("polygon needs an (m, 2) vertex array, m >= 3")
        if polygon_area(verts) < 0:
            verts = verts[::-1].copy()
        starts = verts
        ends = np.roll(verts, -1, axis=0)
        signs = np.ones(len(verts), dtype=int)
        return _make_cell_geometry(verts, starts, ends, signs)

    def outward_normal(self, i: int) -> np.ndarray:
        return self.edge_signs[i] * self.edge_normals[i]


def _make_cell_geometry(verts, starts, ends, signs) -> CellGeometry:
    area = polygon_area(verts)
    if area <= 0:
        raise CellGeometryError("cell loop is not counterclockwise or is degenerate")
    lengths = np.linalg.norm(ends - starts, axis=1)
    if lengths.min() <= 0:
        raise CellGeometryError("cell has a zero-length edge")
    tangents = (ends - starts) / lengths[:, None]
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    return CellGeometry(
        verts=verts,
        centroid=polygon_centroid(verts),
        area=area,
        diameter=polygon_diameter(verts),
        edge_starts=starts,
        edge_ends=ends,
        edge_signs=np.asarray(signs, dtype=int),
        edge_lengths=lengths,
        edge_tangents=tangents,
        edge_normals=normals,
    )


def subtriangulate(cell: CellGeometry) -> np.ndarray:
    """Centroid fan of the cell as an (m, 3, 2) array; a triangle is itself.

    Raises CellGeometryError when a fan triangle has non-positive area,
    i.e. the cell is not star-shaped with respect to its centroid.
    """
    verts = cell.verts
    if len(verts) == 3:
        return verts[None, :, :].copy()
    m = len(verts)
    tris = np.empty((m, 3, 2))
    tris[:, 0] = cell.centroid
    tris[:, 1] = verts
    tris[:, 2] = np.roll(verts, -1, axis=0)
    d1 = tris[:, 1] - tris[:, 0]
    d2 = tris[:, 2] - tris[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if areas.min() <= 1e-14 * cell.diameter ** 2:
        raise CellGeometryError(
            "cell is not star-shaped with respect to its centroid "
            f"(min fan area {areas.min():.3e})"
        )
    return tris


@dataclass
class PolyMesh:
    """Conforming polygonal mesh.

    vertices   : (nv, 2) float array
    cells      : list of counterclockwise vertex index loops
    edges      : (ne, 2) int array, each row sorted ascending
    cell_edges : per cell an (m, 2) int array of (edge index, sign)
    edge_cells : (ne, 2) int array of incident cells, -1 when absent
    """

    vertices: np.ndarray
    cells: list
    edges: np.ndarray
    cell_edges: list
    edge_cells: np.ndarray
    _geom_cache: list = field(default_factory=list, repr=False)

    @classmethod
    def from_cells(cls, vertices, cells) -> "PolyMesh":
        vertices = np.asarray(vertices, dtype=float)
        norm_cells = []
        for ci, loop in enumerate(cells):
            loop = np.asarray(loop, dtype=int)
            if len(loop) < 3:
                raise MeshValidationError(f"cell {ci} has fewer than 3 vertices")
            if len(np.unique(loop)) != len(loop):
                raise MeshValidationError(f"cell {ci} repeats a vertex index")
            if polygon_area(vertices[loop]) < 0:
                warnings.warn(f"cell {ci} was clockwise; reorienting", stacklevel=2)
                loop = loop[::-1].copy()
            norm_cells.append(loop)

        edge_index: dict = {}
        cell_edges = []
        for loop in norm_cells:
            m = len(loop)
            rows = np.empty((m, 2), dtype=int)
            for i in range(m):
                a, b = int(loop[i]), int(loop[(i + 1) % m])
                key = (a, b) if a < b else (b, a)
                if key not in edge_index:
                    edge_index[key] = len(edge_index)
                rows[i, 0] = edge_index[key]
                rows[i, 1] = 1 if a < b else -1
            cell_edges.append(rows)

        ne = len(edge_index)
        edges = np.empty((ne, 2), dtype=int)
        for (a, b), ei in edge_index.items():
            edges[ei] = (a, b)
        edge_cells = np.full((ne, 2), -1, dtype=int)
        for ci, rows in enumerate(cell_edges):
            for ei in rows[:, 0]:
                if edge_cells[ei, 0] < 0:
                    edge_cells[ei, 0] = ci
                elif edge_cells[ei, 1] < 0:
                    edge_cells[ei, 1] = ci
                else:
                    raise MeshValidationError(f"edge {ei} borders more than 2 cells")
        return cls(vertices, norm_cells, edges, cell_edges, edge_cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_edge_mask(self) -> np.ndarray:
        return self.edge_cells[:, 1] < 0

    def edge_length(self, ei: int) -> float:
        a, b = self.edges[ei]
        return float(np.linalg.norm(self.vertices[b] - self.vertices[a]))

    def cell_geometry(self, ci: int) -> CellGeometry:
        if not self._geom_cache:
            self._geom_cache = [None] * self.n_cells
        if self._geom_cache[ci] is None:
            loop = self.cells[ci]
            verts = self.vertices[loop]
            rows = self.cell_edges[ci]
            ea, eb = self.edges[rows[:, 0], 0], self.edges[rows[:, 0], 1]
            starts = self.vertices[ea]
            ends = self.vertices[eb]
            self._geom_cache[ci] = _make_cell_geometry(verts, starts, ends, rows[:, 1])
        return self._geom_cache[ci]

    def h_max(self) -> float:
        return max(self.cell_geometry(c).diameter for c in range(self.n_cells))

    def total_area(self) -> float:
        return sum(self.cell_geometry(c).area for c in range(self.n_cells))

    def validate(self) -> None:
        """Check structural invariants; raises MeshValidationError on failure."""
        from shapely.geometry import Polygon

        scale = polygon_diameter(self.vertices) if self.n_vertices else 1.0
        for ci in range(self.n_cells):
            verts = self.vertices[self.cells[ci]]
            poly = Polygon(verts)
            if not poly.is_valid or not poly.is_simple:
                raise MeshValidationError(f"cell {ci} is not a simple polygon")
            try:
                subtriangulate(self.cell_geometry(ci))
            except CellGeometryError as exc:
                raise MeshValidationError(f"cell {ci}: {exc}") from exc
        counts = self.edge_cells
        if ((counts[:, 0] < 0)).any():
            raise MeshValidationError("edge with no incident cell")
        # Conformity of the partition: interior edges bound exactly 2 cells
        # and the cell areas tile the bounding region (checked by the caller
        # against the known domain area where available).
        hull_area = None
        try:
            from shapely.geometry import MultiPoint

            hull_area = MultiPoint([tuple(p) for p in self.vertices]).convex_hull.area
        except Exception:
            pass
        total = self.total_area()
        if hull_area is not None and total > hull_area * (1 + 1e-8):
            raise MeshValidationError("cell areas exceed the convex hull area")


# ---------------------------------------------------------------------------
# generators


def _grid_vertices(nx: int, ny: int, rect) -> tuple[np.ndarray, np.ndarray]:
    x0, x1, y0, y1 = rect
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    return verts, idx


def generate_uniform_triangles(nx: int, ny: int, rect=(0.0, 1.0, 0.0, 1.0)) -> PolyMesh:
    """Structured triangulation of a rectangle, each square split by the
    diagonal from its lower-left to its upper-right corner."""
    if nx < 1 or ny < 1:
        raise MeshValidationError("need at least one subdivision per direction")
    verts, idx = _grid_vertices(nx, ny, rect)
    cells = []
    for i in range(nx):
        for j in range(ny):
            v00, v10 = idx[i, j], idx[i + 1, j]
            v01, v11 = idx[i, j + 1], idx[i + 1, j + 1]
            cells.append([v00, v10, v11])
            cells.append([v00, v11, v01])
    return PolyMesh.from_cells(verts, cells)


def generate_uniform_quads(nx: int, ny: int, rect=(0.0, 1.0, 0.0, 1.0)) -> PolyMesh:
    """Structured quadrilateral mesh of a rectangle."""
    if nx < 1 or ny < 1:
        raise MeshValidationError("need at least one subdivision per direction")
    verts, idx = _grid_vertices(nx, ny, rect)
    cells = []
    for i in range(nx):
        for j in range(ny):
            cells.append([idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]])
    return PolyMesh.from_cells(verts, cells)


def _clip_halfplane(poly: list, point, normal) -> list:
    """Sutherland-Hodgman clip of a polygon against n.(x - p) <= 0."""
    out = []
    m = len(poly)
    for i in range(m):
        a, b = poly[i], poly[(i + 1) % m]
        da = (a[0] - point[0]) * normal[0] + (a[1] - point[1]) * normal[1]
        db = (b[0] - point[0]) * normal[0] + (b[1] - point[1]) * normal[1]
        if da <= 0:
            out.append(a)
            if db > 0:
                t = da / (da - db)
                out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
        elif db <= 0:
            t = da / (da - db)
            out.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return out


def _snap_loop(loop: list, xs, ys, tol: float) -> list:
    """Snap coordinates within tol of a clip line onto it.

    Applied identically to every loop before clipping, so shared vertices
    stay shared; keeps the clip from slicing hairline slivers off cells
    whose lattice column lands next to a boundary.  tol must stay below
    half the column spacing so at most one column snaps per line.
    """
    out = []
    for x, y in loop:
        for xb in xs:
            if abs(x - xb) < tol:
                x = xb
                break
        for yb in ys:
            if abs(y - yb) < tol:
                y = yb
                break
        out.append((x, y))
    return out


def _clip_rect(poly: list, rect) -> list:
    x0, x1, y0, y1 = rect
    for point, normal in (
        ((x0, y0), (-1.0, 0.0)),
        ((x1, y1), (1.0, 0.0)),
        ((x0, y0), (0.0, -1.0)),
        ((x1, y1), (0.0, 1.0)),
    ):
        poly = _clip_halfplane(poly, point, normal)
        if not poly:
            return []
    return poly


class _VertexPool:
    """Deduplicates nearly identical points onto shared indices."""

    def __init__(self, tol: float):
        self.tol = tol
        self.table: dict = {}
        self.points: list = []

    def add(self, p) -> int:
        key = (round(p[0] / self.tol), round(p[1] / self.tol))
        # check the 3x3 key neighbourhood so borderline rounding cannot split
        # one physical vertex into two pool entries
        for dx in (0, -1, 1):
            for dy in (0, -1, 1):
                hit = self.table.get((key[0] + dx, key[1] + dy))
                if hit is not None:
                    q = self.points[hit]
                    if abs(q[0] - p[0]) <= 2 * self.tol and abs(q[1] - p[1]) <= 2 * self.tol:
                        return hit
        self.table[key] = len(self.points)
        self.points.append((float(p[0]), float(p[1])))
        return len(self.points) - 1


def _canonical_loop(pts: list, tol: float) -> list:
    """Drop consecutive duplicates and enforce counterclockwise order."""
    out = []
    for p in pts:
        if not out or abs(p[0] - out[-1][0]) > tol or abs(p[1] - out[-1][1]) > tol:
            out.append(p)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= tol and abs(out[0][1] - out[-1][1]) <= tol:
        out.pop()
    if len(out) >= 3 and polygon_area(np.asarray(out)) < 0:
        out.reverse()
    return out


def _hex_tiles(r: float, x0: float, y0: float, i_range, j_range):
    """Pointy-top hexagon loops on the exact half-lattice (p*hw, q*hr)."""
    hw = math.sqrt(3.0) * r / 2.0
    hr = r / 2.0
    offs = [(0, 2), (-1, 1), (-1, -1), (0, -2), (1, -1), (1, 1)]
    for j in j_range:
        for i in i_range:
            pc = 2 * i + (j & 1)
            qc = 3 * j
            yield [(x0 + (pc + dp) * hw, y0 + (qc + dq) * hr) for dp, dq in offs]


def _mesh_from_loops(loops: list, scale: float) -> PolyMesh:
    pool = _VertexPool(tol=1e-12 * max(scale, 1.0))
    cells = []
    for loop in loops:
        idx = [pool.add(p) for p in loop]
        dedup = [idx[0]]
        for v in idx[1:]:
            if v != dedup[-1]:
                dedup.append(v)
        if dedup[0] == dedup[-1]:
            dedup.pop()
        if len(dedup) >= 3:
            cells.append(dedup)
    return PolyMesh.from_cells(np.asarray(pool.points), cells)


def generate_hex_dominant(n: int, rect=(0.0, 1.0, 0.0, 1.0)) -> PolyMesh:
    """Hexagon-dominant mesh of a rectangle: a pointy-top hexagonal tiling
    with n hexagon rows, clipped to the rectangle.  Interior cells are
    hexagons; boundary cells are the clipped pentagons/quads/triangles.
    """
    if n < 1:
        raise MeshValidationError("need n >= 1 hexagon rows")
    x0, x1, y0, y1 = rect
    W, H = x1 - x0, y1 - y0
    if W <= 0 or H <= 0:
        raise MeshValidationError("rectangle has non-positive extent")
    r = H / (1.5 * n + 0.5)
    hw = math.sqrt(3.0) * r / 2.0
    ncols = int(math.ceil(W / (2 * hw))) + 2
    area_tol = 1e-12 * r * r
    snap = 0.45 * hw
    loops = []
    for hexloop in _hex_tiles(r, x0, y0, range(-1, ncols + 1), range(-1, n + 2)):
        hexloop = _snap_loop(hexloop, (x0, x1), (y0, y1), snap)
        clipped = _canonical_loop(_clip_rect(hexloop, rect), 1e-13 * r)
        if len(clipped) >= 3 and polygon_area(np.asarray(clipped)) > area_tol:
            loops.append(clipped)
    mesh = _mesh_from_loops(loops, scale=max(W, H))
    if not math.isclose(mesh.total_area(), W * H, rel_tol=1e-10):
        raise MeshValidationError("hex tiling does not cover the rectangle")
    return mesh


def generate_lshape(n: int, cell_type: str = "tri") -> PolyMesh:
    """Mesh of the L-shaped domain (-1,1)^2 minus the closed quadrant
    [0,1] x [-1,0], built from three n-by-n unit-square patches.

    cell_type 'tri' splits each patch square into two triangles, 'quad'
    keeps squares, 'hex' clips a hexagonal tiling to the L (the tiling is
    aligned so the reentrant corner is a hexagon center, which keeps every
    clipped cell star-shaped).
    """
    if n < 1:
        raise MeshValidationError("need n >= 1 subdivisions per patch")
    if cell_type in ("tri", "quad"):
        gen = generate_uniform_triangles if cell_type == "tri" else generate_uniform_quads
        patches = [
            gen(n, n, (-1.0, 0.0, -1.0, 0.0)),
            gen(n, n, (-1.0, 0.0, 0.0, 1.0)),
            gen(n, n, (0.0, 1.0, 0.0, 1.0)),
        ]
        loops = []
        for patch in patches:
            for loop in patch.cells:
                loops.append([tuple(p) for p in patch.vertices[loop]])
        return _mesh_from_loops(loops, scale=2.0)
    if cell_type != "hex":
        raise MeshValidationError(f"unknown cell_type {cell_type!r}")

    from shapely.geometry import Polygon, box

    r = 2.0 / (1.5 * n + 0.5)
    hw = math.sqrt(3.0) * r / 2.0
    ncols = int(math.ceil(2.0 / (2 * hw))) + 2
    quadrant = box(0.0, -2.0, 2.0, 0.0)
    area_tol = 1e-12 * r * r
    loops = []
    jmax = int(math.ceil(1.0 / (1.5 * r))) + 2
    snap = 0.45 * hw
    for hexloop in _hex_tiles(r, 0.0, 0.0, range(-ncols, ncols + 1), range(-jmax, jmax + 1)):
        hexloop = _snap_loop(hexloop, (-1.0, 1.0), (-1.0, 1.0), snap)
        clipped = _clip_rect(hexloop, (-1.0, 1.0, -1.0, 1.0))
        if not clipped:
            continue
        piece = Polygon(clipped).difference(quadrant)
        if piece.is_empty or piece.area <= area_tol:
            continue
        if piece.geom_type != "Polygon":
            raise MeshValidationError("hexagon clipped to a multi-part cell")
        pts = list(piece.exterior.coords)[:-1]
        cell = _canonical_loop(pts, 1e-13 * r)
        if len(cell) >= 3 and polygon_area(np.asarray(cell)) > area_tol:
            loops.append(cell)
    mesh = _mesh_from_loops(loops, scale=2.0)
    if not math.isclose(mesh.total_area(), 3.0, rel_tol=1e-10):
        raise MeshValidationError("hex tiling does not cover the L-shape")
    return mesh


# ---------------------------------------------------------------------------
# JSON I/O


def save_mesh(mesh: PolyMesh, path) -> None:
    """Write vertices and cell loops as JSON with round-trip floats."""
    payload = {
        "vertices": [[float(x), float(y)] for x, y in mesh.vertices],
        "cells": [[int(v) for v in loop] for loop in mesh.cells],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_mesh(path) -> PolyMesh:
    """Read a mesh written by save_mesh; validates structure on load."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(payload, dict) or "vertices" not in payload or "cells" not in payload:
        raise MeshFormatError(f"{path}: expected an object with 'vertices' and 'cells'")
    verts = np.asarray(payload["vertices"], dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise MeshFormatError(f"{path}: 'vertices' must be a list of [x, y] pairs")
    nv = len(verts)
    for ci, loop in enumerate(payload["cells"]):
        arr = np.asarray(loop)
        if arr.ndim != 1 or len(arr) < 3:
            raise MeshFormatError(f"{path}: cell {ci} is not a vertex loop")
        if arr.min() < 0 or arr.max() >= nv:
            raise MeshFormatError(f"{path}: cell {ci} references a missing vertex")
    mesh = PolyMesh.from_cells(verts, payload["cells"])
    mesh.validate()
    return mesh
