"""Shared fixtures, deterministic random cells, and hypothesis strategies."""

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, settings
from hypothesis import strategies as st

from stokesvem.mesh import (
    CellGeometry,
    CellGeometryError,
    generate_hex_dominant,
    generate_lshape,
    generate_uniform_triangles,
    subtriangulate,
)

settings.register_profile(
    "suite",
    max_examples=20,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("suite")


def star_polygon(m, jitter, radii, scale=1.0):
    """Vertices at jittered angles with wobbly radii, sorted CCW."""
    ang = 2.0 * np.pi * (np.arange(m) + np.asarray(jitter)) / m
    pts = np.column_stack([np.cos(ang), np.sin(ang)]) * np.asarray(radii)[:, None]
    return pts * scale


def _star_ranges(regular):
    # the regular variant keeps angle gaps and edge lengths comparable, so
    # conditioning-sensitive bounds hold with room to spare
    if regular:
        return (0.25, 0.75), (0.85, 1.15)
    return (0.05, 0.95), (0.8, 1.2)


def random_cells(count, seed=0, max_verts=8, scales=(0.1, 2.0), regular=False):
    """Deterministic list of star-shaped cells (centroid fan always valid)."""
    (j0, j1), (r0, r1) = _star_ranges(regular)
    rng = np.random.default_rng(seed)
    cells = []
    while len(cells) < count:
        m = int(rng.integers(3, max_verts + 1))
        jitter = rng.uniform(j0, j1, m)
        radii = rng.uniform(r0, r1, m)
        scale = rng.uniform(*scales)
        try:
            cell = CellGeometry.from_polygon(star_polygon(m, jitter, radii, scale))
            subtriangulate(cell)
        except CellGeometryError:
            continue
        cells.append(cell)
    return cells


@st.composite
def polygon_cells(draw, max_verts=8, regular=False):
    (j0, j1), (r0, r1) = _star_ranges(regular)
    m = draw(st.integers(min_value=3, max_value=max_verts))
    jitter = draw(st.lists(st.floats(j0, j1), min_size=m, max_size=m))
    radii = draw(st.lists(st.floats(r0, r1), min_size=m, max_size=m))
    scale = draw(st.floats(0.1, 2.0))
    try:
        cell = CellGeometry.from_polygon(star_polygon(m, jitter, radii, scale))
        subtriangulate(cell)
    except CellGeometryError:
        assume(False)
    return cell


@pytest.fixture(scope="session")
def tri44():
    return generate_uniform_triangles(4, 4)

@pytest.fixture(scope="session")
def hex3():
    return generate_hex_dominant(3)

@pytest.fixture(scope="session")
def lshape2_tri():
    return generate_lshape(2, "tri")

@pytest.fixture(scope="session")
def lshape2_hex():
    return generate_lshape(2, "hex")


@pytest.fixture(scope="session")
def sample_cells(tri44, hex3, lshape2_hex):
    """A varied bag of cell geometries from the standard mesh families."""
    cells = []
    for mesh, picks in ((tri44, range(0, 32, 5)), (hex3, range(hex3.n_cells)),
                        (lshape2_hex, range(0, lshape2_hex.n_cells, 3))):
        cells.extend(mesh.cell_geometry(c) for c in picks)
    return cells


@pytest.fixture(scope="session")
def fixtures():
    from tests.oracles import load_fixtures

    return load_fixtures()
