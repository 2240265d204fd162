"""Divergence-free nonconforming virtual elements for 2D Stokes flow.

Polygonal meshes, arbitrary order k in {2, 3, 4}, three variants of the
scheme (standard, pressure-robust via a divergence-preserving load
interpolation, and a reduced scheme with constant pressures), plus a
benchmark harness with manufactured solutions and CSV output.
"""

from .element import (
    CellDegeneracyError,
    DofLayout,
    ProjectorPack,
    compute_projector,
    dof_evaluate,
    local_load,
    local_stiffness,
)
from .harness import (
    ManufacturedSolution,
    error_norms,
    lshape_solution,
    noflow_solution,
    patch_solution,
    run_convergence,
    run_noflow,
    run_patch,
    solve_on_mesh,
    square_solution,
    write_csv,
)
from .mesh import (
    CellGeometryError,
    MeshFormatError,
    MeshValidationError,
    PolyMesh,
    generate_hex_dominant,
    generate_lshape,
    generate_uniform_quads,
    generate_uniform_triangles,
    load_mesh,
    save_mesh,
)
from .polyspace import MonomialBasis, QuadratureError, dim_poly
from .rt import RTGeometryError, RTLocalSpace, build_rt_space
from .system import (
    DiscreteSolution,
    GlobalSystem,
    SolverError,
    assemble,
    assemble_reduced,
    build_packs,
    recover_pressure,
    solve,
)

__all__ = [
    "CellDegeneracyError", "CellGeometryError", "DiscreteSolution",
    "DofLayout", "GlobalSystem", "ManufacturedSolution", "MeshFormatError",
    "MeshValidationError", "MonomialBasis", "PolyMesh", "ProjectorPack",
    "QuadratureError", "RTGeometryError", "RTLocalSpace", "SolverError",
    "assemble", "assemble_reduced", "build_packs", "build_rt_space",
    "compute_projector", "dim_poly", "dof_evaluate", "error_norms",
    "generate_hex_dominant", "generate_lshape", "generate_uniform_quads",
    "generate_uniform_triangles", "load_mesh", "local_load",
    "local_stiffness", "lshape_solution", "noflow_solution",
    "patch_solution", "recover_pressure", "run_convergence", "run_noflow",
    "run_patch", "save_mesh", "solve", "solve_on_mesh", "square_solution",
    "write_csv",
]

__version__ = "0.1.0"
