"""Two-scale solver for steady heat conduction in periodic composites.

The domain is a union of axis-aligned rectangular subdomains, each filled
with a periodic microstructure described by a square unit cell and a period
length.  The solver computes unit-cell correctors, a homogenized
conductivity tensor per subdomain, the homogenized macro temperature, and
reconstructs the two-scale temperature field up to second order.  A
fine-mesh reference solve provides the error metrics.
"""

__version__ = "0.1.0"

from .mesh import (
    Mesh2D,
    Point2,
    Rect,
    Inclusion,
    UnitCellSpec,
    SubdomainSpec,
    generate_unit_cell_mesh,
    generate_macro_mesh,
    generate_fine_mesh,
    locate_point,
)
from .fem import (
    ScalarField,
    ConductivityField,
    SparseSystem,
    assemble_stiffness,
    assemble_load,
    apply_dirichlet,
    solve_spd,
    interpolate,
    recover_gradient,
    norms,
)
from .cells import (
    CellSolutionSet,
    solve_cell,
    solve_first_order_cells,
    compute_homogenized_tensor,
    solve_second_order_cells,
)
from .macro import HomogenizedModel, MacroDerivatives, solve_homogenized, derivatives_of_t0
from .reconstruct import MultiscaleSolution, map_to_cell_coords, evaluate, sample_onto_mesh
from .reference import solve_reference
from .metrics import ErrorReport, compare
from .config import ExperimentConfig, parse_config
from .pipeline import run_experiment, sweep_epsilon

__all__ = [
    "Mesh2D",
    "Point2",
    "Rect",
    "Inclusion",
    "UnitCellSpec",
    "SubdomainSpec",
    "generate_unit_cell_mesh",
    "generate_macro_mesh",
    "generate_fine_mesh",
    "locate_point",
    "ScalarField",
    "ConductivityField",
    "SparseSystem",
    "assemble_stiffness",
    "assemble_load",
    "apply_dirichlet",
    "solve_spd",
    "interpolate",
    "recover_gradient",
    "norms",
    "CellSolutionSet",
    "solve_cell",
    "solve_first_order_cells",
    "compute_homogenized_tensor",
    "solve_second_order_cells",
    "HomogenizedModel",
    "MacroDerivatives",
    "solve_homogenized",
    "derivatives_of_t0",
    "MultiscaleSolution",
    "map_to_cell_coords",
    "evaluate",
    "sample_onto_mesh",
    "solve_reference",
    "ErrorReport",
    "compare",
    "ExperimentConfig",
    "parse_config",
    "run_experiment",
    "sweep_epsilon",
]
