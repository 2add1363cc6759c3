"""Fine-mesh reference solve of the original heterogeneous problem."""

from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import SpecError
from .fem import (
    ScalarField,
    apply_dirichlet,
    assemble_load,
    assemble_stiffness,
    isotropic_conductivity,
    solve_spd,
)
from .fem import ConductivityField
from .mesh import Mesh2D, SubdomainSpec, UnitCellSpec


def fine_conductivity(mesh: Mesh2D, subdomains: Sequence[SubdomainSpec],
                      cell_specs: Mapping[str, UnitCellSpec]) -> ConductivityField:
    """Per-element isotropic conductivity from phase and subdomain tags."""
    if mesh.subdomain is None:
        raise SpecError("fine mesh is missing subdomain tags")
    k_matrix = np.array([cell_specs[sd.cell_id].k_matrix for sd in subdomains])
    k_incl = np.array([cell_specs[sd.cell_id].k_inclusion for sd in subdomains])
    scalars = np.where(
        mesh.phase == 1, k_incl[mesh.subdomain], k_matrix[mesh.subdomain]
    )
    tensors = np.zeros((mesh.n_elements, 2, 2))
    tensors[:, 0, 0] = scalars
    tensors[:, 1, 1] = scalars
    return ConductivityField(tensors)


def solve_reference(mesh: Mesh2D, subdomains: Sequence[SubdomainSpec],
                    cell_specs: Mapping[str, UnitCellSpec],
                    source: Union[None, float, Callable],
                    dirichlet: Union[float, Callable],
                    neumann_flux: Union[None, float, Callable] = None,
                    rel_tol: float = 1e-10) -> ScalarField:
    """Solve the original equation on the fine mesh that resolves inclusions."""
    k = fine_conductivity(mesh, subdomains, cell_specs)
    system = assemble_stiffness(mesh, k)
    system = system.with_rhs(assemble_load(mesh, source, neumann_flux))
    fixed = mesh.dirichlet_nodes
    if callable(dirichlet):
        values = np.broadcast_to(
            np.asarray(dirichlet(mesh.nodes[fixed, 0], mesh.nodes[fixed, 1]),
                       dtype=np.float64),
            fixed.shape,
        ).copy()
    else:
        values = np.full(fixed.size, float(dirichlet))
    system = apply_dirichlet(system, fixed, values)
    return ScalarField(mesh, solve_spd(system, rel_tol))
