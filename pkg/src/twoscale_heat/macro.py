"""Homogenized macro problem and smoothed derivatives of its solution.

The macro conductivity is piecewise constant per subdomain (the homogenized
tensor of its cell).  Gradients and Hessians of the macro temperature are
recovered by area-weighted patch averaging done per subdomain, so interface
nodes carry one value for each adjacent subdomain and no smoothing leaks
across material interfaces.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Union

import numpy as np

from . import kernels
from .errors import SpecError
from .fem import (
    ConductivityField,
    ScalarField,
    apply_dirichlet,
    assemble_load,
    assemble_stiffness,
    recover_gradient_by_subdomain,
    solve_spd,
)
from .mesh import Mesh2D


@dataclass
class HomogenizedModel:
    """Macro problem data: mesh, per-subdomain tensors, source, boundary data."""

    mesh: Mesh2D
    tensors: Dict[int, np.ndarray]
    source: Union[None, float, Callable]
    dirichlet: Union[float, Callable]
    neumann_flux: Union[None, float, Callable] = None

    def conductivity(self) -> ConductivityField:
        if self.mesh.subdomain is None:
            raise SpecError("macro mesh is missing subdomain tags")
        full = np.zeros((self.mesh.n_elements, 2, 2))
        seen = np.zeros(self.mesh.n_elements, dtype=bool)
        for tag, tensor in self.tensors.items():
            mask = self.mesh.subdomain == tag
            full[mask] = np.asarray(tensor, dtype=np.float64)
            seen |= mask
        if not seen.all():
            missing = np.unique(self.mesh.subdomain[~seen])
            raise SpecError(f"no homogenized tensor for subdomains {missing.tolist()}")
        return ConductivityField(full)  # SPD-checked on construction


def solve_homogenized(model: HomogenizedModel, rel_tol: float = 1e-10) -> ScalarField:
    """Solve the homogenized conduction problem on the macro mesh."""
    mesh = model.mesh
    system = assemble_stiffness(mesh, model.conductivity())
    system = system.with_rhs(assemble_load(mesh, model.source, model.neumann_flux))
    fixed = mesh.dirichlet_nodes
    if callable(model.dirichlet):
        values = np.asarray(
            model.dirichlet(mesh.nodes[fixed, 0], mesh.nodes[fixed, 1]), dtype=np.float64
        )
        values = np.broadcast_to(values, fixed.shape).copy()
    else:
        values = np.full(fixed.size, float(model.dirichlet))
    system = apply_dirichlet(system, fixed, values)
    return ScalarField(mesh, solve_spd(system, rel_tol))


@dataclass
class MacroDerivatives:
    """Recovered nodal gradient and symmetrized Hessian, per subdomain tag.

    gradient[s] is (n_nodes, 2), hessian[s] is (n_nodes, 2, 2); entries are
    NaN at nodes not adjacent to subdomain s.
    """

    gradient: Dict[int, np.ndarray]
    hessian: Dict[int, np.ndarray]


def derivatives_of_t0(t0: ScalarField) -> MacroDerivatives:
    """Gradient and Hessian of the macro solution by double patch recovery."""
    mesh = t0.mesh
    gradient = recover_gradient_by_subdomain(t0)
    hessian = {}
    for tag, grad in gradient.items():
        mask = mesh.subdomain == tag
        hess = np.full((mesh.n_nodes, 2, 2), np.nan)
        rows = []
        for c in range(2):
            comp = np.where(np.isnan(grad[:, c]), 0.0, grad[:, c])
            eg = kernels.element_gradients(mesh.basis_grads, mesh.elements, comp)
            sums, totals = kernels.accumulate_weighted(
                mesh.elements, mesh.areas, eg, mesh.n_nodes, mask
            )
            row = np.full((mesh.n_nodes, 2), np.nan)
            has = totals > 0
            row[has] = sums[has] / totals[has, None]
            rows.append(row)
        hess[:, 0, :] = rows[0]
        hess[:, 1, :] = rows[1]
        sym = 0.5 * (hess + np.swapaxes(hess, 1, 2))
        hessian[tag] = sym
    return MacroDerivatives(gradient=gradient, hessian=hessian)
