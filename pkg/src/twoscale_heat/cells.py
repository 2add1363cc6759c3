"""Unit-cell corrector problems and the homogenized conductivity tensor.

Both corrector families satisfy homogeneous Dirichlet conditions on the
whole cell boundary (not periodic ones); the reconstructed field therefore
matches the homogenized field exactly on the cell lattice lines.

First order, direction a:   div_y(k grad_y N_a) = -d k_{ia} / d y_i
Second order, pair (a, b):  div_y(k grad_y N_ab) =
        k_eff_ab - k_ab - d(k_{ib} N_a)/d y_i - k_{aj} d N_b / d y_j

In weak form the first-order load is -int k_{ia} dphi/dy_i dQ and the
second-order load moves the divergence term onto the test function.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import SpecError
from .fem import (
    ConductivityField,
    ScalarField,
    SparseSystem,
    apply_dirichlet,
    assemble_stiffness,
    element_gradients,
    isotropic_conductivity,
    solve_spd,
)
from .mesh import Mesh2D, UnitCellSpec, generate_unit_cell_mesh


@dataclass
class CellSolutionSet:
    """Correctors and homogenized tensor of one unit cell."""

    cell_id: str
    mesh: Mesh2D
    conductivity: ConductivityField
    first_order: Tuple[ScalarField, ScalarField]
    second_order: Tuple[Tuple[ScalarField, ScalarField], Tuple[ScalarField, ScalarField]]
    k_eff: np.ndarray


def _constrained_system(mesh: Mesh2D, k: ConductivityField) -> SparseSystem:
    system = assemble_stiffness(mesh, k)
    boundary = np.unique(mesh.boundary_edges)
    return apply_dirichlet(system, boundary, np.zeros(boundary.size))


def solve_first_order_cells(mesh: Mesh2D, k: ConductivityField,
                            rel_tol: float = 1e-10) -> Tuple[ScalarField, ScalarField]:
    """First-order correctors for both coordinate directions."""
    system = _constrained_system(mesh, k)
    grads = mesh.basis_grads  # (ne,3,2)
    areas = mesh.areas
    out = []
    for a in range(2):
        # load_v = -int k_{ia} dphi_v/dy_i = -sum_e area * (K[:,a] . grad_v)
        col = k.tensors[:, :, a]  # (ne,2)
        contrib = -areas[:, None] * np.einsum("evk,ek->ev", grads, col)
        rhs = np.zeros(mesh.n_nodes)
        np.add.at(rhs, mesh.elements.ravel(), contrib.ravel())
        sol = solve_spd(system.with_rhs(rhs), rel_tol)
        out.append(ScalarField(mesh, sol))
    return tuple(out)


def compute_homogenized_tensor(mesh: Mesh2D, k: ConductivityField,
                               first_order) -> np.ndarray:
    """Cell average of k_ij + k_{ia} dN_j/dy_a over the unit cell (|Q| = 1)."""
    areas = mesh.areas
    k_eff = np.empty((2, 2))
    grads = [element_gradients(f) for f in first_order]  # each (ne,2)
    for j in range(2):
        corr = np.einsum("eia,ea->ei", k.tensors, grads[j])  # (ne,2)
        for i in range(2):
            k_eff[i, j] = np.sum(areas * (k.tensors[:, i, j] + corr[:, i]))
    return k_eff / areas.sum()


def compatibility_residuals(mesh: Mesh2D, k: ConductivityField, first_order,
                            k_eff: np.ndarray) -> np.ndarray:
    """Cell integrals of the zero-order part of the second-order loads.

    Entry (a, b) is int_Q [k_eff_ab - k_ab - k_{aj} dN_b/dy_j] dQ, which must
    vanish for the pure-Neumann-free Dirichlet problems to be consistent.
    """
    areas = mesh.areas
    res = np.empty((2, 2))
    for b in range(2):
        gb = element_gradients(first_order[b])
        for a in range(2):
            kg = np.einsum("ej,ej->e", k.tensors[:, a, :], gb)
            res[a, b] = np.sum(areas * (k_eff[a, b] - k.tensors[:, a, b] - kg))
    return res


def solve_second_order_cells(mesh: Mesh2D, k: ConductivityField, first_order,
                             k_eff: np.ndarray, rel_tol: float = 1e-10):
    """Second-order correctors for all four direction pairs."""
    system = _constrained_system(mesh, k)
    areas = mesh.areas
    grads = mesh.basis_grads
    tris = mesh.elements
    fo_grads = [element_gradients(f) for f in first_order]
    fo_mean = [f.values[tris].mean(axis=1) for f in first_order]  # element averages
    rows = []
    for a in range(2):
        row = []
        for b in range(2):
            # zero-order coefficient of the strong form, constant per element
            kg = np.einsum("ej,ej->e", k.tensors[:, a, :], fo_grads[b])
            c0 = k_eff[a, b] - k.tensors[:, a, b] - kg
            # weak load: -( int c0 phi + int k_{ib} N_a dphi/dy_i )
            col = k.tensors[:, :, b]  # (ne,2)
            flux = np.einsum("evk,ek->ev", grads, col) * fo_mean[a][:, None]
            contrib = -(areas / 3.0 * c0)[:, None] - areas[:, None] * flux
            rhs = np.zeros(mesh.n_nodes)
            np.add.at(rhs, tris.ravel(), contrib.ravel())
            sol = solve_spd(system.with_rhs(rhs), rel_tol)
            row.append(ScalarField(mesh, sol))
        rows.append(tuple(row))
    return tuple(rows)


def solve_cell(spec: UnitCellSpec, rel_tol: float = 1e-10) -> CellSolutionSet:
    """Mesh the cell and solve both corrector families plus the tensor."""
    mesh = generate_unit_cell_mesh(spec)
    k = isotropic_conductivity(mesh, {0: spec.k_matrix, 1: spec.k_inclusion})
    first = solve_first_order_cells(mesh, k, rel_tol)
    k_eff = compute_homogenized_tensor(mesh, k, first)
    if not _spd_2x2(k_eff):
        raise SpecError(f"cell {spec.cell_id}: homogenized tensor is not positive definite")
    second = solve_second_order_cells(mesh, k, first, k_eff, rel_tol)
    return CellSolutionSet(spec.cell_id, mesh, k, first, second, k_eff)


def _spd_2x2(t: np.ndarray) -> bool:
    return t[0, 0] > 0 and t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0] > 0


def voigt_reuss_bounds(spec: UnitCellSpec, mesh: Mesh2D) -> Tuple[float, float]:
    """Area-fraction harmonic and arithmetic means of the phase conductivities.

    Diagnostic only: the Dirichlet-corrector tensor is expected to stay
    between these classical bounds for isotropic two-phase cells.
    """
    frac = float(mesh.areas[mesh.phase == 1].sum() / mesh.areas.sum())
    km, ki = spec.k_matrix, spec.k_inclusion
    reuss = 1.0 / ((1.0 - frac) / km + frac / ki)
    voigt = (1.0 - frac) * km + frac * ki
    return reuss, voigt
