"""P1 finite element core: assembly, constraints, solve, recovery, norms.

Stiffness uses one-point quadrature (exact for piecewise-constant
conductivity), volume loads the 3-point edge-midpoint rule, Neumann terms
2-point Gauss per edge.  The solver is conjugate gradients with a diagonal
preconditioner; assembly and summation order are fixed by element order, so
identical inputs reproduce bit-identical results.
"""

from dataclasses import dataclass, replace
from typing import Callable, Mapping, Union

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ConstraintError, NonConvergenceError, SpecError
from .mesh import BoundaryKind, Mesh2D, locate_point

SourceLike = Union[None, float, Callable]


@dataclass
class ScalarField:
    """Nodal P1 field on a mesh."""

    mesh: Mesh2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"field has {self.values.shape} values for {self.mesh.n_nodes} nodes"
            )


@dataclass
class ConductivityField:
    """Per-element symmetric positive definite 2x2 conductivity tensors."""

    tensors: np.ndarray

    def __post_init__(self):
        self.tensors = np.ascontiguousarray(self.tensors, dtype=np.float64)
        if self.tensors.ndim != 3 or self.tensors.shape[1:] != (2, 2):
            raise SpecError("conductivity tensors must have shape (n_elements, 2, 2)")
        t = self.tensors
        if not np.allclose(t[:, 0, 1], t[:, 1, 0], rtol=1e-12, atol=1e-14):
            raise SpecError("conductivity tensors must be symmetric")
        trace = t[:, 0, 0] + t[:, 1, 1]
        det = t[:, 0, 0] * t[:, 1, 1] - t[:, 0, 1] * t[:, 1, 0]
        if not ((trace > 0) & (det > 0)).all():
            raise SpecError("conductivity tensors must be positive definite")


def isotropic_conductivity(mesh: Mesh2D, phase_values: Mapping[int, float]) -> ConductivityField:
    """Isotropic per-phase conductivity, e.g. {0: k_matrix, 1: k_inclusion}."""
    scalars = np.zeros(mesh.n_elements)
    seen = np.zeros(mesh.n_elements, dtype=bool)
    for tag, value in phase_values.items():
        mask = mesh.phase == tag
        scalars[mask] = value
        seen |= mask
    if not seen.all():
        missing = np.unique(mesh.phase[~seen])
        raise SpecError(f"no conductivity given for phase tags {missing.tolist()}")
    tensors = np.zeros((mesh.n_elements, 2, 2))
    tensors[:, 0, 0] = scalars
    tensors[:, 1, 1] = scalars
    return ConductivityField(tensors)


@dataclass
class SparseSystem:
    """Linear system with optional Dirichlet constraints attached."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_nodes: np.ndarray = None
    dirichlet_values: np.ndarray = None

    def __post_init__(self):
        if self.dirichlet_nodes is None:
            self.dirichlet_nodes = np.empty(0, dtype=np.int64)
            self.dirichlet_values = np.empty(0)

    def with_rhs(self, rhs):
        return replace(self, rhs=np.asarray(rhs, dtype=np.float64))


def assemble_stiffness(mesh: Mesh2D, conductivity: ConductivityField) -> SparseSystem:
    """Assemble the SPD stiffness matrix; RHS starts at zero."""
    if conductivity.tensors.shape[0] != mesh.n_elements:
        raise SpecError("conductivity field does not match the mesh")
    local = kernels.local_stiffness(mesh.areas, mesh.basis_grads, conductivity.tensors)
    tris = mesh.elements
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    mat = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)
    ).tocsr()
    return SparseSystem(mat, np.zeros(mesh.n_nodes))


def _evaluate(f: SourceLike, x, y):
    if f is None:
        return np.zeros_like(x)
    if callable(f):
        return np.broadcast_to(np.asarray(f(x, y), dtype=np.float64), x.shape).copy()
    return np.full_like(x, float(f))


def assemble_load(mesh: Mesh2D, source: SourceLike = None,
                  neumann_flux: SourceLike = None) -> np.ndarray:
    """Volume source plus prescribed boundary flux contributions."""
    b = np.zeros(mesh.n_nodes)
    if source is not None:
        p = mesh.nodes[mesh.elements]  # (ne,3,2)
        mid = 0.5 * (p + np.roll(p, -1, axis=1))  # midpoints of edges 01,12,20
        hv = _evaluate(source, mid[:, :, 0], mid[:, :, 1])  # (ne,3)
        w = mesh.areas / 6.0
        contrib = np.empty((mesh.n_elements, 3))
        contrib[:, 0] = w * (hv[:, 0] + hv[:, 2])
        contrib[:, 1] = w * (hv[:, 0] + hv[:, 1])
        contrib[:, 2] = w * (hv[:, 1] + hv[:, 2])
        np.add.at(b, mesh.elements.ravel(), contrib.ravel())
    if neumann_flux is not None:
        on = mesh.boundary_tags == BoundaryKind.NEUMANN
        edges = mesh.boundary_edges[on]
        if edges.size:
            p0 = mesh.nodes[edges[:, 0]]
            p1 = mesh.nodes[edges[:, 1]]
            length = np.hypot(*(p1 - p0).T)
            ts = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))
            acc0 = np.zeros(edges.shape[0])
            acc1 = np.zeros(edges.shape[0])
            for t in ts:
                g = p0 + t * (p1 - p0)
                q = _evaluate(neumann_flux, g[:, 0], g[:, 1])
                acc0 += q * (1.0 - t)
                acc1 += q * t
            np.add.at(b, edges[:, 0], 0.5 * length * acc0)
            np.add.at(b, edges[:, 1], 0.5 * length * acc1)
    return b


def apply_dirichlet(system: SparseSystem, nodes, values) -> SparseSystem:
    """Attach Dirichlet constraints; conflicting double constraints error out."""
    nodes = np.asarray(nodes, dtype=np.int64).ravel()
    values = np.broadcast_to(np.asarray(values, dtype=np.float64), nodes.shape)
    all_nodes = np.concatenate([system.dirichlet_nodes, nodes])
    all_values = np.concatenate([system.dirichlet_values, values])
    order = np.argsort(all_nodes, kind="stable")
    sn, sv = all_nodes[order], all_values[order]
    same = sn[1:] == sn[:-1]
    if np.any(same & (sv[1:] != sv[:-1])):
        bad = sn[1:][same & (sv[1:] != sv[:-1])]
        raise ConstraintError(f"conflicting Dirichlet values on nodes {np.unique(bad).tolist()}")
    keep = np.concatenate([[True], ~same])
    return replace(system, dirichlet_nodes=sn[keep], dirichlet_values=sv[keep])


def _pcg(A, b, rel_tol, max_iter):
    """Jacobi-preconditioned conjugate gradients with a true-residual check."""
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0.0, 0
    target = rel_tol * bnorm
    dinv = 1.0 / A.diagonal()
    r = b.copy()
    z = dinv * r
    p = z.copy()
    rz = r @ z
    it = 0
    while it < max_iter:
        if np.linalg.norm(r) <= target:
            r = b - A @ x  # recurrence drift check
            if np.linalg.norm(r) <= target:
                return x, np.linalg.norm(r) / bnorm, it
            z = dinv * r
            p = z.copy()
            rz = r @ z
        Ap = A @ p
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0.0:
            # search direction with nonpositive curvature: matrix is not SPD
            # (singular or indefinite), CG cannot proceed
            res = np.linalg.norm(b - A @ x)
            raise NonConvergenceError(
                f"PCG breakdown after {it} iterations (pᵀAp = {pAp:.3e}); "
                "system is not symmetric positive definite",
                residual=res / bnorm,
                iterations=it,
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_next = r @ z
        p = z + (rz_next / rz) * p
        rz = rz_next
        it += 1
    res = np.linalg.norm(b - A @ x)
    if res <= target:
        return x, res / bnorm, it
    raise NonConvergenceError(
        f"PCG stopped after {it} iterations at relative residual {res / bnorm:.3e} "
        f"(target {rel_tol:.3e})",
        residual=res / bnorm,
        iterations=it,
    )


def solve_spd(system: SparseSystem, rel_tol: float = 1e-10) -> np.ndarray:
    """Solve with symmetric elimination of Dirichlet constraints.

    Constrained entries of the solution carry the prescribed values exactly;
    the free block is solved by preconditioned CG capped at 50 iterations
    per free node.
    """
    n = system.matrix.shape[0]
    x = np.zeros(n)
    fixed = system.dirichlet_nodes
    x[fixed] = system.dirichlet_values
    free = np.setdiff1d(np.arange(n), fixed)
    if free.size == 0:
        return x
    A = system.matrix.tocsr()
    rows = A[free]
    b_free = system.rhs[free]
    if fixed.size:
        b_free = b_free - rows[:, fixed] @ system.dirichlet_values
    A_ff = rows[:, free].tocsr()
    sol, _, _ = _pcg(A_ff, b_free, rel_tol, 50 * free.size)
    x[free] = sol
    return x


def interpolate(field: ScalarField, p) -> float:
    """P1 interpolation at a point; continuous across shared edges."""
    elem, bary = locate_point(field.mesh, p)
    return float(bary @ field.values[field.mesh.elements[elem]])


def element_gradients(field: ScalarField) -> np.ndarray:
    """Constant gradient of the field on every element, (ne, 2)."""
    mesh = field.mesh
    return kernels.element_gradients(mesh.basis_grads, mesh.elements, field.values)


def recover_gradient(field: ScalarField) -> np.ndarray:
    """Area-weighted average of element gradients over each nodal patch."""
    mesh = field.mesh
    eg = element_gradients(field)
    sums, totals = kernels.accumulate_weighted(mesh.elements, mesh.areas, eg, mesh.n_nodes)
    return sums / totals[:, None]


def recover_gradient_by_subdomain(field: ScalarField) -> dict:
    """Per-subdomain recovery; interface nodes get one value per side.

    Returns {subdomain tag: (n_nodes, 2) array}, NaN at nodes not adjacent
    to that subdomain.
    """
    mesh = field.mesh
    if mesh.subdomain is None:
        raise SpecError("mesh has no subdomain tags")
    eg = element_gradients(field)
    out = {}
    for tag in np.unique(mesh.subdomain):
        mask = mesh.subdomain == tag
        sums, totals = kernels.accumulate_weighted(
            mesh.elements, mesh.areas, eg, mesh.n_nodes, mask
        )
        vals = np.full((mesh.n_nodes, 2), np.nan)
        has = totals > 0
        vals[has] = sums[has] / totals[has, None]
        out[int(tag)] = vals
    return out


@dataclass
class Norms:
    l2_diff: float
    h1_diff: float
    l2_first: float
    h1_first: float


def _l2_sq(mesh: Mesh2D, values: np.ndarray) -> float:
    v = values[mesh.elements]  # (ne,3)
    mid = 0.5 * (v + np.roll(v, -1, axis=1))
    return float(np.sum(mesh.areas / 3.0 * np.sum(mid * mid, axis=1)))


def _h1_sq(mesh: Mesh2D, values: np.ndarray) -> float:
    g = kernels.element_gradients(mesh.basis_grads, mesh.elements, values)
    return float(np.sum(mesh.areas * np.sum(g * g, axis=1)))


def norms(a: ScalarField, b: ScalarField) -> Norms:
    """L2 and H1-seminorm of (a - b) plus the norms of a, same mesh.

    The edge-midpoint rule is exact for squared P1 fields; the seminorm uses
    the piecewise-constant element gradients.
    """
    if a.mesh is not b.mesh and a.mesh.n_nodes != b.mesh.n_nodes:
        raise SpecError("norms require fields on the same mesh")
    mesh = a.mesh
    diff = a.values - b.values
    return Norms(
        l2_diff=np.sqrt(_l2_sq(mesh, diff)),
        h1_diff=np.sqrt(_h1_sq(mesh, diff)),
        l2_first=np.sqrt(_l2_sq(mesh, a.values)),
        h1_first=np.sqrt(_h1_sq(mesh, a.values)),
    )
