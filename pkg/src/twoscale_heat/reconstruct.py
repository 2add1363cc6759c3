"""Two-scale reconstruction of the temperature field.

order 0: T0(x)
order 1: order 0 + eps_s * N_a(y) dT0/dx_a
order 2: order 1 + eps_s^2 * N_ab(y) d2T0/dx_a dx_b

with y the cell coordinate of x inside its subdomain.  The correctors
vanish on the cell lattice lines, so all three orders coincide with T0
there.  Macro derivatives are interpolated with the owning subdomain's
recovered values; ownership of interface points goes to the subdomain
whose far (top/right) boundary carries them.
"""

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .cells import CellSolutionSet
from .errors import MeshError, OutOfDomainError
from .fem import ScalarField
from .macro import MacroDerivatives
from .mesh import Mesh2D, Rect, SubdomainSpec, locate_many, owning_subdomain


@dataclass
class MultiscaleSolution:
    """Everything needed to evaluate the reconstructed field anywhere."""

    domain: Rect
    subdomains: List[SubdomainSpec]
    cells: Dict[str, CellSolutionSet]
    t0: ScalarField
    derivatives: MacroDerivatives


def map_to_cell_coords(p, subdomain: SubdomainSpec) -> np.ndarray:
    """Cell coordinate in [0,1]^2 of a point inside the subdomain.

    A coordinate that lands exactly on the subdomain's far boundary maps to
    1.0 rather than wrapping to 0.
    """
    pts = np.asarray(p, dtype=np.float64).reshape(1, 2)
    return _cell_coords(pts, subdomain)[0]


def _cell_coords(pts, sd: SubdomainSpec) -> np.ndarray:
    r = sd.region
    t1 = (pts[:, 0] - r.x0) / sd.epsilon
    t2 = (pts[:, 1] - r.y0) / sd.epsilon
    y1 = t1 - np.floor(t1)
    y2 = t2 - np.floor(t2)
    y1[(pts[:, 0] == r.x1) & (y1 == 0.0)] = 1.0
    y2[(pts[:, 1] == r.y1) & (y2 == 0.0)] = 1.0
    return np.column_stack([y1, y2])


def _interp(values, tris, bary):
    return np.einsum("pv,pv->p", bary, values[tris])


def _sample(sol: MultiscaleSolution, pts: np.ndarray):
    """Order-0/1/2 reconstructed values at the given points."""
    pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
    own = owning_subdomain(sol.domain, sol.subdomains, pts)
    if (own < 0).any():
        bad = pts[own < 0][0]
        raise OutOfDomainError(f"point {tuple(bad)} lies outside the domain")
    mesh = sol.t0.mesh
    elems, bary = locate_many(mesh, pts, require_tags=own.astype(np.int32))
    if (elems < 0).any():
        bad = pts[elems < 0][0]
        raise MeshError(f"no macro element of the owning subdomain contains {tuple(bad)}")
    tris = mesh.elements[elems]
    v0 = np.einsum("pv,pv->p", bary, sol.t0.values[tris])
    corr1 = np.zeros(pts.shape[0])
    corr2 = np.zeros(pts.shape[0])
    for s, sd in enumerate(sol.subdomains):
        mask = own == s
        if not mask.any():
            continue
        cell = sol.cells[sd.cell_id]
        b = bary[mask]
        t = tris[mask]
        grad = np.einsum("pv,pvk->pk", b, sol.derivatives.gradient[s][t])
        hess = np.einsum("pv,pvkl->pkl", b, sol.derivatives.hessian[s][t])
        y = _cell_coords(pts[mask], sd)
        celems, cbary = locate_many(cell.mesh, y)
        if (celems < 0).any():
            raise MeshError("cell coordinate fell outside the unit cell mesh")
        ctris = cell.mesh.elements[celems]
        first = sum(
            _interp(cell.first_order[a].values, ctris, cbary) * grad[:, a]
            for a in range(2)
        )
        second = sum(
            _interp(cell.second_order[a][b2].values, ctris, cbary) * hess[:, a, b2]
            for a in range(2)
            for b2 in range(2)
        )
        corr1[mask] = sd.epsilon * first
        corr2[mask] = sd.epsilon**2 * second
    v1 = v0 + corr1
    v2 = v1 + corr2
    return v0, v1, v2


def evaluate(sol: MultiscaleSolution, x, order: int) -> float:
    """Reconstructed temperature at one point, truncated at the given order."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    vals = _sample(sol, np.asarray(x, dtype=np.float64).reshape(1, 2))
    return float(vals[order][0])


def sample_onto_mesh(sol: MultiscaleSolution, mesh: Mesh2D, order: int) -> ScalarField:
    """Reconstructed field sampled at every node of a target mesh."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    vals = _sample(sol, mesh.nodes)
    return ScalarField(mesh, vals[order])


def sample_all_orders(sol: MultiscaleSolution, mesh: Mesh2D):
    """All three truncation orders at once (shares the location work)."""
    v0, v1, v2 = _sample(sol, mesh.nodes)
    return ScalarField(mesh, v0), ScalarField(mesh, v1), ScalarField(mesh, v2)
