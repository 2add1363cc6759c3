"""Meshes and geometry for the two-scale solver.

Three structured triangle meshes are used: the unit-cell mesh on (0,1)^2,
the macro mesh over the whole domain, and the fine reference mesh that
resolves every inclusion.  All of them split squares along the lower-left
to upper-right diagonal so that repeated runs are bit-identical.
"""

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import NamedTuple, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .errors import MeshError, OutOfDomainError, SpecError


class Point2(NamedTuple):
    x: float
    y: float


class BoundaryKind(IntEnum):
    DIRICHLET = 0
    NEUMANN = 1


SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise SpecError(f"degenerate rectangle {self}")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def area(self):
        return self.width * self.height

    def contains(self, x, y, tol=0.0):
        return (x >= self.x0 - tol) & (x <= self.x1 + tol) & (y >= self.y0 - tol) & (y <= self.y1 + tol)


@dataclass(frozen=True)
class Inclusion:
    """Single inclusion centered in the unit cell, circle or axis-aligned square.

    ``size`` is the radius for circles and the full side length for squares.
    ``size == 0`` or kind "none" means a homogeneous cell.
    """

    kind: str = "none"
    center: tuple = (0.5, 0.5)
    size: float = 0.0

    def validate(self):
        if self.kind not in ("circle", "square", "none"):
            raise SpecError(f"unknown inclusion kind {self.kind!r}")
        if self.size < 0:
            raise SpecError("inclusion size must be nonnegative")
        if self.kind == "none" or self.size == 0.0:
            return
        cx, cy = self.center
        half = self.size if self.kind == "circle" else 0.5 * self.size
        margin = min(cx, cy, 1.0 - cx, 1.0 - cy)
        if half >= margin:
            raise SpecError(
                f"inclusion ({self.kind}, center {self.center}, size {self.size}) "
                "touches or crosses the unit-cell boundary"
            )

    def contains(self, y1, y2):
        """Boolean mask for cell-coordinate points inside the inclusion."""
        if self.kind == "none" or self.size == 0.0:
            return np.zeros(np.shape(y1), dtype=bool)
        cx, cy = self.center
        if self.kind == "circle":
            return (y1 - cx) ** 2 + (y2 - cy) ** 2 < self.size**2
        half = 0.5 * self.size
        return (np.abs(y1 - cx) < half) & (np.abs(y2 - cy) < half)


@dataclass(frozen=True)
class UnitCellSpec:
    """Geometry and conductivities of one periodic unit cell.

    Conductivities are isotropic per phase and must already be in units
    consistent with the domain lengths (the config layer converts
    W/(m K) to W/(cm K) for cm-sized domains).
    """

    cell_id: str
    divisions: int
    inclusion: Inclusion
    k_matrix: float
    k_inclusion: float

    def validate(self):
        if self.divisions < 2:
            raise SpecError(f"cell {self.cell_id}: divisions must be >= 2")
        if self.k_matrix <= 0 or self.k_inclusion <= 0:
            raise SpecError(f"cell {self.cell_id}: conductivities must be positive")
        self.inclusion.validate()


@dataclass(frozen=True)
class SubdomainSpec:
    """One rectangular subdomain with its cell id and period length."""

    region: Rect
    cell_id: str
    epsilon: float

    def validate(self):
        if self.epsilon <= 0:
            raise SpecError(f"subdomain {self.region}: epsilon must be positive")
        for side in (self.region.width, self.region.height):
            periods = side / self.epsilon
            if abs(periods - round(periods)) > 1e-9 * max(1.0, periods):
                raise SpecError(
                    f"subdomain {self.region}: side {side} is not an integer "
                    f"multiple of epsilon={self.epsilon}"
                )


@dataclass
class _BinIndex:
    starts: np.ndarray
    items: np.ndarray
    nbx: int
    nby: int
    x0: float
    y0: float
    bw: float
    bh: float


@dataclass
class Mesh2D:
    """Conforming triangle mesh with per-element tags.

    ``phase`` is 0 for matrix material and 1 inside an inclusion;
    ``subdomain`` (present on macro and fine meshes) is the index into the
    subdomain list.  Arrays are frozen after construction.
    """

    nodes: np.ndarray
    elements: np.ndarray
    phase: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    subdomain: Optional[np.ndarray] = None

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int32)
        self.phase = np.ascontiguousarray(self.phase, dtype=np.int32)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int32)
        self.boundary_tags = np.ascontiguousarray(self.boundary_tags, dtype=np.int32)
        if self.subdomain is not None:
            self.subdomain = np.ascontiguousarray(self.subdomain, dtype=np.int32)
        for arr in (self.nodes, self.elements, self.phase, self.boundary_edges,
                    self.boundary_tags, self.subdomain):
            if arr is not None:
                arr.flags.writeable = False

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @cached_property
    def areas(self):
        areas, grads = kernels.tri_geometry(self.nodes, self.elements)
        self.__dict__["basis_grads"] = grads
        return areas

    @cached_property
    def basis_grads(self):
        areas, grads = kernels.tri_geometry(self.nodes, self.elements)
        self.__dict__["areas"] = areas
        return grads

    @cached_property
    def centroids(self):
        return self.nodes[self.elements].mean(axis=1)

    @cached_property
    def dirichlet_nodes(self):
        edges = self.boundary_edges[self.boundary_tags == BoundaryKind.DIRICHLET]
        return np.unique(edges)

    @cached_property
    def _bins(self):
        nodes = self.nodes
        xmin, ymin = nodes.min(axis=0)
        xmax, ymax = nodes.max(axis=0)
        width = max(xmax - xmin, 1e-300)
        height = max(ymax - ymin, 1e-300)
        h_est = np.sqrt(2.0 * width * height / self.n_elements)
        nbx = max(1, int(round(width / h_est)))
        nby = max(1, int(round(height / h_est)))
        bw = width / nbx
        bh = height / nby
        p = self.nodes[self.elements]
        ex0 = np.clip(((p[:, :, 0].min(axis=1) - xmin) / bw).astype(np.int64), 0, nbx - 1)
        ex1 = np.clip(((p[:, :, 0].max(axis=1) - xmin) / bw).astype(np.int64), 0, nbx - 1)
        ey0 = np.clip(((p[:, :, 1].min(axis=1) - ymin) / bh).astype(np.int64), 0, nby - 1)
        ey1 = np.clip(((p[:, :, 1].max(axis=1) - ymin) / bh).astype(np.int64), 0, nby - 1)
        spans_x = ex1 - ex0 + 1
        spans_y = ey1 - ey0 + 1
        counts = spans_x * spans_y
        total = int(counts.sum())
        elem_ids = np.repeat(np.arange(self.n_elements, dtype=np.int64), counts)
        # bin coordinates for every (element, overlapped bin) pair
        offsets = np.concatenate([[0], np.cumsum(counts)])
        local = np.arange(total, dtype=np.int64) - offsets[elem_ids]
        sx = spans_x[elem_ids]
        bx = ex0[elem_ids] + local % sx
        by = ey0[elem_ids] + local // sx
        bin_ids = by * nbx + bx
        order = np.lexsort((elem_ids, bin_ids))
        bin_sorted = bin_ids[order]
        items = elem_ids[order].astype(np.int32)
        starts = np.zeros(nbx * nby + 1, dtype=np.int64)
        np.add.at(starts, bin_sorted + 1, 1)
        starts = np.cumsum(starts)
        return _BinIndex(starts, items, nbx, nby, float(xmin), float(ymin), bw, bh)

    def validate(self, expected_area=None, rel_tol=1e-10):
        """Structural checks: positive areas, conforming edges, labeled boundary."""
        if not (self.areas > 0).all():
            raise MeshError("mesh has non-positive element areas (orientation)")
        nn = self.n_nodes
        e = self.elements.astype(np.int64)
        pairs = np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]])
        keys = pairs.min(axis=1) * nn + pairs.max(axis=1)
        uniq, counts = np.unique(keys, return_counts=True)
        if counts.max(initial=0) > 2:
            raise MeshError("an edge is shared by more than two elements")
        be = self.boundary_edges.astype(np.int64)
        bkeys = np.sort(be.min(axis=1) * nn + be.max(axis=1))
        open_keys = np.sort(uniq[counts == 1])
        if not np.array_equal(bkeys, open_keys):
            raise MeshError("boundary edge list does not match the mesh boundary")
        if expected_area is not None:
            total = self.areas.sum()
            if abs(total - expected_area) > rel_tol * expected_area:
                raise MeshError(
                    f"element areas sum to {total!r}, expected {expected_area!r}"
                )


def _structured_grid(rect, nx, ny):
    """Nodes and elements of a structured triangulation of a rectangle.

    Node (i, j) has index j*(nx+1) + i; each square splits along the
    lower-left to upper-right diagonal into (ll, lr, ur) and (ll, ur, ul),
    both counterclockwise.
    """
    xs = rect.x0 + np.arange(nx + 1) * rect.width / nx
    ys = rect.y0 + np.arange(ny + 1) * rect.height / ny
    xg, yg = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([xg.ravel(), yg.ravel()])
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (jj * (nx + 1) + ii).ravel()
    v10 = v00 + 1
    v11 = v00 + nx + 2
    v01 = v00 + nx + 1
    elements = np.empty((2 * nx * ny, 3), dtype=np.int32)
    elements[0::2] = np.column_stack([v00, v10, v11])
    elements[1::2] = np.column_stack([v00, v11, v01])
    return nodes, elements


def _boundary_edges(nx, ny, neumann_sides=()):
    """Boundary edge list in counterclockwise order: bottom, right, top, left."""
    idx = lambda i, j: j * (nx + 1) + i
    edges = []
    sides = []
    for i in range(nx):
        edges.append((idx(i, 0), idx(i + 1, 0)))
        sides.append("bottom")
    for j in range(ny):
        edges.append((idx(nx, j), idx(nx, j + 1)))
        sides.append("right")
    for i in range(nx - 1, -1, -1):
        edges.append((idx(i + 1, ny), idx(i, ny)))
        sides.append("top")
    for j in range(ny - 1, -1, -1):
        edges.append((idx(0, j + 1), idx(0, j)))
        sides.append("left")
    unknown = set(neumann_sides) - set(SIDES)
    if unknown:
        raise SpecError(f"unknown boundary side names: {sorted(unknown)}")
    tags = np.array(
        [BoundaryKind.NEUMANN if s in neumann_sides else BoundaryKind.DIRICHLET for s in sides],
        dtype=np.int32,
    )
    return np.array(edges, dtype=np.int32), tags


def generate_unit_cell_mesh(spec: UnitCellSpec) -> Mesh2D:
    """Structured mesh of the unit cell (0,1)^2 with phase tags by centroid."""
    spec.validate()
    n = spec.divisions
    nodes, elements = _structured_grid(Rect(0.0, 0.0, 1.0, 1.0), n, n)
    centroids = nodes[elements].mean(axis=1)
    phase = spec.inclusion.contains(centroids[:, 0], centroids[:, 1]).astype(np.int32)
    edges, tags = _boundary_edges(n, n)
    return Mesh2D(nodes, elements, phase, edges, tags)


def _validate_tiling(domain: Rect, subdomains: Sequence[SubdomainSpec]):
    if not subdomains:
        raise SpecError("at least one subdomain is required")
    total = 0.0
    for sd in subdomains:
        sd.validate()
        r = sd.region
        if r.x0 < domain.x0 - 1e-12 or r.x1 > domain.x1 + 1e-12 \
                or r.y0 < domain.y0 - 1e-12 or r.y1 > domain.y1 + 1e-12:
            raise SpecError(f"subdomain {r} extends outside the domain {domain}")
        total += r.area
    for i, a in enumerate(subdomains):
        for b in subdomains[i + 1:]:
            ra, rb = a.region, b.region
            ox = min(ra.x1, rb.x1) - max(ra.x0, rb.x0)
            oy = min(ra.y1, rb.y1) - max(ra.y0, rb.y0)
            if ox > 1e-12 and oy > 1e-12:
                raise SpecError(f"subdomains {ra} and {rb} overlap")
    if abs(total - domain.area) > 1e-10 * domain.area:
        raise SpecError(
            f"subdomain areas sum to {total}, domain area is {domain.area}: not a tiling"
        )


def _tag_subdomains(centroids, subdomains):
    tags = np.full(centroids.shape[0], -1, dtype=np.int32)
    x, y = centroids[:, 0], centroids[:, 1]
    for s, sd in enumerate(subdomains):
        r = sd.region
        mask = (tags < 0) & (x > r.x0) & (x < r.x1) & (y > r.y0) & (y < r.y1)
        tags[mask] = s
    if (tags < 0).any():
        raise MeshError("some elements fall outside every subdomain")
    return tags


def generate_macro_mesh(domain: Rect, subdomains: Sequence[SubdomainSpec],
                        resolution: int, neumann_sides=()) -> Mesh2D:
    """Structured mesh of the whole domain, tagged by subdomain.

    ``resolution`` is the element-pair count per unit length; subdomain
    interfaces must land on grid lines.
    """
    _validate_tiling(domain, subdomains)
    if resolution < 1:
        raise SpecError("macro resolution must be a positive integer")
    nx = domain.width * resolution
    ny = domain.height * resolution
    if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
        raise MeshError(f"resolution {resolution} does not divide the domain sides")
    nx, ny = int(round(nx)), int(round(ny))
    for sd in subdomains:
        r = sd.region
        for coord, origin in ((r.x0, domain.x0), (r.x1, domain.x0), (r.y0, domain.y0), (r.y1, domain.y0)):
            t = (coord - origin) * resolution
            if abs(t - round(t)) > 1e-9:
                raise MeshError(
                    f"subdomain boundary at {coord} does not lie on a grid line "
                    f"of resolution {resolution}"
                )
    nodes, elements = _structured_grid(domain, nx, ny)
    centroids = nodes[elements].mean(axis=1)
    tags = _tag_subdomains(centroids, subdomains)
    edges, btags = _boundary_edges(nx, ny, neumann_sides)
    phase = np.zeros(elements.shape[0], dtype=np.int32)
    return Mesh2D(nodes, elements, phase, edges, btags, subdomain=tags)


def generate_fine_mesh(domain: Rect, subdomains: Sequence[SubdomainSpec],
                       cell_specs: Mapping[str, UnitCellSpec],
                       per_cell_divisions: int, neumann_sides=()) -> Mesh2D:
    """Reference mesh resolving every inclusion of every subdomain.

    One global spacing h = eps_min / per_cell_divisions is used so nodes
    coincide exactly at subdomain interfaces; each period of subdomain s is
    then the unit-cell mesh at eps_s/h divisions, scaled and shifted.

    Phase tags are inherited from each subdomain's unit-cell mesh whenever
    the per-period division count is an integer multiple of the cell's
    divisions (the lattices nest, so the containing cell element follows
    from integer arithmetic).  The reference then conducts through exactly
    the discrete inclusions the correctors were computed on.  Otherwise the
    inclusion is re-rasterized at the fine resolution, which leaves a
    staircase mismatch between the two meshes.
    """
    _validate_tiling(domain, subdomains)
    if per_cell_divisions < 1:
        raise SpecError("per_cell_divisions must be a positive integer")
    for sd in subdomains:
        if sd.cell_id not in cell_specs:
            raise SpecError(f"subdomain {sd.region} references unknown cell {sd.cell_id!r}")
        cell_specs[sd.cell_id].validate()
    eps_min = min(sd.epsilon for sd in subdomains)
    h = eps_min / per_cell_divisions
    for sd in subdomains:
        d = sd.epsilon / h
        if abs(d - round(d)) > 1e-9:
            raise MeshError(
                f"subdomain {sd.region}: period {sd.epsilon} is not an integer "
                f"multiple of the global spacing {h} (eps_min={eps_min}, "
                f"per_cell_divisions={per_cell_divisions}); interfaces would not conform"
            )
        r = sd.region
        for coord, origin in ((r.x0, domain.x0), (r.y0, domain.y0)):
            t = (coord - origin) / h
            if abs(t - round(t)) > 1e-9:
                raise MeshError(
                    f"subdomain corner at {coord} does not lie on the global "
                    f"fine grid of spacing {h}"
                )
    nx = int(round(domain.width / h))
    ny = int(round(domain.height / h))
    nodes, elements = _structured_grid(domain, nx, ny)
    centroids = nodes[elements].mean(axis=1)
    tags = _tag_subdomains(centroids, subdomains)
    phase = np.zeros(elements.shape[0], dtype=np.int32)
    e_idx = np.arange(elements.shape[0])
    tri = e_idx % 2
    gi = (e_idx // 2) % nx
    gj = (e_idx // 2) // nx
    cell_phase = {}
    for s, sd in enumerate(subdomains):
        mask = tags == s
        spec = cell_specs[sd.cell_id]
        r = sd.region
        d = int(round(sd.epsilon / h))
        n = spec.divisions
        if d % n == 0:
            if sd.cell_id not in cell_phase:
                cell_phase[sd.cell_id] = generate_unit_cell_mesh(spec).phase
            m = d // n
            ox = int(round((r.x0 - domain.x0) / h))
            oy = int(round((r.y0 - domain.y0) / h))
            i = (gi[mask] - ox) % d
            j = (gj[mask] - oy) % d
            ci = i // m
            cj = j // m
            # fine triangles never straddle a coarse diagonal; the coarse
            # half follows from the offsets within the coarse square
            in_lower = np.where(tri[mask] == 0, j % m <= i % m, j % m < i % m)
            ce = 2 * (cj * n + ci) + np.where(in_lower, 0, 1)
            phase[mask] = cell_phase[sd.cell_id][ce]
        else:
            t1 = (centroids[mask, 0] - r.x0) / sd.epsilon
            t2 = (centroids[mask, 1] - r.y0) / sd.epsilon
            y1 = t1 - np.floor(t1)
            y2 = t2 - np.floor(t2)
            phase[mask] = spec.inclusion.contains(y1, y2)
    edges, btags = _boundary_edges(nx, ny, neumann_sides)
    return Mesh2D(nodes, elements, phase, edges, btags, subdomain=tags)


def locate_many(mesh: Mesh2D, pts, require_tags=None, tol=1e-12):
    """Vectorized point location; element -1 marks points outside the mesh."""
    pts = np.ascontiguousarray(np.atleast_2d(pts), dtype=np.float64)
    b = mesh._bins
    req = None
    tags = None
    if require_tags is not None:
        req = np.ascontiguousarray(require_tags, dtype=np.int32)
        tags = mesh.subdomain
        if tags is None:
            raise ValueError("mesh has no subdomain tags to match against")
    elems, bary = kernels.locate_points(
        mesh.nodes, mesh.elements, b.starts, b.items, b.nbx, b.nby,
        b.x0, b.y0, b.bw, b.bh, pts, tags, req, tol,
    )
    # clamp tiny negative weights and renormalize
    np.clip(bary, 0.0, None, out=bary)
    s = bary.sum(axis=1)
    good = elems >= 0
    bary[good] /= s[good, None]
    return elems, bary


def locate_point(mesh: Mesh2D, p, require_tag=None, tol=1e-12):
    """Element index and barycentric coordinates of the element containing p.

    Points on shared edges resolve to the lowest element index.  Raises
    OutOfDomainError for points outside the mesh.
    """
    req = None if require_tag is None else np.array([require_tag], dtype=np.int32)
    elems, bary = locate_many(mesh, np.asarray(p, dtype=np.float64).reshape(1, 2), req, tol)
    if elems[0] < 0:
        raise OutOfDomainError(f"point {tuple(np.asarray(p))} is outside the mesh")
    return int(elems[0]), bary[0]


def owning_subdomain(domain: Rect, subdomains: Sequence[SubdomainSpec], pts):
    """Subdomain index owning each point.

    Each subdomain owns its interior plus its top and right edges; points on
    the domain's global bottom/left boundary belong to the adjacent
    subdomain.  Returns -1 for points outside the tiling.
    """
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    own = np.full(pts.shape[0], -1, dtype=np.int64)
    for s, sd in enumerate(subdomains):
        r = sd.region
        in_x = (x > r.x0) & (x <= r.x1)
        if r.x0 == domain.x0:
            in_x |= x == r.x0
        in_y = (y > r.y0) & (y <= r.y1)
        if r.y0 == domain.y0:
            in_y |= y == r.y0
        own[(own < 0) & in_x & in_y] = s
    return own
