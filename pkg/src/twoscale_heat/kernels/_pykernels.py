"""Vectorized numpy fallback for the per-element kernels.

Same signatures as the compiled module.  All routines are deterministic:
summation order is fixed by the element ordering of the mesh.
"""

import numpy as np


def tri_geometry(nodes, tris):
    """Areas and P1 basis gradients for every triangle.

    Returns (areas (ne,), grads (ne,3,2)) with grads[e, a] the constant
    gradient of the hat function of local vertex a on element e.
    """
    p = nodes[tris]  # (ne,3,2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    twice_area = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    areas = 0.5 * twice_area
    grads = np.empty((tris.shape[0], 3, 2))
    grads[:, 0, 0] = p[:, 1, 1] - p[:, 2, 1]
    grads[:, 0, 1] = p[:, 2, 0] - p[:, 1, 0]
    grads[:, 1, 0] = p[:, 2, 1] - p[:, 0, 1]
    grads[:, 1, 1] = p[:, 0, 0] - p[:, 2, 0]
    grads[:, 2, 0] = p[:, 0, 1] - p[:, 1, 1]
    grads[:, 2, 1] = p[:, 1, 0] - p[:, 0, 0]
    grads /= twice_area[:, None, None]
    return areas, grads


def local_stiffness(areas, grads, tensors):
    """Local 3x3 stiffness blocks: area * grad_a . K . grad_b."""
    kg = np.einsum("ekl,ebl->ebk", tensors, grads)
    return np.einsum("e,eak,ebk->eab", areas, grads, kg)


def element_gradients(grads, tris, values):
    """Constant gradient of a P1 field on every element, (ne,2)."""
    return np.einsum("eak,ea->ek", grads, values[tris])


def accumulate_weighted(tris, weights, elem_values, n_nodes, mask=None):
    """Scatter weighted element values onto their vertices.

    Returns (sums (n_nodes, m), weight_totals (n_nodes,)).  Used for
    area-weighted nodal averaging of element quantities.
    """
    elem_values = np.atleast_2d(elem_values.T).T  # (ne, m)
    if mask is not None:
        tris = tris[mask]
        weights = weights[mask]
        elem_values = elem_values[mask]
    m = elem_values.shape[1]
    sums = np.zeros((n_nodes, m))
    totals = np.zeros(n_nodes)
    idx = tris.ravel()
    np.add.at(totals, idx, np.repeat(weights, 3))
    contrib = weights[:, None] * elem_values  # (ne, m)
    np.add.at(sums, idx, np.repeat(contrib, 3, axis=0))
    return sums, totals


def locate_points(nodes, tris, bin_starts, bin_items, nbx, nby, x0, y0, bw, bh,
                  pts, elem_tags=None, required_tags=None, tol=1e-12):
    """Locate points in a triangulation via a background bin grid.

    Candidates inside a bin are stored ascending by element index, so the
    first accepted candidate is the lowest-index containing element (ties on
    shared edges resolve deterministically).  Points with no containing
    element get element -1.  If ``required_tags`` is given, only elements
    whose tag matches are accepted for that point.
    """
    npts = pts.shape[0]
    out_elem = np.full(npts, -1, dtype=np.int64)
    out_bary = np.zeros((npts, 3))

    bx = np.clip(((pts[:, 0] - x0) / bw).astype(np.int64), 0, nbx - 1)
    by = np.clip(((pts[:, 1] - y0) / bh).astype(np.int64), 0, nby - 1)
    bins = by * nbx + bx
    cursor = bin_starts[bins].copy()
    ends = bin_starts[bins + 1]

    pending = np.arange(npts)
    while pending.size:
        has = cursor[pending] < ends[pending]
        pending = pending[has]
        if not pending.size:
            break
        cand = bin_items[cursor[pending]]
        tri = tris[cand]
        a = nodes[tri[:, 0]]
        b = nodes[tri[:, 1]]
        c = nodes[tri[:, 2]]
        p = pts[pending]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])
        w0 = ((b[:, 0] - p[:, 0]) * (c[:, 1] - p[:, 1]) - (c[:, 0] - p[:, 0]) * (b[:, 1] - p[:, 1])) / det
        w1 = ((c[:, 0] - p[:, 0]) * (a[:, 1] - p[:, 1]) - (a[:, 0] - p[:, 0]) * (c[:, 1] - p[:, 1])) / det
        w2 = 1.0 - w0 - w1
        ok = (w0 >= -tol) & (w1 >= -tol) & (w2 >= -tol)
        if required_tags is not None:
            ok &= elem_tags[cand] == required_tags[pending]
        hit = pending[ok]
        out_elem[hit] = cand[ok]
        out_bary[hit, 0] = w0[ok]
        out_bary[hit, 1] = w1[ok]
        out_bary[hit, 2] = w2[ok]
        cursor[pending] += 1
        pending = pending[~ok]
    return out_elem, out_bary
