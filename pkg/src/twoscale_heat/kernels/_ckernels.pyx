# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-element kernels (assembly, recovery scatter, point location).

Mirrors the numpy fallback in ``_pykernels``; keep arithmetic expressions in
sync so the two backends agree to rounding.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def tri_geometry(const double[:, ::1] nodes, const int[:, ::1] tris):
    cdef Py_ssize_t ne = tris.shape[0]
    cdef cnp.ndarray[double, ndim=1] areas_arr = np.empty(ne)
    cdef cnp.ndarray[double, ndim=3] grads_arr = np.empty((ne, 3, 2))
    cdef double[::1] areas = areas_arr
    cdef double[:, :, ::1] grads = grads_arr
    cdef Py_ssize_t e
    cdef int i0, i1, i2
    cdef double x0, y0, x1, y1, x2, y2, ta
    for e in range(ne):
        i0 = tris[e, 0]; i1 = tris[e, 1]; i2 = tris[e, 2]
        x0 = nodes[i0, 0]; y0 = nodes[i0, 1]
        x1 = nodes[i1, 0]; y1 = nodes[i1, 1]
        x2 = nodes[i2, 0]; y2 = nodes[i2, 1]
        ta = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        areas[e] = 0.5 * ta
        grads[e, 0, 0] = (y1 - y2) / ta
        grads[e, 0, 1] = (x2 - x1) / ta
        grads[e, 1, 0] = (y2 - y0) / ta
        grads[e, 1, 1] = (x0 - x2) / ta
        grads[e, 2, 0] = (y0 - y1) / ta
        grads[e, 2, 1] = (x1 - x0) / ta
    return areas_arr, grads_arr


def local_stiffness(const double[::1] areas, const double[:, :, ::1] grads, const double[:, :, ::1] tensors):
    cdef Py_ssize_t ne = areas.shape[0]
    cdef cnp.ndarray[double, ndim=3] out_arr = np.empty((ne, 3, 3))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, a, b
    cdef double k00, k01, k10, k11, area
    cdef double gax, gay, kgx, kgy
    for e in range(ne):
        area = areas[e]
        k00 = tensors[e, 0, 0]; k01 = tensors[e, 0, 1]
        k10 = tensors[e, 1, 0]; k11 = tensors[e, 1, 1]
        for b in range(3):
            gax = grads[e, b, 0]; gay = grads[e, b, 1]
            kgx = k00 * gax + k01 * gay
            kgy = k10 * gax + k11 * gay
            for a in range(3):
                out[e, a, b] = area * (grads[e, a, 0] * kgx + grads[e, a, 1] * kgy)
    return out_arr


def element_gradients(const double[:, :, ::1] grads, const int[:, ::1] tris, const double[::1] values):
    cdef Py_ssize_t ne = tris.shape[0]
    cdef cnp.ndarray[double, ndim=2] out_arr = np.empty((ne, 2))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e
    cdef double v0, v1, v2
    for e in range(ne):
        v0 = values[tris[e, 0]]; v1 = values[tris[e, 1]]; v2 = values[tris[e, 2]]
        out[e, 0] = grads[e, 0, 0] * v0 + grads[e, 1, 0] * v1 + grads[e, 2, 0] * v2
        out[e, 1] = grads[e, 0, 1] * v0 + grads[e, 1, 1] * v1 + grads[e, 2, 1] * v2
    return out_arr


def accumulate_weighted(const int[:, ::1] tris, const double[::1] weights, elem_values, Py_ssize_t n_nodes, mask=None):
    values = np.atleast_2d(np.asarray(elem_values, dtype=np.float64).T).T
    cdef const double[:, ::1] vals = np.ascontiguousarray(values)
    cdef Py_ssize_t ne = tris.shape[0]
    cdef Py_ssize_t m = vals.shape[1]
    cdef cnp.ndarray[double, ndim=2] sums_arr = np.zeros((n_nodes, m))
    cdef cnp.ndarray[double, ndim=1] totals_arr = np.zeros(n_nodes)
    cdef double[:, ::1] sums = sums_arr
    cdef double[::1] totals = totals_arr
    cdef const cnp.uint8_t[::1] use
    cdef bint has_mask = mask is not None
    if has_mask:
        use = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t e, a, j
    cdef int node
    cdef double w
    for e in range(ne):
        if has_mask and not use[e]:
            continue
        w = weights[e]
        for a in range(3):
            node = tris[e, a]
            totals[node] += w
            for j in range(m):
                sums[node, j] += w * vals[e, j]
    return sums_arr, totals_arr


def locate_points(const double[:, ::1] nodes, const int[:, ::1] tris,
                  const long long[::1] bin_starts, const int[::1] bin_items,
                  Py_ssize_t nbx, Py_ssize_t nby, double x0, double y0, double bw, double bh,
                  const double[:, ::1] pts, elem_tags=None, required_tags=None, double tol=1e-12):
    cdef Py_ssize_t npts = pts.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_elem_arr = np.full(npts, -1, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=2] out_bary_arr = np.zeros((npts, 3))
    cdef cnp.int64_t[::1] out_elem = out_elem_arr
    cdef double[:, ::1] out_bary = out_bary_arr
    cdef bint tagged = required_tags is not None
    cdef const int[::1] tags
    cdef const int[::1] req
    if tagged:
        tags = np.ascontiguousarray(elem_tags, dtype=np.int32)
        req = np.ascontiguousarray(required_tags, dtype=np.int32)
    cdef Py_ssize_t p, bx, by, s
    cdef long long start, end
    cdef int cand, i0, i1, i2
    cdef double px, py, ax, ay, bx_, by_, cx, cy, det, w0, w1, w2
    for p in range(npts):
        px = pts[p, 0]; py = pts[p, 1]
        bx = <Py_ssize_t>((px - x0) / bw)
        if bx < 0: bx = 0
        if bx > nbx - 1: bx = nbx - 1
        by = <Py_ssize_t>((py - y0) / bh)
        if by < 0: by = 0
        if by > nby - 1: by = nby - 1
        start = bin_starts[by * nbx + bx]
        end = bin_starts[by * nbx + bx + 1]
        for s in range(start, end):
            cand = bin_items[s]
            if tagged and tags[cand] != req[p]:
                continue
            i0 = tris[cand, 0]; i1 = tris[cand, 1]; i2 = tris[cand, 2]
            ax = nodes[i0, 0]; ay = nodes[i0, 1]
            bx_ = nodes[i1, 0]; by_ = nodes[i1, 1]
            cx = nodes[i2, 0]; cy = nodes[i2, 1]
            det = (bx_ - ax) * (cy - ay) - (cx - ax) * (by_ - ay)
            w0 = ((bx_ - px) * (cy - py) - (cx - px) * (by_ - py)) / det
            if w0 < -tol:
                continue
            w1 = ((cx - px) * (ay - py) - (ax - px) * (cy - py)) / det
            if w1 < -tol:
                continue
            w2 = 1.0 - w0 - w1
            if w2 < -tol:
                continue
            out_elem[p] = cand
            out_bary[p, 0] = w0
            out_bary[p, 1] = w1
            out_bary[p, 2] = w2
            break
    return out_elem_arr, out_bary_arr
