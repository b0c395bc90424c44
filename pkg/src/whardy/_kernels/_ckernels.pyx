# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-cube kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow

cnp.import_array()


cdef inline double _combine(double acc, double v, int op) nogil:
    if op == 0:
        return acc + v
    if op == 1:
        return v if v > acc else acc
    return v if v < acc else acc


def _opcode(str op):
    if op == "sum":
        return 0
    if op == "max":
        return 1
    if op == "min":
        return 2
    raise KeyError(op)


def cube_reduce(values, int level, str op):
    cdef int code = _opcode(op)
    arr = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n_side = arr.shape[0]
    cdef Py_ssize_t m = 1 << level
    if m > n_side:
        raise ValueError(f"level {level} is finer than the grid ({n_side} samples)")
    cdef Py_ssize_t s = n_side // m
    cdef Py_ssize_t a, b, i, j
    cdef double acc
    cdef const double[::1] v1
    cdef const double[:, ::1] v2
    cdef double[::1] o1
    cdef double[:, ::1] o2
    if arr.ndim == 1:
        v1 = arr
        out = np.empty(m, dtype=np.float64)
        o1 = out
        with nogil:
            for a in range(m):
                acc = v1[a * s]
                for i in range(a * s + 1, (a + 1) * s):
                    acc = _combine(acc, v1[i], code)
                o1[a] = acc
        return out
    if arr.ndim == 2:
        v2 = arr
        out = np.empty((m, m), dtype=np.float64)
        o2 = out
        with nogil:
            for a in range(m):
                for b in range(m):
                    acc = v2[a * s, b * s]
                    for i in range(a * s, (a + 1) * s):
                        for j in range(b * s, (b + 1) * s):
                            if i == a * s and j == b * s:
                                continue
                            acc = _combine(acc, v2[i, j], code)
                    o2[a, b] = acc
        return out
    raise ValueError("only 1D and 2D grids are supported")


def expand_cubes(cube_values, Py_ssize_t n_side):
    arr = np.ascontiguousarray(cube_values, dtype=np.float64)
    cdef Py_ssize_t m = arr.shape[0]
    cdef Py_ssize_t s = n_side // m
    cdef Py_ssize_t a, b, i, j
    cdef double v
    cdef const double[::1] c1
    cdef const double[:, ::1] c2
    cdef double[::1] o1
    cdef double[:, ::1] o2
    if arr.ndim == 1:
        c1 = arr
        out = np.empty(n_side, dtype=np.float64)
        o1 = out
        with nogil:
            for a in range(m):
                v = c1[a]
                for i in range(a * s, (a + 1) * s):
                    o1[i] = v
        return out
    c2 = arr
    out = np.empty((n_side, n_side), dtype=np.float64)
    o2 = out
    with nogil:
        for a in range(m):
            for i in range(a * s, (a + 1) * s):
                for b in range(m):
                    v = c2[a, b]
                    for j in range(b * s, (b + 1) * s):
                        o2[i, j] = v
    return out


def dyadic_maximal(values, int max_level, level_factors=None, int min_level=0):
    arr = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n_side = arr.shape[0]
    cdef int ndim = arr.ndim
    out = np.zeros_like(arr)
    cdef double[::1] o1
    cdef double[:, ::1] o2
    cdef double[::1] a1
    cdef double[:, ::1] a2
    cdef Py_ssize_t a, b, i, j, s, m
    cdef double fac, cells, val
    cdef int level
    if ndim == 1:
        o1 = out
    else:
        o2 = out
    for level in range(min_level, max_level + 1):
        m = 1 << level
        s = n_side // m
        cells = <double>(s ** ndim)
        fac = 1.0 if level_factors is None else float(level_factors[level])
        sums = cube_reduce(arr, level, "sum")
        if ndim == 1:
            a1 = sums
            with nogil:
                for a in range(m):
                    val = fac * a1[a] / cells
                    for i in range(a * s, (a + 1) * s):
                        if val > o1[i]:
                            o1[i] = val
        else:
            a2 = sums
            with nogil:
                for a in range(m):
                    for i in range(a * s, (a + 1) * s):
                        for b in range(m):
                            val = fac * a2[a, b] / cells
                            for j in range(b * s, (b + 1) * s):
                                if val > o2[i, j]:
                                    o2[i, j] = val
    return out


def pair_smoothness(kernel, double spacing, int stride, double eps):
    arr = np.ascontiguousarray(kernel, dtype=np.float64)
    cdef int n = arr.ndim
    cdef Py_ssize_t n_side = arr.shape[0]
    idx = np.arange(0, n_side, stride)
    centred = np.where(idx > n_side // 2, idx - n_side, idx) * spacing
    if n == 1:
        pts_np = centred[:, None].astype(np.float64)
        vals_np = arr[idx]
        flat_np = idx.astype(np.int64)
    else:
        g0, g1 = np.meshgrid(centred, centred, indexing="ij")
        pts_np = np.ascontiguousarray(np.stack([g0.ravel(), g1.ravel()], axis=1), dtype=np.float64)
        vals_np = np.ascontiguousarray(arr[np.ix_(idx, idx)].ravel())
        i0, i1 = np.meshgrid(idx, idx, indexing="ij")
        flat_np = (i0 * n_side + i1).ravel().astype(np.int64)
    rz_np = np.sqrt((pts_np ** 2).sum(axis=1))
    keep = rz_np > 0
    cdef double[:, ::1] pts = np.ascontiguousarray(pts_np[keep])
    cdef double[::1] vals = np.ascontiguousarray(vals_np[keep], dtype=np.float64)
    cdef double[::1] rz = np.ascontiguousarray(rz_np[keep])
    cdef long long[::1] flat = np.ascontiguousarray(flat_np[keep])
    cdef Py_ssize_t npts = rz.shape[0]
    cdef Py_ssize_t a, b, c
    cdef double d, dd, q, best = 0.0
    cdef Py_ssize_t bi = -1, bj = -1
    with nogil:
        for a in range(npts):
            for b in range(npts):
                dd = 0.0
                for c in range(n):
                    dd = dd + (pts[a, c] - pts[b, c]) * (pts[a, c] - pts[b, c])
                d = sqrt(dd)
                if d <= 0.0 or d > 0.5 * rz[a]:
                    continue
                q = fabs(vals[a] - vals[b]) * pow(rz[a], n + eps) / pow(d, eps)
                if q > best:
                    best = q
                    bi = a
                    bj = b
    if bi < 0:
        return 0.0, -1, -1
    return float(best), int(flat[bi]), int(flat[bj])
