# cython: language_level=3
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()


def dijkstra_all_pairs(length):
    cdef double[:, ::1] w = np.ascontiguousarray(length, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    out = np.full((n, n), np.inf)
    cdef double[:, ::1] dist = out
    cdef unsigned char[::1] done = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t s, it, u, v
    cdef double best, nd, du
    for s in range(n):
        done[:] = 0
        dist[s, s] = 0.0
        for it in range(n):
            u = -1
            best = INFINITY
            for v in range(n):
                if not done[v] and dist[s, v] < best:
                    best = dist[s, v]
                    u = v
            if u < 0:
                break
            done[u] = 1
            du = dist[s, u]
            for v in range(n):
                if not done[v]:
                    nd = du + w[u, v]
                    if nd < dist[s, v]:
                        dist[s, v] = nd
    return out


def demean(X, codes, n_groups, double tol=1e-10, int max_sweeps=100):
    Xa = np.array(X, dtype=np.float64, order="F", copy=True)
    if Xa.ndim == 1:
        Xa = Xa[:, None]
    if not codes:
        return Xa, 0, 0.0
    cdef double[::1, :] x = Xa
    cdef Py_ssize_t n = x.shape[0], ncol = x.shape[1]
    cdef Py_ssize_t ndim = len(codes)
    cdef Py_ssize_t d, k, i, g
    cdef long[::1] code
    cdef double[::1] sums
    cdef double[::1] cnt
    cdef double change = 0.0, m
    cdef int sweeps = 0
    code_arrays = [np.ascontiguousarray(c, dtype=np.int_) for c in codes]
    count_arrays = []
    for c, ng in zip(code_arrays, n_groups):
        ca = np.bincount(c, minlength=ng).astype(np.float64)
        ca[ca == 0] = 1.0
        count_arrays.append(ca)
    while sweeps < max_sweeps:
        sweeps += 1
        change = 0.0
        for d in range(ndim):
            code = code_arrays[d]
            cnt = count_arrays[d]
            sums = np.zeros(cnt.shape[0])
            for k in range(ncol):
                sums[:] = 0.0
                for i in range(n):
                    sums[code[i]] += x[i, k]
                for g in range(cnt.shape[0]):
                    sums[g] /= cnt[g]
                    if fabs(sums[g]) > change:
                        change = fabs(sums[g])
                for i in range(n):
                    x[i, k] -= sums[code[i]]
        if ndim == 1 or change <= tol:
            break
    return Xa, sweeps, change
