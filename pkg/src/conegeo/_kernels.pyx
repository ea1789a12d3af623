# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see conegeo._fallback for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, fabs, isfinite, INFINITY, M_PI

cnp.import_array()


def cone_segments(nodes, double alpha, double eps):
    cdef const double[:, ::1] X = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0] - 1, i
    Q_arr = np.empty(n)
    through_arr = np.zeros(n, dtype=bool)
    dQ_arr = np.empty((n, 4))
    cdef double[::1] Q = Q_arr
    cdef cnp.npy_bool[::1] through = through_arr
    cdef double[:, ::1] dQ = dQ_arr
    cdef double r1, r2, phi, h, s, q
    for i in range(n):
        r1 = X[i, 0]
        r2 = X[i + 1, 0]
        phi = alpha * (X[i + 1, 1] - X[i, 1])
        if r1 < eps or r2 < eps or fabs(phi) >= M_PI:
            through[i] = 1
            q = (r1 + r2) * (r1 + r2)
            dQ[i, 0] = 2.0 * (r1 + r2)
            dQ[i, 2] = 2.0 * (r1 + r2)
            dQ[i, 1] = 0.0
            dQ[i, 3] = 0.0
        else:
            # half-angle form: no cancellation when the nodes nearly coincide
            h = sin(0.5 * phi)
            h = 2.0 * h * h
            s = sin(phi)
            q = (r1 - r2) * (r1 - r2) + 2.0 * r1 * r2 * h
            dQ[i, 0] = 2.0 * (r1 - r2) + 2.0 * r2 * h
            dQ[i, 2] = 2.0 * (r2 - r1) + 2.0 * r1 * h
            dQ[i, 1] = -2.0 * r1 * r2 * alpha * s
            dQ[i, 3] = 2.0 * r1 * r2 * alpha * s
        if r1 < 0 or r2 < 0 or not isfinite(q):
            q = INFINITY
        Q[i] = q
    return Q_arr, through_arr, dQ_arr


def conformal_assemble(nodes, f, gf, wa):
    cdef const double[:, ::1] X = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] F = np.ascontiguousarray(f, dtype=np.float64)
    cdef const double[:, ::1] G = np.ascontiguousarray(gf, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0] - 1, d = X.shape[1], i, k
    # a scalar weight applies to every segment, as in the fallback
    cdef const double[::1] W = np.ascontiguousarray(
        np.broadcast_to(np.asarray(wa, dtype=np.float64), (n,)))
    Q_arr = np.empty(n)
    grad_arr = np.zeros((n + 1, d))
    cdef double[::1] Q = Q_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double sq, dk
    for i in range(n):
        sq = 0.0
        for k in range(d):
            dk = X[i + 1, k] - X[i, k]
            sq += dk * dk
        Q[i] = F[i] * sq
        for k in range(d):
            dk = X[i + 1, k] - X[i, k]
            grad[i, k] += -2.0 * F[i] * dk + W[i] * sq * G[i, k]
            grad[i + 1, k] += 2.0 * F[i] * dk + (1.0 - W[i]) * sq * G[i, k]
    return Q_arr, grad_arr


def dijkstra_csr(indptr, indices, weights, Py_ssize_t source):
    cdef const long[::1] P = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const long[::1] J = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[::1] Wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = P.shape[0] - 1
    dist_arr = np.full(n, np.inf)
    cdef double[::1] dist = dist_arr
    done_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] done = done_arr
    # binary min-heap with lazy deletion; capacity bounded by edge count + 1
    cdef Py_ssize_t cap = J.shape[0] + 1
    heap_d_arr = np.empty(cap)
    heap_v_arr = np.empty(cap, dtype=np.int64)
    cdef double[::1] hd = heap_d_arr
    cdef long[::1] hv = heap_v_arr
    cdef Py_ssize_t size = 0, pos, parent, child, k
    cdef long u, v
    cdef double du, nd, td
    cdef long tv
    dist[source] = 0.0
    hd[0] = 0.0
    hv[0] = source
    size = 1
    while size > 0:
        du = hd[0]
        u = hv[0]
        size -= 1
        if size > 0:
            td = hd[size]
            tv = hv[size]
            pos = 0
            while True:
                child = 2 * pos + 1
                if child >= size:
                    break
                if child + 1 < size and hd[child + 1] < hd[child]:
                    child += 1
                if hd[child] >= td:
                    break
                hd[pos] = hd[child]
                hv[pos] = hv[child]
                pos = child
            hd[pos] = td
            hv[pos] = tv
        if done[u]:
            continue
        done[u] = 1
        for k in range(P[u], P[u + 1]):
            v = J[k]
            nd = du + Wt[k]
            if nd < dist[v]:
                dist[v] = nd
                pos = size
                size += 1
                while pos > 0:
                    parent = (pos - 1) // 2
                    if hd[parent] <= nd:
                        break
                    hd[pos] = hd[parent]
                    hv[pos] = hv[parent]
                    pos = parent
                hd[pos] = nd
                hv[pos] = v
    return dist_arr
