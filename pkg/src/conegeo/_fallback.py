"""Pure-Python implementations of the hot kernels.

These mirror :mod:`conegeo._kernels` one for one and are selected when the
compiled extension is unavailable or ``CONEGEO_PURE_PYTHON`` is set.
"""
import heapq

import numpy as np


def cone_segments(nodes, alpha, eps):
    """Squared intrinsic cone distances between consecutive polar nodes.

    Returns ``(Q, through, dQ)`` where ``dQ[:, 0:2]`` is the derivative with
    respect to the segment start ``(r, theta)`` and ``dQ[:, 2:4]`` with
    respect to the segment end. ``through`` marks segments whose shortest
    connection passes through the vertex.
    """
    nodes = np.asarray(nodes, dtype=float)
    r1, t1 = nodes[:-1, 0], nodes[:-1, 1]
    r2, t2 = nodes[1:, 0], nodes[1:, 1]
    phi = alpha * (t2 - t1)
    vert = (r1 < eps) | (r2 < eps)
    through = vert | (np.abs(phi) >= np.pi)
    # 1 - cos(phi) as 2 sin^2(phi/2) keeps short segments accurate
    h, s = 2.0 * np.sin(0.5 * phi) ** 2, np.sin(phi)
    Q = np.where(through, (r1 + r2) ** 2, (r1 - r2) ** 2 + 2.0 * r1 * r2 * h)
    dQ = np.empty((len(r1), 4))
    dQ[:, 0] = np.where(through, 2.0 * (r1 + r2), 2.0 * (r1 - r2) + 2.0 * r2 * h)
    dQ[:, 2] = np.where(through, 2.0 * (r1 + r2), 2.0 * (r2 - r1) + 2.0 * r1 * h)
    tg = np.where(through, 0.0, 2.0 * r1 * r2 * alpha * s)
    dQ[:, 1] = -tg
    dQ[:, 3] = tg
    bad = (r1 < 0) | (r2 < 0) | ~np.isfinite(Q)
    if np.any(bad):
        Q = np.where(bad, np.inf, Q)
    return Q, through, dQ


def conformal_assemble(nodes, f, gf, wa):
    """Segment forms ``Q_i = f_i |x_{i+1} - x_i|^2`` and node gradients of sum Q.

    ``f`` and ``gf`` are the factor and its gradient at each segment's
    evaluation point, which sits at weight ``wa`` on the segment start and
    ``1 - wa`` on the end.
    """
    nodes = np.asarray(nodes, dtype=float)
    D = np.diff(nodes, axis=0)
    sq = np.einsum("ij,ij->i", D, D)
    Q = f * sq
    ga = -2.0 * f[:, None] * D + (wa * sq)[:, None] * gf
    gb = 2.0 * f[:, None] * D + ((1.0 - wa) * sq)[:, None] * gf
    grad = np.zeros_like(nodes)
    grad[:-1] += ga
    grad[1:] += gb
    return Q, grad


def dijkstra_csr(indptr, indices, weights, source):
    """Single-source shortest distances on a CSR graph with a binary heap."""
    n = len(indptr) - 1
    dist = [np.inf] * n
    dist[source] = 0.0
    done = [False] * n
    heap = [(0.0, source)]
    indptr = indptr.tolist()
    indices = indices.tolist()
    weights = weights.tolist()
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            nd = d + weights[k]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return np.asarray(dist)
