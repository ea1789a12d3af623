"""Reference solutions that do not share code with the flows.

``cone_unroll_geodesic`` is exact: a cone of angle ``2 pi alpha`` develops
isometrically onto a planar sector, where geodesics are straight. The grid
oracle is approximate but metric-agnostic: Dijkstra on a 16-neighbour
lattice whose edges are weighted by their midpoint-rule metric length.
"""
from __future__ import annotations

import math

import numpy as np

from . import kernels
from .geometry import (
    MetricKind,
    MetricSpec,
    UnsupportedKindError,
    cartesian_metric,
    cone_to_cartesian,
)
from .paths import Boundary, DiscretePath

__all__ = ["cone_unroll_geodesic", "graph_shortest_path", "OracleDomainError", "STENCIL_16"]


class OracleDomainError(ValueError):
    pass


def _developed_separation(alpha, th_p, th_q):
    """Smallest developed angle between the two rays and its orientation."""
    d = (th_q - th_p) % (2 * math.pi)
    if d <= 2 * math.pi - d:
        return alpha * d, 1.0
    return alpha * (2 * math.pi - d), -1.0


def cone_unroll_geodesic(alpha: float, p, q, n: int = 64):
    """Length of the shortest cone path from ``p`` to ``q`` (polar charts).

    Returns ``(length, through_vertex, witness)``. The witness is a
    :class:`DiscretePath` with ``n`` segments traversed at constant speed;
    its angular coordinate is unwrapped so it can seed or be compared
    against a flow in the same homotopy class.
    """
    rp, tp = float(p[0]), float(p[1])
    rq, tq = float(q[0]), float(q[1])
    if not (rp > 0 and rq > 0):
        raise OracleDomainError(f"radii must be positive, got {rp} and {rq}")
    if not alpha > 0:
        raise OracleDomainError(f"cone parameter must be positive, got {alpha}")
    delta, sign = _developed_separation(alpha, tp, tq)
    th_end = tp + sign * delta / alpha
    s = np.linspace(0.0, 1.0, n + 1)
    if delta >= math.pi:
        L = rp + rq
        d = s * L
        r = np.abs(rp - d)
        th = np.where(d <= rp, tp, th_end)
        nodes = np.stack([r, th], axis=1)
        return L, True, DiscretePath(nodes, Boundary.fixed((rp, tp), (rq, th_end)))
    # law of cosines in the cancellation-free half-angle form
    L = math.sqrt((rp - rq) ** 2 + 4.0 * rp * rq * math.sin(0.5 * delta) ** 2)
    # straight segment in the development, p on the positive x-axis
    a = np.array([rp, 0.0])
    b = np.array([rq * math.cos(delta), rq * math.sin(delta)])
    pts = a + s[:, None] * (b - a)
    r = np.hypot(pts[:, 0], pts[:, 1])
    th = tp + sign * np.arctan2(pts[:, 1], pts[:, 0]) / alpha
    nodes = np.stack([r, th], axis=1)
    nodes[-1] = (rq, th_end)
    return L, False, DiscretePath(nodes, Boundary.fixed((rp, tp), (rq, th_end)))


# 16-neighbour stencil: the 8 king moves plus the 8 knight moves
STENCIL_16 = tuple(
    (i, j)
    for i in range(-2, 3)
    for j in range(-2, 3)
    if (i, j) != (0, 0) and math.gcd(abs(i), abs(j)) == 1
)
_STENCIL_8 = tuple((i, j) for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0))


def _edge_lengths(metric, a, b):
    d = b - a
    mid = 0.5 * (a + b)
    G = cartesian_metric(metric, mid)
    q = np.einsum("...i,...ij,...j->...", d, G, d)
    with np.errstate(invalid="ignore"):
        L = np.sqrt(q)
    return np.where(np.isfinite(L) & (q >= 0), L, np.inf)


def graph_shortest_path(metric: MetricSpec, p, q, resolution: int = 128, connectivity: int = 16,
                        window=None) -> float:
    """Grid-graph distance from ``p`` to ``q``; an upper bound on the geodesic length.

    Parameters
    ----------
    metric : MetricSpec
        Flat, conformal or cone metric. Cone points are given in the polar
        chart and the search runs in the planar chart around the apex.
    p, q : array_like
        Endpoints in the metric's chart.
    resolution : int
        Number of cells along the longer side of the window; at least 16.
    connectivity : {8, 16}
    window : ((xmin, xmax), (ymin, ymax)), optional
        Planar search window. Defaults to a square around the endpoints and
        vertices with half their extent as margin; for cones, the square
        around the apex enclosing both endpoints with a 25% margin.

    Notes
    -----
    The lattice is anchored at ``p`` so halving the cell size nests the
    grids, which makes the result non-increasing under refinement.
    """
    if metric.kind is MetricKind.LIFTED_SPHERE:
        raise UnsupportedKindError("the grid oracle works in planar charts only")
    if metric.dimension != 2:
        raise UnsupportedKindError("the grid oracle is two-dimensional")
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    if connectivity not in (8, 16):
        raise ValueError("connectivity must be 8 or 16")
    P = np.asarray(p, dtype=float)
    Qp = np.asarray(q, dtype=float)
    if metric.kind is MetricKind.CONE:
        P, Qp = cone_to_cartesian(P), cone_to_cartesian(Qp)
    anchors = [P, Qp]
    if metric.kind is MetricKind.CONE:
        anchors.append(np.zeros(2))
    elif metric.has_vertices:
        anchors.extend(metric.vertex_array)
    A = np.array(anchors)
    if window is None:
        if metric.kind is MetricKind.CONE:
            # geodesics bend around the apex but stay inside the disk of the farther endpoint
            R = 1.25 * max(np.linalg.norm(P), np.linalg.norm(Qp))
            lo, hi = np.array([-R, -R]), np.array([R, R])
        else:
            c = 0.5 * (A.min(axis=0) + A.max(axis=0))
            half = 0.75 * max(float(np.max(A.max(axis=0) - A.min(axis=0))), 1e-12)
            lo, hi = c - half, c + half
    else:
        (x0, x1), (y0, y1) = window
        lo, hi = np.array([x0, y0], dtype=float), np.array([x1, y1], dtype=float)
        for name, X in (("p", P), ("q", Qp)):
            if np.any(X < lo) or np.any(X > hi):
                raise OracleDomainError(f"{name}={tuple(X)} lies outside the window")
    h = float(np.max(hi - lo)) / resolution
    i0 = math.ceil((lo[0] - P[0]) / h - 1e-9)
    i1 = math.floor((hi[0] - P[0]) / h + 1e-9)
    j0 = math.ceil((lo[1] - P[1]) / h - 1e-9)
    j1 = math.floor((hi[1] - P[1]) / h + 1e-9)
    xs = P[0] + h * np.arange(i0, i1 + 1)
    ys = P[1] + h * np.arange(j0, j1 + 1)
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    ids = np.arange(nx * ny).reshape(nx, ny)
    stencil = STENCIL_16 if connectivity == 16 else _STENCIL_8

    src, dst, wts = [], [], []
    for di, dj in stencil:
        a = ids[max(0, -di):nx - max(0, di), max(0, -dj):ny - max(0, dj)].ravel()
        b = ids[max(0, di):nx + min(0, di), max(0, dj):ny + min(0, dj)].ravel()
        w = _edge_lengths(metric, pts[a], pts[b])
        ok = np.isfinite(w)
        src.append(a[ok]), dst.append(b[ok]), wts.append(w[ok])

    # endpoints join the lattice through straight edges to nearby nodes
    n_grid = nx * ny
    for k, X0 in enumerate((P, Qp)):
        near = np.flatnonzero(np.linalg.norm(pts - X0, axis=1) <= 2.0 * h * (1 + 1e-9))
        if near.size == 0:
            raise OracleDomainError("endpoint is not covered by the lattice")
        w = _edge_lengths(metric, np.repeat(X0[None], near.size, axis=0), pts[near])
        ok = np.isfinite(w)
        node = n_grid + k
        src.extend([near[ok], np.full(ok.sum(), node)])
        dst.extend([np.full(ok.sum(), node), near[ok]])
        wts.extend([w[ok], w[ok]])

    src = np.concatenate(src)
    dst = np.concatenate(dst)
    wts = np.concatenate(wts)
    n = n_grid + 2
    order = np.lexsort((dst, src))
    src, dst, wts = src[order], dst[order], wts[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    dist = kernels.dijkstra_csr(indptr, dst.astype(np.int64), wts, n_grid)
    return float(dist[n_grid + 1])
