"""Discrete paths, the energy and length functionals, and break structure.

A path is a node sequence ``x_0 .. x_N`` on the uniform grid ``s_i = i/N``.
Its energy is ``sum_i N * Q_i`` where ``Q_i`` is the squared metric length
of segment ``i``:

* flat and conformal metrics use ``g(m_i) |x_{i+1} - x_i|^2`` with ``m_i``
  the segment midpoint, or the off-vertex endpoint when the other endpoint
  lies in the vertex ball;
* cones use the exact intrinsic distance between the two nodes, obtained by
  developing the cone into the plane. A segment whose developed angle is at
  least ``pi`` runs through the vertex;
* lifted sphere metrics evaluate each segment in a stereographic chart: the
  projection from the north pole unless the segment reaches the band
  ``y_top >= 0.5``, where the projection from the south pole takes over.
  In either chart the pulled-back metric is conformal, so the midpoint rule
  applies unchanged and a path lying in the first chart has exactly the
  energy of its chart image under the base metric.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import (
    VERTEX_TOL,
    MetricError,
    MetricKind,
    MetricSpec,
    conformal_factor,
    conformal_factor_grad,
    stereographic_fwd,
    vertex_distance,
)

__all__ = [
    "Boundary",
    "DiscretePath",
    "BreakStructure",
    "DegeneratePathError",
    "NoCenterError",
    "segment_forms",
    "energy",
    "energy_and_grad",
    "length",
    "segment_point",
    "segment_points",
    "reparam_constant_speed",
    "break_structure",
    "seed_path",
    "winding_number",
    "path_to_json",
    "path_from_json",
    "path_to_csv",
]


class DegeneratePathError(ValueError):
    pass


class NoCenterError(ValueError):
    pass


@dataclass(frozen=True)
class Boundary:
    """Fixed endpoints ``(p, q)`` or a closed loop based at ``p``."""

    kind: str
    p: tuple
    q: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "closed"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "fixed" and self.q is None:
            raise ValueError("fixed boundary needs both endpoints")

    @classmethod
    def fixed(cls, p, q):
        return cls("fixed", tuple(map(float, p)), tuple(map(float, q)))

    @classmethod
    def closed(cls, p):
        return cls("closed", tuple(map(float, p)))

    @property
    def end(self):
        return self.q if self.kind == "fixed" else self.p

    def to_dict(self):
        out = {"kind": self.kind, "p": list(self.p)}
        if self.kind == "fixed":
            out["q"] = list(self.q)
        return out

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "fixed":
            return cls.fixed(d["p"], d["q"])
        return cls.closed(d["p"])


@dataclass(frozen=True, eq=False)
class DiscretePath:
    nodes: np.ndarray
    boundary: Boundary

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[0] < 3:
            raise ValueError("a path needs at least 3 nodes (N >= 2)")
        if self.boundary.kind == "closed":
            nodes[-1] = nodes[0]
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def N(self):
        return self.nodes.shape[0] - 1

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def params(self):
        return np.linspace(0.0, 1.0, self.N + 1)

    @classmethod
    def from_nodes(cls, nodes, closed=False):
        nodes = np.asarray(nodes, dtype=float)
        if closed:
            return cls(nodes, Boundary.closed(nodes[0]))
        return cls(nodes, Boundary.fixed(nodes[0], nodes[-1]))

    def with_nodes(self, nodes):
        return DiscretePath(nodes, self.boundary)


@dataclass(frozen=True)
class BreakStructure:
    """Vertex incidence of a path.

    ``break_params`` holds one representative parameter per maximal incident
    interval, ``intervals`` the intervals themselves (a single crossing has
    ``lo == hi``), ``legs`` the metric lengths of the vertex-free pieces in
    order, and ``components`` the complement intervals of the break set.
    """

    break_params: tuple = ()
    intervals: tuple = ()
    legs: tuple = ()
    components: tuple = ((0.0, 1.0),)
    vertex_ids: tuple = ()
    node_spans: tuple = field(default=(), repr=False)

    @property
    def count(self):
        return len(self.break_params)

    def __bool__(self):
        return bool(self.break_params)


# ---------------------------------------------------------------------------
# segment quadratic forms


def _eval_weights(metric, nodes):
    """Weight of each segment's start in its metric evaluation point."""
    at_v = vertex_distance(metric, nodes) < VERTEX_TOL
    wa = np.full(nodes.shape[0] - 1, 0.5)
    a, b = at_v[:-1], at_v[1:]
    wa[a & ~b] = 0.0
    wa[b & ~a] = 1.0
    return wa


def _conformal_parts(metric, nodes, with_grad):
    wa = _eval_weights(metric, nodes)
    pts = wa[:, None] * nodes[:-1] + (1.0 - wa)[:, None] * nodes[1:]
    f = conformal_factor(metric, pts, check=False)
    at_v = vertex_distance(metric, pts) < VERTEX_TOL
    bad = ~at_v & (~np.isfinite(f) | (f <= 0))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise MetricError(
            f"segment {i}: metric undefined at x={tuple(float(c) for c in pts[i])}"
        )
    if not with_grad:
        return f, None, wa
    gf = conformal_factor_grad(metric, pts)
    gf[at_v] = 0.0
    gf[~np.isfinite(gf)] = 0.0
    return f, gf, wa


_HANDOFF = 0.5


def _lifted_chart_choice(nodes):
    """Per segment: True where the south-pole chart is used."""
    yh = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    top = yh[:, -1]
    hi = np.maximum(top[:-1], top[1:])
    lo = np.minimum(top[:-1], top[1:])
    return (hi >= _HANDOFF) & (lo > -_HANDOFF)


def _lifted_coords(y, south):
    """Chart coordinates of ambient points and the chart map's Jacobian.

    ``south`` selects, per point, the projection from the south pole
    ``z = y_low / (1 + y_top)``; otherwise ``x = y_low / (1 - y_top)``.
    Points are normalised first, so the Jacobian includes the tangential
    projection ``(I - yy^T)/|y|``.
    """
    norm = np.linalg.norm(y, axis=-1, keepdims=True)
    yh = y / norm
    n = y.shape[-1] - 1
    sgn = np.where(south, -1.0, 1.0)[:, None]
    denom = 1.0 - sgn * yh[:, n:]
    with np.errstate(all="ignore"):
        u = yh[:, :n] / denom
        J = np.zeros((y.shape[0], n, n + 1))
        J[:, :, :n] = np.eye(n)[None] / denom[:, :, None]
        J[:, :, n] = sgn * u / denom
        P = (np.eye(n + 1)[None] - yh[:, :, None] * yh[:, None, :]) / norm[:, :, None]
    return u, np.einsum("mij,mjk->mik", J, P)


def _lifted_chart_factor(base, u, south, with_grad):
    """Pulled-back factor in either chart (and its gradient)."""
    F = np.empty(u.shape[0])
    G = np.zeros(u.shape) if with_grad else None
    north = ~south
    if np.any(north):
        x = u[north]
        F[north] = _base_values(base, x)
        if with_grad:
            G[north] = _base_grads(base, x)
    if np.any(south):
        z = u[south]
        zz = np.sum(z * z, axis=1)
        with np.errstate(all="ignore"):
            x = z / zz[:, None]
            f = _base_values(base, x)
            Fs = f / zz**2
            if with_grad:
                gx = _base_grads(base, x)
                # dx/dz = (|z|^2 I - 2 z z^T) / |z|^4 is symmetric
                dxdz_g = (gx * zz[:, None] - 2.0 * z * np.sum(z * gx, axis=1)[:, None]) / zz[:, None] ** 2
                Gs = dxdz_g / zz[:, None] ** 2 - 4.0 * f[:, None] * z / zz[:, None] ** 3
        # the north pole is a vertex with vanishing form
        pole = zz < VERTEX_TOL**2
        Fs[pole] = 0.0
        F[south] = Fs
        if with_grad:
            Gs[pole] = 0.0
            G[south] = Gs
    return F, G


def _base_values(base, x):
    if base.kind is MetricKind.FLAT:
        return np.ones(x.shape[0])
    return conformal_factor(base, x, check=False)


def _base_grads(base, x):
    if base.kind is MetricKind.FLAT:
        return np.zeros(x.shape)
    g = conformal_factor_grad(base, x)
    if base.has_vertices:
        g[vertex_distance(base, x) < VERTEX_TOL] = 0.0
    return g


def _lifted_segments(metric, nodes, with_grad):
    """Segment forms of a lifted sphere path, plus node gradient of ``sum Q``."""
    south = _lifted_chart_choice(nodes)
    ua, Ja = _lifted_coords(nodes[:-1], south)
    ub, Jb = _lifted_coords(nodes[1:], south)
    wa = _eval_weights(metric, nodes)
    pts = wa[:, None] * ua + (1.0 - wa)[:, None] * ub
    F, G = _lifted_chart_factor(metric.base, pts, south, with_grad)
    mid = wa[:, None] * nodes[:-1] + (1.0 - wa)[:, None] * nodes[1:]
    at_v = vertex_distance(metric, mid / np.linalg.norm(mid, axis=1, keepdims=True)) < VERTEX_TOL
    bad = ~at_v & (~np.isfinite(F) | (F <= 0))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise MetricError(f"segment {i}: lifted metric undefined near y={tuple(float(c) for c in nodes[i])}")
    F = np.where(at_v, 0.0, F)
    D = ub - ua
    sq = np.einsum("ij,ij->i", D, D)
    Q = F * sq
    if not with_grad:
        return Q, None
    G = np.where(at_v[:, None] | ~np.isfinite(G), 0.0, G)
    dua = -2.0 * F[:, None] * D + wa[:, None] * G * sq[:, None]
    dub = 2.0 * F[:, None] * D + (1.0 - wa)[:, None] * G * sq[:, None]
    grad = np.zeros_like(nodes)
    grad[:-1] += np.einsum("mij,mi->mj", Ja, dua)
    grad[1:] += np.einsum("mij,mi->mj", Jb, dub)
    return Q, grad


def segment_forms(metric: MetricSpec, nodes) -> np.ndarray:
    """Squared metric length of every segment, shape (N,)."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape[1] != metric.dimension:
        raise MetricError(f"path dimension {nodes.shape[1]} does not match metric {metric.dimension}")
    if metric.kind is MetricKind.CONE:
        Q, _, _ = kernels.cone_segments(nodes, metric.alpha, VERTEX_TOL)
        if not np.all(np.isfinite(Q)):
            i = int(np.flatnonzero(~np.isfinite(Q))[0])
            raise MetricError(f"segment {i}: negative radius in cone chart")
        return Q
    if metric.kind is MetricKind.LIFTED_SPHERE:
        return _lifted_segments(metric, nodes, with_grad=False)[0]
    D = np.diff(nodes, axis=0)
    sq = np.einsum("ij,ij->i", D, D)
    if metric.kind is MetricKind.FLAT:
        return sq
    f, _, _ = _conformal_parts(metric, nodes, with_grad=False)
    return f * sq


def energy_and_grad(metric: MetricSpec, nodes):
    """Discrete energy and its gradient with respect to every node.

    Returns ``(E, grad, Q)``; ``E`` is ``inf`` when any segment leaves the
    metric's domain (the gradient is then meaningless).
    """
    nodes = np.asarray(nodes, dtype=float)
    N = nodes.shape[0] - 1
    if metric.kind is MetricKind.CONE:
        Q, _, dQ = kernels.cone_segments(nodes, metric.alpha, VERTEX_TOL)
        grad = np.zeros_like(nodes)
        grad[:-1] += dQ[:, 0:2]
        grad[1:] += dQ[:, 2:4]
        return N * float(np.sum(Q)), N * grad, Q
    if metric.kind is MetricKind.LIFTED_SPHERE:
        try:
            Q, grad = _lifted_segments(metric, nodes, with_grad=True)
        except MetricError:
            return math.inf, np.zeros_like(nodes), np.full(N, np.inf)
        return N * float(np.sum(Q)), N * grad, Q
    if metric.kind is MetricKind.FLAT:
        f = np.ones(N)
        gf = np.zeros((N, nodes.shape[1]))
        wa = np.full(N, 0.5)
    else:
        try:
            f, gf, wa = _conformal_parts(metric, nodes, with_grad=True)
        except MetricError:
            return math.inf, np.zeros_like(nodes), np.full(N, np.inf)
    Q, grad = kernels.conformal_assemble(nodes, f, gf, wa)
    return N * float(np.sum(Q)), N * grad, Q


def _nodes(path):
    return path.nodes if isinstance(path, DiscretePath) else np.asarray(path, dtype=float)


def energy(path, metric: MetricSpec) -> float:
    """``E = sum_i N Q_i``, the discrete ``int_0^1 |gamma'|^2``."""
    nodes = _nodes(path)
    return (nodes.shape[0] - 1) * float(np.sum(segment_forms(metric, nodes)))


def length(path, metric: MetricSpec) -> float:
    return float(np.sum(np.sqrt(segment_forms(metric, _nodes(path)))))


# ---------------------------------------------------------------------------
# interpolation along segments


def segment_points(metric: MetricSpec, A, B, u) -> np.ndarray:
    """Points at metric-length fractions ``u`` along segments ``A[k] -> B[k]``.

    ``A`` and ``B`` have shape (M, d) and ``u`` shape (M,).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    u = np.asarray(u, dtype=float)
    if metric.kind is MetricKind.LIFTED_SPHERE:
        south = _lifted_chart_choice(np.stack([A, B], axis=1).reshape(-1, A.shape[1]))[::2]
        ua, _ = _lifted_coords(A, south)
        ub, _ = _lifted_coords(B, south)
        c = ua + u[:, None] * (ub - ua)
        out = stereographic_fwd(c)
        out[south] = stereographic_fwd(c[south]) * np.r_[np.ones(A.shape[1] - 1), -1.0]
        return out
    if metric.kind is not MetricKind.CONE:
        return A + u[:, None] * (B - A)
    r1, t1 = A[:, 0], A[:, 1]
    r2, t2 = B[:, 0], B[:, 1]
    phi = metric.alpha * (t2 - t1)
    through = (r1 < VERTEX_TOL) | (r2 < VERTEX_TOL) | (np.abs(phi) >= math.pi)
    # through the vertex: radially in along the first ray, out along the second
    d = u * (r1 + r2)
    first = d <= r1
    r_thr = np.where(first, r1 - d, d - r1)
    t_thr = np.where(first, t1, t2)
    # otherwise develop onto the plane with the segment start on the x-axis
    px = r1 + u * (r2 * np.cos(phi) - r1)
    py = u * r2 * np.sin(phi)
    r_dir = np.hypot(px, py)
    t_dir = t1 + np.arctan2(py, px) / metric.alpha
    return np.stack([np.where(through, r_thr, r_dir), np.where(through, t_thr, t_dir)], axis=1)


def segment_point(metric: MetricSpec, a, b, u):
    """Point at metric-length fraction ``u`` along the single segment ``a -> b``."""
    return segment_points(metric, np.atleast_2d(a), np.atleast_2d(b), np.atleast_1d(u))[0]


def _sample_polyline(metric, nodes, seg, targets):
    """Points at cumulative metric lengths ``targets`` along a node polyline."""
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seg) - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(seg[idx] > 0, (targets - cum[idx]) / seg[idx], 0.0)
    u = np.clip(u, 0.0, 1.0)
    return segment_points(metric, nodes[idx], nodes[idx + 1], u)


def reparam_constant_speed(path: DiscretePath, metric: MetricSpec, tol: float = 1e-12,
                           max_sweeps: int = 60) -> DiscretePath:
    """Resample the path image so every segment has the same metric length.

    The image is the original node polyline; new nodes slide along it
    until the per-segment metric lengths agree to ``tol`` (relative).
    """
    nodes = path.nodes
    Q = segment_forms(metric, nodes)
    seg = np.sqrt(Q)
    total = float(np.sum(seg))
    if not total > 0.0:
        raise DegeneratePathError("cannot reparametrize a path of zero length")
    N = path.N
    ell = total * np.arange(N + 1) / N
    new = nodes.copy()
    for _ in range(max_sweeps):
        new = _sample_polyline(metric, nodes, seg, ell)
        new[0], new[-1] = nodes[0], nodes[-1]
        d = np.sqrt(segment_forms(metric, new))
        mean = d.mean()
        if np.max(np.abs(d - mean)) <= tol * mean:
            break
        # equidistribute: move the original-arclength positions so new
        # segment lengths become uniform
        c = np.concatenate([[0.0], np.cumsum(d)])
        ell = np.interp(c[-1] * np.arange(N + 1) / N, c, ell)
        ell[0], ell[-1] = 0.0, total
    return path.with_nodes(new)


# ---------------------------------------------------------------------------
# break structure


def _through_segments(metric, nodes):
    if metric.kind is not MetricKind.CONE:
        return np.zeros(nodes.shape[0] - 1, dtype=bool)
    r = nodes[:, 0]
    phi = metric.alpha * np.diff(nodes[:, 1])
    off = (r[:-1] >= VERTEX_TOL) & (r[1:] >= VERTEX_TOL)
    return off & (np.abs(phi) >= math.pi)


def _nearest_vertex(metric, x):
    if metric.kind is MetricKind.CONE:
        return 0
    V = metric.vertex_array
    return int(np.argmin(np.linalg.norm(V - x, axis=1)))


def break_structure(path: DiscretePath, metric: MetricSpec) -> BreakStructure:
    """Vertex incidences of ``path`` with per-leg metric lengths."""
    nodes = path.nodes
    N = path.N
    if not metric.has_vertices:
        return BreakStructure(legs=(length(path, metric),))
    at_v = vertex_distance(metric, nodes) < VERTEX_TOL
    through = _through_segments(metric, nodes)
    Q = segment_forms(metric, nodes)
    seg = np.sqrt(Q)

    events = []  # (lo_param, hi_param, first_node, last_node, vertex_id, kind)
    i = 0
    while i <= N:
        if at_v[i]:
            j = i
            while j + 1 <= N and at_v[j + 1]:
                j += 1
            events.append((i / N, j / N, i, j, _nearest_vertex(metric, nodes[i]), "node"))
            i = j + 1
        else:
            i += 1
    for k in np.flatnonzero(through):
        r1, r2 = nodes[k, 0], nodes[k + 1, 0]
        tau = (k + r1 / (r1 + r2)) / N
        events.append((tau, tau, k, k + 1, 0, "segment"))
    events.sort(key=lambda e: e[0])
    if not events:
        return BreakStructure(legs=(float(seg.sum()),))

    # leg lengths: walk the segments accumulating length between breaks
    legs = []
    acc = 0.0
    ev = iter(events)
    cur = next(ev, None)
    k = 0
    while k < N:
        if cur is not None and cur[5] == "segment" and cur[2] == k:
            r1, r2 = nodes[k, 0], nodes[k + 1, 0]
            legs.append(acc + r1)
            acc = r2
            cur = next(ev, None)
            k += 1
            continue
        if cur is not None and cur[5] == "node" and cur[2] == k:
            legs.append(acc)
            acc = 0.0
            k = cur[3]
            cur = next(ev, None)
            continue
        acc += seg[k]
        k += 1
    if cur is not None and cur[5] == "node" and cur[2] == N:
        legs.append(acc)
        acc = 0.0
    legs.append(acc)

    comps = []
    lo = 0.0
    for e in events:
        if e[0] > lo:
            comps.append((lo, e[0]))
        lo = e[1]
    if lo < 1.0:
        comps.append((lo, 1.0))
    return BreakStructure(
        break_params=tuple(0.5 * (e[0] + e[1]) for e in events),
        intervals=tuple((e[0], e[1]) for e in events),
        legs=tuple(float(x) for x in legs),
        components=tuple(comps),
        vertex_ids=tuple(e[4] for e in events),
        node_spans=tuple((e[2], e[3], e[5]) for e in events),
    )


# ---------------------------------------------------------------------------
# seeding and winding


def _wrap(angle):
    """Reduce to (-pi, pi]."""
    return -((-angle + math.pi) % (2 * math.pi) - math.pi)


def seed_path(boundary: Boundary, winding: int, metric: MetricSpec, N: int) -> DiscretePath:
    """Piecewise-affine starting path in the homotopy class of ``winding``.

    Winding is counted about the first vertex (for lifted sphere metrics,
    about the first vertex of the base chart). With no vertices only
    ``winding == 0`` is allowed and the seed is the straight chord.
    """
    winding = int(winding)
    if N < 8 * (abs(winding) + 1):
        raise ValueError(f"N={N} too small for winding {winding}; need N >= {8 * (abs(winding) + 1)}")
    if metric.kind is MetricKind.LIFTED_SPHERE:
        base = metric.base
        bp = _chart_of(boundary.p)
        bq = _chart_of(boundary.end)
        b = Boundary.fixed(bp, bq) if boundary.kind == "fixed" else Boundary.closed(bp)
        chart = seed_path(b, winding, base, N)
        return DiscretePath(stereographic_fwd(chart.nodes), boundary)
    s = np.linspace(0.0, 1.0, N + 1)[:, None]
    p = np.asarray(boundary.p, dtype=float)
    q = np.asarray(boundary.end, dtype=float)
    if metric.kind is MetricKind.CONE:
        dth = _wrap(q[1] - p[1]) if boundary.kind == "fixed" else 0.0
        th_end = p[1] + dth + 2 * math.pi * winding
        r = p[0] + s[:, 0] * (q[0] - p[0])
        th = p[1] + s[:, 0] * (th_end - p[1])
        nodes = np.stack([r, th], axis=1)
        if boundary.kind == "fixed":
            nodes[-1] = (q[0], th_end)
        return DiscretePath(nodes, boundary if boundary.kind == "closed" else Boundary.fixed(p, nodes[-1]))
    if not metric.has_vertices:
        if winding != 0:
            raise NoCenterError("winding seeds need a metric with at least one vertex")
        return DiscretePath(p + s * (q - p), boundary)
    c = metric.vertex_array[0]
    if boundary.kind == "fixed" and winding == 0 and metric.dimension != 2:
        return DiscretePath(p + s * (q - p), boundary)
    if metric.dimension != 2:
        raise NoCenterError("winding about a vertex is only defined in 2-d charts")
    dp, dq = p - c, q - c
    rp, rq = math.hypot(*dp), math.hypot(*dq)
    ap, aq = math.atan2(dp[1], dp[0]), math.atan2(dq[1], dq[0])
    dphi = (_wrap(aq - ap) if boundary.kind == "fixed" else 0.0) + 2 * math.pi * winding
    if boundary.kind == "closed" and winding == 0:
        return DiscretePath(np.repeat(p[None], N + 1, axis=0), boundary)
    r = rp + s[:, 0] * (rq - rp)
    a = ap + s[:, 0] * dphi
    nodes = c + np.stack([r * np.cos(a), r * np.sin(a)], axis=1)
    nodes[0], nodes[-1] = p, q
    return DiscretePath(nodes, boundary)


def _chart_of(y):
    from .geometry import stereographic_inv

    return tuple(stereographic_inv(np.asarray(y, dtype=float)))


def winding_number(path, metric: MetricSpec) -> float:
    """Total angle swept about the reference vertex, in turns.

    Cone paths read it off the unwrapped angular coordinate; planar charts
    sum the wrapped angle increments about ``vertices[0]``; lifted sphere
    paths are measured in the base chart about the base's first vertex.
    """
    nodes = _nodes(path)
    if metric.kind is MetricKind.CONE:
        return float((nodes[-1, 1] - nodes[0, 1]) / (2 * math.pi))
    if metric.kind is MetricKind.LIFTED_SPHERE:
        from .geometry import stereographic_inv

        y = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
        return winding_number(stereographic_inv(y), metric.base)
    if not metric.has_vertices:
        raise NoCenterError("winding needs a vertex")
    rel = nodes - metric.vertex_array[0]
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    return float(np.sum(_wrap_array(np.diff(ang))) / (2 * math.pi))


def _wrap_array(a):
    return -((-a + np.pi) % (2 * np.pi) - np.pi)


# ---------------------------------------------------------------------------
# serialization


def path_to_json(path: DiscretePath) -> str:
    return json.dumps({"boundary": path.boundary.to_dict(), "nodes": path.nodes.tolist()})


def path_from_json(text: str) -> DiscretePath:
    d = json.loads(text)
    return DiscretePath(np.asarray(d["nodes"], dtype=float), Boundary.from_dict(d["boundary"]))


def path_to_csv(path: DiscretePath) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s"] + [f"x{k + 1}" for k in range(path.dim)])
    for s, x in zip(path.params, path.nodes):
        w.writerow([repr(float(s))] + [repr(float(c)) for c in x])
    return buf.getvalue()
