"""Geodesic certificates for discrete paths and a geodesic shooting integrator.

A discrete path is accepted as a geodesic when

* its vertex incidences form isolated crossings (no incident run longer
  than two grid cells),
* the discrete acceleration vanishes at every node away from vertices, and
* its metric speed is the same on every segment, breaks included.

The acceleration at node ``i`` is the energy gradient raised by the metric
and divided by ``2N``; for the flat metric that is the second difference
``2 x_i - x_{i-1} - x_{i+1}``, a chart length. Only its component normal to
the path is kept, because the tangential part measures uneven spacing and
that is what the speed residual is for.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    VERTEX_TOL,
    MetricError,
    MetricKind,
    MetricSpec,
    SingularityError,
    UnsupportedKindError,
    conformal_factor,
    conformal_factor_grad,
    stereographic_fwd,
    vertex_distance,
)
from .paths import (
    Boundary,
    DiscretePath,
    _through_segments,
    break_structure,
    energy_and_grad,
    segment_forms,
)

__all__ = ["GeodesicCertificate", "certify_geodesic", "shoot", "ShotPath", "SingularStartError"]


class SingularStartError(SingularityError):
    pass


@dataclass(frozen=True)
class GeodesicCertificate:
    straightness_residual: float
    speed_residual: float
    break_interior_violation: bool
    tol: float
    break_count: int = 0

    @property
    def passed(self) -> bool:
        return (
            self.straightness_residual <= self.tol
            and self.speed_residual <= self.tol
            and not self.break_interior_violation
        )

    # ``pass`` is a keyword, so the field is exposed under both spellings
    @property
    def pass_(self) -> bool:
        return self.passed

    @property
    def max_residual(self) -> float:
        return max(self.straightness_residual, self.speed_residual)

    def to_dict(self):
        return {
            "straightness_residual": float(self.straightness_residual),
            "speed_residual": float(self.speed_residual),
            "break_interior_violation": bool(self.break_interior_violation),
            "pass": self.passed,
            "tol": float(self.tol),
            "break_count": int(self.break_count),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(d["straightness_residual"], d["speed_residual"], d["break_interior_violation"],
                   d.get("tol", 1e-6), d.get("break_count", 0))


def _metric_diag(metric, nodes):
    """Diagonal of the chart metric at each node, shape (M, d)."""
    if metric.kind is MetricKind.CONE:
        r = nodes[:, 0]
        return np.stack([np.ones_like(r), (metric.alpha * r) ** 2], axis=1)
    f = conformal_factor(metric, nodes, check=False)
    return np.repeat(f[:, None], nodes.shape[1], axis=1)


def _tangents(metric, nodes, through):
    """Chart tangent at each interior node (rows 1..N-1)."""
    prev = nodes[1:-1] - nodes[:-2]
    nxt = nodes[2:] - nodes[1:-1]
    if metric.kind is MetricKind.CONE:
        # unwrapped theta is a valid chart coordinate, so the centred chord works
        # except next to a segment through the vertex, where the path is radial
        t = prev + nxt
        radial_in = through[:-1]
        radial_out = through[1:]
        t[radial_in | radial_out] = np.array([1.0, 0.0])
        return t
    return prev + nxt


def _straightness(metric, nodes, free):
    N = nodes.shape[0] - 1
    E, grad, _ = energy_and_grad(metric, nodes)
    if not math.isfinite(E):
        return math.inf
    inner = np.arange(1, N)
    mask = free[1:-1]
    if not np.any(mask):
        return 0.0
    x = nodes[1:-1]
    G = _metric_diag(metric, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = grad[inner] / (2.0 * N * G)
    through = _through_segments(metric, nodes)
    T = _tangents(metric, nodes, through)
    if metric.kind is MetricKind.LIFTED_SPHERE:
        y = x / np.linalg.norm(x, axis=1, keepdims=True)
        acc = acc - np.sum(acc * y, axis=1, keepdims=True) * y
        T = T - np.sum(T * y, axis=1, keepdims=True) * y
    # normal part in the metric inner product
    tt = np.sum(G * T * T, axis=1)
    at = np.sum(G * acc * T, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(tt > 0, at / tt, 0.0)
    normal = acc - coef[:, None] * T
    res = np.sqrt(np.maximum(np.sum(G * normal * normal, axis=1), 0.0))
    res = res[mask]
    if not np.all(np.isfinite(res)):
        return math.inf
    return float(res.max(initial=0.0))


def certify_geodesic(path: DiscretePath, metric: MetricSpec, tol: float = 1e-6) -> GeodesicCertificate:
    """Residuals of the three geodesic conditions for ``path``."""
    nodes = path.nodes
    N = path.N
    try:
        Q = segment_forms(metric, nodes)
    except MetricError:
        return GeodesicCertificate(math.inf, math.inf, False, tol)
    seg = np.sqrt(Q)
    mean = float(seg.mean())
    speed = float(np.max(np.abs(seg - mean)) / mean) if mean > 0 else 0.0
    free = np.ones(N + 1, dtype=bool)
    free[0] = free[-1] = False
    violation = False
    count = 0
    if metric.has_vertices:
        free &= vertex_distance(metric, nodes) >= VERTEX_TOL
        bs = break_structure(path, metric)
        count = bs.count
        violation = any(hi - lo > 2.0 / N + 1e-15 for lo, hi in bs.intervals)
    straight = _straightness(metric, nodes, free)
    return GeodesicCertificate(straight, speed, violation, tol, count)


# ---------------------------------------------------------------------------
# shooting


@dataclass(frozen=True, eq=False)
class ShotPath(DiscretePath):
    """Trajectory from :func:`shoot`; ``hit_vertex`` marks an early stop."""

    hit_vertex: bool = False
    t_end: float = 1.0
    velocities: np.ndarray | None = None

    def speeds(self, metric: MetricSpec) -> np.ndarray:
        """Metric speed at every integration node."""
        G = _metric_diag(metric, self.nodes)
        return np.sqrt(np.sum(G * self.velocities * self.velocities, axis=1))


def _rhs_factory(metric):
    if metric.kind is MetricKind.CONE:
        a2 = metric.alpha**2

        def rhs(x, v):
            r, _ = x
            dr, dth = v
            return np.array([a2 * r * dth * dth, -2.0 * dr * dth / r])

        return rhs
    if metric.kind in (MetricKind.FLAT, MetricKind.CONFORMAL):

        def rhs(x, v):
            f = float(conformal_factor(metric, x[None, :], check=True)[0])
            gf = conformal_factor_grad(metric, x[None, :])[0]
            return (-(gf @ v) * v + 0.5 * (v @ v) * gf) / f

        return rhs
    raise UnsupportedKindError(f"no geodesic equation for {metric.kind.value}")


def shoot(metric: MetricSpec, p, v, n_steps: int = 1000, T_max: float = 1.0) -> ShotPath:
    """Integrate the geodesic equation from ``p`` with initial velocity ``v``.

    Classical fixed-step RK4 with ``n_steps`` steps of ``T_max / n_steps``.
    Integration stops early, with ``hit_vertex`` set, when the trajectory
    enters a vertex ball; the returned nodes end there. Lifted sphere metrics
    are integrated in their base chart and mapped onto the sphere.
    """
    if metric.kind is MetricKind.LIFTED_SPHERE:
        shot = shoot(metric.base, p, v, n_steps, T_max)
        nodes = stereographic_fwd(shot.nodes)
        return ShotPath(nodes, Boundary.fixed(nodes[0], nodes[-1]), shot.hit_vertex, shot.t_end)
    x = np.asarray(p, dtype=float).copy()
    u = np.asarray(v, dtype=float).copy()
    if x.shape != (metric.dimension,) or u.shape != x.shape:
        raise ValueError("p and v must be chart vectors of the metric's dimension")
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    if metric.has_vertices and vertex_distance(metric, x[None, :])[0] < VERTEX_TOL:
        raise SingularStartError(f"start point {tuple(x)} lies in a vertex ball")
    rhs = _rhs_factory(metric)
    h = T_max / n_steps
    out = [x.copy()]
    vel = [u.copy()]
    hit = False
    t = 0.0
    for _ in range(n_steps):
        k1x, k1v = u, rhs(x, u)
        x2, u2 = x + 0.5 * h * k1x, u + 0.5 * h * k1v
        k2x, k2v = u2, rhs(x2, u2)
        x3, u3 = x + 0.5 * h * k2x, u + 0.5 * h * k2v
        k3x, k3v = u3, rhs(x3, u3)
        x4, u4 = x + h * k3x, u + h * k3v
        k4x, k4v = u4, rhs(x4, u4)
        x_old = x
        x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))) or _enters_vertex(metric, x_old, x):
            hit = True
            break
        t += h
        out.append(x.copy())
        vel.append(u.copy())
    nodes = np.array(out)
    vel = np.array(vel)
    if nodes.shape[0] < 3:
        pad = 3 - nodes.shape[0]
        nodes = np.vstack([nodes] + [nodes[-1:]] * pad)
        vel = np.vstack([vel] + [vel[-1:]] * pad)
    return ShotPath(nodes, Boundary.fixed(nodes[0], nodes[-1]), hit, t, vel)


def _enters_vertex(metric, a, b):
    """Whether the step from ``a`` to ``b`` comes within the vertex ball."""
    if not metric.has_vertices:
        return False
    if metric.kind is MetricKind.CONE:
        return b[0] < VERTEX_TOL
    d = b - a
    dd = float(d @ d)
    for v in metric.vertex_array:
        u = 0.0 if dd == 0.0 else min(max(float((v - a) @ d) / dd, 0.0), 1.0)
        if np.linalg.norm(a + u * d - v) < VERTEX_TOL:
            return True
    return False


def metric_speed(metric: MetricSpec, x, v) -> float:
    """``sqrt(g_x(v, v))`` at a single chart point."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    G = _metric_diag(metric, x[None, :])[0]
    return float(math.sqrt(np.sum(G * v * v)))


def initial_velocity(path: DiscretePath, window: int = 12, degree: int = 4) -> np.ndarray:
    """Chart velocity at ``s = 0`` from a least-squares polynomial fit.

    A one-sided difference quotient amplifies node noise by ``N``; fitting
    a low-degree polynomial over the first ``window`` nodes keeps the
    estimate accurate to the smoothness of the path.
    """
    window = min(window, path.N)
    degree = min(degree, window - 1)
    s = path.params[: window + 1]
    coef = np.polynomial.polynomial.polyfit(s, path.nodes[: window + 1], degree)
    return coef[1]
