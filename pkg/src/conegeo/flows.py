"""Deformation flows: curve shortening away from vertices, vertex slides, and
the driver that alternates them until the path certifies as a geodesic.

Shortening steps move every node that is neither a boundary node nor inside
a vertex ball along a preconditioned negative energy gradient. The
preconditioner is the tridiagonal Hessian of the energy with the metric
frozen on each segment (a discrete H^1 inner product), so flat problems are
solved in a single unit step. After each trial step the nodes are slid back
along the trial polyline to constant metric speed; at constant speed
``E = L^2`` and the energy gradient is ``2 L`` times the length gradient, so
the composition is still a descent step for the energy.

Vertex slides reparametrize a broken path without changing its image: the
break parameter moves along ``a(t) = (1 - t) tau + t sigma`` toward the
constant-speed position ``sigma = L1 / (L1 + L2)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import LinAlgError, solve_banded, solveh_banded

from .geometry import VERTEX_TOL, MetricKind, MetricSpec, conformal_factor, vertex_distance
from .paths import (
    BreakStructure,
    DiscretePath,
    break_structure,
    energy,
    energy_and_grad,
    _sample_polyline,
    reparam_constant_speed,
    segment_forms,
)

__all__ = [
    "FlowOptions",
    "FlowReport",
    "InvalidVariationError",
    "BreakCountError",
    "InconsistentBoundError",
    "first_variation",
    "admissible_mask",
    "shortening_step",
    "vertex_flow",
    "vertex_flow_energy",
    "vertex_flow_energy_rate",
    "tau_bounds",
    "flow_to_geodesic",
]


class InvalidVariationError(ValueError):
    def __init__(self, indices):
        super().__init__(f"variation must vanish at boundary and vertex nodes; offending indices {list(indices)}")
        self.indices = tuple(int(i) for i in indices)


class BreakCountError(ValueError):
    pass


class InconsistentBoundError(ValueError):
    pass


@dataclass(frozen=True)
class FlowOptions:
    """Step control for the flows.

    ``step0`` is the first trial step of the preconditioned direction, in
    which a unit step is the Newton step of the frozen-metric energy.
    ``max_move`` caps the largest node displacement of a trial step, in
    units of the mean chart segment length, so that no segment can hop
    over a thin high-cost region in one step (only conformal and lifted
    metrics sample a factor that a segment could skip; ``None`` disables
    the cap).
    With ``newton`` set, smooth (non-cone) metrics use the full energy
    Hessian, projected on the path normals, instead of the frozen-metric
    preconditioner.
    """

    max_iters: int = 2000
    tol_residual: float = 1e-6
    step0: float = 1.0
    beta: float = 0.5
    nu: float = 1e-4
    step_min: float = 1e-14
    constant_speed: bool = True
    max_move: float | None = 1.0
    newton: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if not self.step0 > 0.0:
            raise ValueError("step0 must be positive")
        if self.nu < 0.0:
            raise ValueError("nu must be non-negative")
        if self.max_move is not None and not self.max_move > 0.0:
            raise ValueError("max_move must be positive or None")


@dataclass
class FlowReport:
    energy_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    event_trace: list = field(default_factory=list)
    accepted: int = 0
    rejected: int = 0
    vertex_slides: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    final_certificate: object = None
    initial_energy: float = math.nan

    def to_dict(self):
        d = {
            "energy_trace": [float(e) for e in self.energy_trace],
            "step_trace": [float(s) for s in self.step_trace],
            "event_trace": list(self.event_trace),
            "accepted": self.accepted,
            "rejected": self.rejected,
            "vertex_slides": [list(map(float, v)) for v in self.vertex_slides],
            "converged": self.converged,
            "iterations": self.iterations,
            "initial_energy": float(self.initial_energy),
        }
        if self.final_certificate is not None:
            d["certificate"] = self.final_certificate.to_dict()
        return d

    def to_json(self):
        return json.dumps(self.to_dict())

    def trace_rows(self):
        """``(iteration, energy, step, event)`` tuples, one per iteration."""
        return list(zip(range(len(self.energy_trace)), self.energy_trace, self.step_trace, self.event_trace))


# ---------------------------------------------------------------------------
# first variation


def admissible_mask(path: DiscretePath, metric: MetricSpec) -> np.ndarray:
    """Nodes a variation may move: interior and outside every vertex ball."""
    mask = np.ones(path.N + 1, dtype=bool)
    mask[0] = mask[-1] = False
    if metric.has_vertices:
        mask &= vertex_distance(metric, path.nodes) >= VERTEX_TOL
    return mask


def first_variation(path: DiscretePath, metric: MetricSpec, w) -> float:
    """Directional derivative of the discrete energy along ``w``.

    For conformal metrics this is the midpoint-rule discretisation of
    ``2 int g(gamma) <gamma', w'> ds + int <grad g, w> |gamma'|^2 ds``.
    ``w`` must vanish at the boundary and at vertex-incident nodes.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != path.nodes.shape:
        raise ValueError(f"variation shape {w.shape} does not match path {path.nodes.shape}")
    bad = ~admissible_mask(path, metric) & np.any(w != 0.0, axis=1)
    if np.any(bad):
        raise InvalidVariationError(np.flatnonzero(bad))
    _, grad, _ = energy_and_grad(metric, path.nodes)
    return float(np.sum(grad * w))


# ---------------------------------------------------------------------------
# shortening


def _segment_weights(metric, nodes):
    """Per-segment, per-coordinate stiffness of the frozen-metric energy."""
    N = nodes.shape[0] - 1
    d = nodes.shape[1]
    if metric.kind is MetricKind.CONE:
        rbar = 0.5 * (nodes[:-1, 0] + nodes[1:, 0])
        w = np.empty((N, 2))
        w[:, 0] = 1.0
        w[:, 1] = (metric.alpha * rbar) ** 2
        return w
    if metric.kind is MetricKind.FLAT:
        return np.ones((N, d))
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    f = conformal_factor(metric, mid, check=False)
    f = np.where(np.isfinite(f) & (f > 0), f, 0.0)
    return np.repeat(f[:, None], d, axis=1)


def _precondition(metric, nodes, grad, free):
    """Solve the frozen-metric tridiagonal system for every coordinate."""
    N = nodes.shape[0] - 1
    W = _segment_weights(metric, nodes)
    out = np.zeros_like(grad)
    for k in range(nodes.shape[1]):
        w = W[:, k]
        pos = w[w > 0]
        floor = 1e-8 * (pos.mean() if pos.size else 1.0)
        w = np.maximum(w, floor)
        diag = np.zeros(N + 1)
        diag[:-1] += w
        diag[1:] += w
        upper = -w.copy()
        lower = -w.copy()
        # pinned nodes: identity rows, no coupling
        upper[~free[:-1]] = 0.0
        upper[~free[1:]] = 0.0
        lower[~free[1:]] = 0.0
        lower[~free[:-1]] = 0.0
        diag = 2.0 * N * diag
        diag[~free] = 1.0
        ab = np.zeros((3, N + 1))
        ab[0, 1:] = 2.0 * N * upper
        ab[1] = diag
        ab[2, :-1] = 2.0 * N * lower
        rhs = np.where(free, grad[:, k], 0.0)
        out[:, k] = solve_banded((1, 1), ab, rhs)
    out[~free] = 0.0
    return out


def _projectors(nodes, free, sphere):
    """Per-node orthogonal projector onto the path normal space (zero when pinned)."""
    M, d = nodes.shape
    t = np.zeros_like(nodes)
    t[1:-1] = nodes[2:] - nodes[:-2]
    if sphere:
        t = _tangent_project(nodes, t)
    norm = np.linalg.norm(t, axis=1, keepdims=True)
    t = np.divide(t, norm, out=np.zeros_like(t), where=norm > 0)
    P = np.eye(d)[None] - t[:, :, None] * t[:, None, :]
    if sphere:
        y = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
        P -= y[:, :, None] * y[:, None, :]
    P[~free] = 0.0
    return P


def _hessian_blocks(metric, nodes, free):
    """Diagonal and super-diagonal node blocks of the energy Hessian.

    The Hessian is block tridiagonal, so perturbing every third free node at
    once and differencing the gradient recovers it with ``6 d`` gradients.
    """
    M, d = nodes.shape
    eps = 1e-6 * (1.0 + float(np.max(np.abs(nodes))))
    A = np.zeros((M, d, d))
    C = np.zeros((M - 1, d, d))
    Cb = np.zeros((M - 1, d, d))
    idx = np.arange(M)
    for c in range(3):
        J = idx[free & (idx % 3 == c)]
        if J.size == 0:
            continue
        for k in range(d):
            Xp = nodes.copy()
            Xm = nodes.copy()
            Xp[J, k] += eps
            Xm[J, k] -= eps
            dg = (energy_and_grad(metric, Xp)[1] - energy_and_grad(metric, Xm)[1]) / (2.0 * eps)
            A[J, :, k] = dg[J]
            lo = J[J > 0]
            C[lo - 1, :, k] = dg[lo - 1]
            hi = J[J < M - 1]
            Cb[hi, k, :] = dg[hi + 1]
    both = free[:-1] & free[1:]
    C[both] = 0.5 * (C[both] + Cb[both])
    A = 0.5 * (A + np.transpose(A, (0, 2, 1)))
    return A, C


def _newton_direction(metric, nodes, grad, free, sphere):
    """Solve the normal-projected Newton system; ``grad`` is already projected.

    Falls back to Levenberg damping when the projected Hessian is not
    positive definite.
    """
    M, d = nodes.shape
    P = _projectors(nodes, free, sphere)
    A, C = _hessian_blocks(metric, nodes, free)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(C))):
        raise LinAlgError("non-finite Hessian")
    At = np.einsum("nij,njk,nkl->nil", P, A, P)
    Ct = np.einsum("nij,njk,nkl->nil", P[:-1], C, P[1:])
    tau = np.abs(np.einsum("nii->n", At)) / d
    scale = float(tau[free].mean()) if np.any(free) else 1.0
    tau = np.where(free & (tau > 0), tau, scale if scale > 0 else 1.0)
    Q = np.eye(d)[None] - P
    base = At + tau[:, None, None] * Q
    u = 2 * d - 1
    n = M * d
    rhs = -grad.reshape(n)
    lam = 0.0
    for _ in range(12):
        ab = np.zeros((u + 1, n))
        D = base + lam * tau[:, None, None] * np.eye(d)[None]
        for a in range(d):
            for b in range(d):
                if a <= b:
                    r = np.arange(M) * d + a
                    c = np.arange(M) * d + b
                    ab[u + r - c, c] = D[:, a, b]
                r = np.arange(M - 1) * d + a
                c = (np.arange(M - 1) + 1) * d + b
                ab[u + r - c, c] = Ct[:, a, b]
        try:
            x = solveh_banded(ab, rhs, lower=False)
            if np.all(np.isfinite(x)):
                return np.einsum("nij,nj->ni", P, x.reshape(M, d))
        except (LinAlgError, ValueError):
            pass
        lam = 1e-6 if lam == 0.0 else lam * 100.0
    raise LinAlgError("could not regularize the Newton system")


def _tangent_project(nodes, vec):
    """Remove the radial (sphere-normal) component at every node."""
    y = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    return vec - np.sum(vec * y, axis=1, keepdims=True) * y


def _normal_project(nodes, vec, sphere):
    """Drop the component of ``vec`` along the centred chord at each node."""
    t = np.zeros_like(nodes)
    t[1:-1] = nodes[2:] - nodes[:-2]
    if sphere:
        t = _tangent_project(nodes, t)
    norm = np.linalg.norm(t, axis=1, keepdims=True)
    t = np.divide(t, norm, out=np.zeros_like(t), where=norm > 0)
    return vec - np.sum(vec * t, axis=1, keepdims=True) * t


def _pinned_runs(path, metric):
    """Indices of nodes that stay put: boundary and vertex-incident."""
    return ~admissible_mask(path, metric)


def _spline_constant_speed(nodes, metric, tol=1e-13, max_sweeps=60):
    """Equal metric-length resampling along a cubic spline through ``nodes``.

    Sliding nodes along the polyline itself cuts the corners at the old
    nodes, which changes the length to first order in the slide whenever the
    path bends in the chart; the spline keeps that effect at higher order.
    """
    chord = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    if np.any(chord <= 0.0):
        raise ValueError("coincident nodes")
    u = np.concatenate([[0.0], np.cumsum(chord)])
    spline = CubicSpline(u, nodes, axis=0)
    sphere = metric.kind is MetricKind.LIFTED_SPHERE
    M = nodes.shape[0] - 1
    t = u.copy()
    for _ in range(max_sweeps):
        X = spline(t)
        X[0], X[-1] = nodes[0], nodes[-1]
        if sphere:
            X /= np.linalg.norm(X, axis=1, keepdims=True)
        d = np.sqrt(segment_forms(metric, X))
        mean = d.mean()
        if np.max(np.abs(d - mean)) <= tol * mean:
            return X
        c = np.concatenate([[0.0], np.cumsum(d)])
        t = np.interp(c[-1] * np.arange(M + 1) / M, c, t)
        t[0], t[-1] = u[0], u[-1]
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("resampling lost monotonicity")
    return X


def _constant_speed_legs(path: DiscretePath, metric: MetricSpec, pinned) -> DiscretePath:
    """Constant-speed resampling of each stretch between pinned nodes."""
    nodes = path.nodes.copy()
    idx = np.flatnonzero(pinned)
    smooth = metric.kind is not MetricKind.CONE
    for a, b in zip(idx[:-1], idx[1:]):
        if b - a < 2:
            continue
        if smooth and b - a >= 4:
            nodes[a:b + 1] = _spline_constant_speed(nodes[a:b + 1], metric)
            continue
        sub = DiscretePath(nodes[a:b + 1], path.boundary.fixed(nodes[a], nodes[b]))
        try:
            nodes[a:b + 1] = reparam_constant_speed(sub, metric, tol=1e-13).nodes
        except ValueError:
            continue
    return path.with_nodes(nodes)


def _safe_energy(path_nodes, metric):
    try:
        return energy(path_nodes, metric)
    except ValueError:
        return math.inf


def shortening_step(path: DiscretePath, metric: MetricSpec, opts: FlowOptions = FlowOptions()):
    """One backtracking descent step on the admissible nodes.

    Returns ``(new_path, accepted, step_used)``. A rejected step returns the
    input path unchanged with ``accepted=False``.
    """
    E0, grad, _ = energy_and_grad(metric, path.nodes)
    free = admissible_mask(path, metric)
    grad = np.where(free[:, None], grad, 0.0)
    sphere = metric.kind is MetricKind.LIFTED_SPHERE
    if sphere:
        grad = _tangent_project(path.nodes, grad)
    # along-path motion is undone by the resampling, so only normal motion
    # counts; projecting on both sides keeps the direction a descent direction
    normal = opts.constant_speed and metric.kind is not MetricKind.CONE
    if normal:
        grad = _normal_project(path.nodes, grad, sphere)
    direction = None
    if normal and opts.newton:
        try:
            direction = _newton_direction(metric, path.nodes, grad, free, sphere)
        except LinAlgError:
            direction = None
    if direction is None:
        direction = -_precondition(metric, path.nodes, grad, free)
    if sphere:
        direction = _tangent_project(path.nodes, direction)
    if normal:
        direction = _normal_project(path.nodes, direction, sphere)
    slope = float(np.sum(grad * direction))
    if not slope < 0.0 or not math.isfinite(E0):
        return path, False, 0.0
    pinned = ~free
    step = opts.step0
    if opts.max_move is not None and metric.kind in (MetricKind.CONFORMAL, MetricKind.LIFTED_SPHERE):
        h = float(np.mean(np.linalg.norm(np.diff(path.nodes, axis=0), axis=1)))
        biggest = float(np.max(np.linalg.norm(direction, axis=1)))
        if biggest * step > opts.max_move * h > 0.0:
            step = opts.max_move * h / biggest
    while step >= opts.step_min:
        trial = path.nodes + step * direction
        if sphere:
            trial = trial / np.linalg.norm(trial, axis=1, keepdims=True)
        elif metric.kind is MetricKind.CONE:
            # a node pushed past the apex lands on it instead of leaving the chart
            trial[:, 0] = np.maximum(trial[:, 0], 0.0)
        trial_path = path.with_nodes(trial)
        if opts.constant_speed:
            try:
                trial_path = _constant_speed_legs(trial_path, metric, pinned)
            except ValueError:
                step *= opts.beta
                continue
        E1 = _safe_energy(trial_path.nodes, metric)
        if E1 < E0 and E1 - E0 <= opts.nu * step * slope:
            return trial_path, True, step
        step *= opts.beta
    return path, False, 0.0


# ---------------------------------------------------------------------------
# vertex slides


def vertex_flow_energy(c0: float, sigma: float, tau: float, t: float) -> float:
    """``c0 (sigma^2 / a + (1 - sigma)^2 / (1 - a))`` with ``a = (1-t) tau + t sigma``."""
    a = (1.0 - t) * tau + t * sigma
    if a <= 0.0 or a >= 1.0:
        raise ZeroDivisionError(f"slide parameter a={a} must lie strictly inside (0, 1)")
    return c0 * (sigma**2 / a + (1.0 - sigma) ** 2 / (1.0 - a))


def vertex_flow_energy_rate(c0: float, sigma: float, tau: float, t: float) -> float:
    """Time derivative of :func:`vertex_flow_energy`, including ``a'(t) = sigma - tau``."""
    a = (1.0 - t) * tau + t * sigma
    if a <= 0.0 or a >= 1.0:
        raise ZeroDivisionError(f"slide parameter a={a} must lie strictly inside (0, 1)")
    return c0 * (sigma - tau) * ((1.0 - sigma) ** 2 / (1.0 - a) ** 2 - sigma**2 / a**2)


def tau_bounds(L1: float, L2: float, sigma: float, b: float):
    """Break parameters compatible with the energy bound ``b``.

    A path whose legs of lengths ``L1``, ``L2`` are traversed at constant
    speed with the break at ``tau`` has energy ``L1^2/tau + L2^2/(1-tau)``;
    the returned ``(lo, hi)`` is the set where that is at most ``b``. It
    collapses to ``sigma = L1/(L1+L2)`` at the minimal energy ``(L1+L2)^2``.
    """
    if not (L1 > 0 and L2 > 0 and 0.0 < sigma < 1.0):
        raise ValueError("need positive leg lengths and sigma in (0, 1)")
    # b tau^2 - (b + L1^2 - L2^2) tau + L1^2 <= 0
    B = b + L1 * L1 - L2 * L2
    disc = B * B - 4.0 * b * L1 * L1
    scale = max(B * B, 4.0 * b * L1 * L1)
    if disc < -1e-12 * scale:
        raise InconsistentBoundError(
            f"b={b} is below the least reachable energy {(L1 + L2) ** 2}"
        )
    root = math.sqrt(max(disc, 0.0))
    lo = (B - root) / (2.0 * b)
    hi = (B + root) / (2.0 * b)
    if lo > hi:
        raise InconsistentBoundError(f"empty bound interval ({lo}, {hi})")
    return lo, hi


def _vertex_point(metric, nodes, span):
    """Chart representative of the vertex hit by a break."""
    first, last, kind = span
    if kind == "node":
        return nodes[first].copy()
    # segment through a cone vertex: arrive along the incoming ray
    return np.array([0.0, nodes[first, 1]])


def _legs_polylines(metric, nodes, bs: BreakStructure):
    """Split the node polyline at each vertex into vertex-free pieces."""
    pieces = []
    start = nodes[:1]
    cur = [nodes[0]]
    k = 0
    for span in bs.node_spans:
        first, last, kind = span
        v = _vertex_point(metric, nodes, span)
        if kind == "node":
            cur.extend(nodes[k + 1:first])
            cur.append(v)
            pieces.append(np.array(cur))
            v_out = nodes[last].copy()
            cur = [v_out]
            k = last
        else:
            cur.extend(nodes[k + 1:first + 1])
            cur.append(v)
            pieces.append(np.array(cur))
            v_out = np.array([0.0, nodes[last, 1]])
            cur = [v_out]
            k = first
    cur.extend(nodes[k + 1:])
    pieces.append(np.array(cur))
    del start
    return pieces


def _must_snap(metric, pieces, m):
    """Whether break ``m`` has to sit on a grid node.

    Only a cone crossing whose incoming and outgoing rays are at least ``pi``
    apart in the development can be carried by a segment.
    """
    if metric.kind is not MetricKind.CONE:
        return True
    th_in = pieces[m][-2, 1] if len(pieces[m]) > 1 else pieces[m][-1, 1]
    th_out = pieces[m + 1][1, 1] if len(pieces[m + 1]) > 1 else pieces[m + 1][0, 1]
    return abs(metric.alpha * (th_out - th_in)) < math.pi


def _resample_broken(path, metric, bs, new_params):
    """Rebuild the nodes so break ``m`` sits at ``new_params[m]`` and each leg
    is traversed at constant speed between consecutive breaks."""
    nodes = path.nodes
    N = path.N
    pieces = _legs_polylines(metric, nodes, bs)
    segs = [np.sqrt(segment_forms(metric, p)) if len(p) > 1 else np.zeros(0) for p in pieces]
    lens = [float(s.sum()) for s in segs]
    params = list(new_params)
    for m in range(len(params)):
        if _must_snap(metric, pieces, m):
            params[m] = round(params[m] * N) / N
    edges = [0.0] + params + [1.0]
    s = np.linspace(0.0, 1.0, N + 1)
    out = np.empty_like(nodes)
    m_of = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(pieces) - 1)
    for m in range(len(pieces)):
        idx = np.flatnonzero(m_of == m)
        if idx.size == 0:
            continue
        lo, hi = edges[m], edges[m + 1]
        if len(pieces[m]) < 2 or lens[m] == 0.0 or hi <= lo:
            out[idx] = pieces[m][0]
            continue
        frac = (s[idx] - lo) / (hi - lo)
        out[idx] = _sample_polyline(metric, pieces[m], segs[m], frac * lens[m])
        # a node landing on the next break is the vertex itself
        on_break = np.abs(s[idx] - hi) < 1e-14
        if m + 1 < len(pieces) and np.any(on_break):
            out[idx[on_break]] = pieces[m][-1]
    out[0], out[-1] = nodes[0], nodes[-1]
    return path.with_nodes(out), lens


def vertex_flow(path: DiscretePath, metric: MetricSpec, t: float) -> DiscretePath:
    """Slide the single break of ``path`` to ``a(t) = (1-t) tau + t sigma``.

    The image is unchanged; each leg is resampled at constant speed over its
    new parameter interval. Breaks that must sit on a node (all breaks of
    non-cone metrics) are snapped to the nearest grid parameter.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError("flow time must lie in [0, 1]")
    bs = break_structure(path, metric)
    if bs.count != 1:
        raise BreakCountError(f"vertex_flow needs exactly one break, found {bs.count}")
    tau = float(bs.break_params[0])
    if not 0.0 < tau < 1.0:
        raise BreakCountError(f"break parameter {tau} is not interior")
    L1, L2 = bs.legs
    if L1 + L2 == 0.0:
        return path
    sigma = L1 / (L1 + L2)
    a = (1.0 - t) * tau + t * sigma
    new, _ = _resample_broken(path, metric, bs, [a])
    return new


def _capture(path, metric, E):
    """Try parking the node nearest each vertex on it.

    A path that wants to run through a vertex approaches it ever more
    slowly, because the energy is not smooth there. Moving the closest free
    node onto the vertex (and re-spacing the legs) is an admissible
    deformation, kept only when it lowers the energy.
    """
    nodes = path.nodes
    free = admissible_mask(path, metric)
    if not np.any(free):
        return None
    seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    reach = np.zeros(len(nodes))
    reach[1:-1] = np.maximum(seg[:-1], seg[1:])
    best = None
    for v in metric.vertex_array:
        dist = np.linalg.norm(nodes - v, axis=1)
        dist[~free] = np.inf
        j = int(np.argmin(dist))
        if not dist[j] < reach[j]:
            continue
        moved = nodes.copy()
        moved[j] = v
        candidate = path.with_nodes(moved)
        pinned = ~admissible_mask(candidate, metric)
        try:
            candidate = _constant_speed_legs(candidate, metric, pinned)
        except ValueError:
            continue
        E_c = _safe_energy(candidate.nodes, metric)
        if E_c < E and (best is None or E_c < best[1]):
            best = (candidate, E_c)
    return best


def _slide_all(path, metric, bs, t=1.0):
    """Move every break toward its constant-speed position together."""
    total = sum(bs.legs)
    if total == 0.0:
        return path
    cum = np.cumsum(bs.legs)[:-1] / total
    targets = [(1.0 - t) * tau + t * sig for tau, sig in zip(bs.break_params, cum)]
    new, _ = _resample_broken(path, metric, bs, targets)
    return new


# ---------------------------------------------------------------------------
# driver


def flow_to_geodesic(path: DiscretePath, metric: MetricSpec, opts: FlowOptions = FlowOptions()):
    """Alternate shortening and vertex slides until the certificate passes.

    Returns ``(path, report)``; ``report.converged`` is False when
    ``max_iters`` runs out first.
    """
    from .verify import certify_geodesic

    report = FlowReport()
    current = path
    if opts.constant_speed:
        try:
            current = _constant_speed_legs(current, metric, _pinned_runs(current, metric))
        except ValueError:
            pass
    E = _safe_energy(current.nodes, metric)
    report.initial_energy = E
    for it in range(opts.max_iters):
        cert = certify_geodesic(current, metric, opts.tol_residual)
        if cert.passed:
            report.converged = True
            break
        report.iterations = it + 1
        new, ok, step = shortening_step(current, metric, opts)
        event = "shorten"
        if ok:
            current = new
            E = _safe_energy(current.nodes, metric)
            report.accepted += 1
        else:
            report.rejected += 1
            event = "reject"
        if metric.has_vertices and metric.kind is not MetricKind.CONE:
            captured = _capture(current, metric, E)
            if captured is not None:
                current, E = captured
                event += "+capture"
        bs = break_structure(current, metric)
        if bs:
            slid = _slide_all(current, metric, bs, 1.0)
            E_slid = _safe_energy(slid.nodes, metric)
            if E_slid < E:
                before = tuple(bs.break_params)
                after = tuple(break_structure(slid, metric).break_params)
                report.vertex_slides.append((before[0], after[0] if after else float("nan")))
                current, E = slid, E_slid
                event += "+slide"
        report.energy_trace.append(E)
        report.step_trace.append(step)
        report.event_trace.append(event)
        if not ok and event == "reject":
            # no admissible descent left; residual is as small as the step allows
            break
    report.final_certificate = certify_geodesic(current, metric, opts.tol_residual)
    report.converged = report.final_certificate.passed
    return current, report
