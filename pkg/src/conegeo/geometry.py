"""Chart metrics with isolated singular points.

Four kinds of metric are supported:

``FLAT``
    The identity metric on R^n, no vertices.
``CONE``
    ``dr^2 + alpha^2 r^2 dtheta^2`` on the polar chart ``(r, theta)``, with the
    vertex at ``r = 0``. Angles are stored unwrapped so winding is explicit.
``CONFORMAL``
    ``g(x) * delta_ij`` for a scalar factor ``g`` given as a :class:`ScalarField`,
    with an explicit finite vertex list where the factor degenerates.
``LIFTED_SPHERE``
    The pullback of a conformal metric on R^n to the unit sphere S^n through
    the inverse stereographic projection. Points are ambient coordinates in
    R^(n+1); the north pole is a vertex where the form vanishes.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .expr import ScalarField, parse_field

__all__ = [
    "VERTEX_TOL",
    "MetricKind",
    "MetricSpec",
    "MetricError",
    "SingularityError",
    "UnsupportedKindError",
    "PoleError",
    "NotOnSphereError",
    "EnergyLevelError",
    "BoundednessWarning",
    "flat",
    "cone",
    "conformal",
    "metric_eval",
    "metric_grad",
    "conformal_factor",
    "vertex_distance",
    "stereographic_fwd",
    "stereographic_inv",
    "stereographic_inv_jacobian",
    "induced_sphere_metric",
    "brach_metric",
    "check_energy_level",
    "cone_to_cartesian",
    "cartesian_metric",
]

VERTEX_TOL = 1e-9
# chart handoff for the lifted sphere: north-pole chart below, south-pole chart above
_HANDOFF_HEIGHT = 0.0


class MetricError(ValueError):
    """A metric could not be evaluated at a point."""


class SingularityError(MetricError):
    pass


class UnsupportedKindError(MetricError):
    pass


class PoleError(MetricError):
    pass


class NotOnSphereError(MetricError):
    pass


class EnergyLevelError(MetricError):
    """The energy level does not exceed the potential at some point."""

    def __init__(self, point, potential, energy):
        point = tuple(float(c) for c in np.ravel(point))
        super().__init__(
            f"energy level {energy!r} does not exceed U={potential!r} at x={point}"
        )
        self.point = point


class BoundednessWarning(UserWarning):
    pass


class MetricKind(str, enum.Enum):
    FLAT = "FlatEuclidean"
    CONE = "EuclideanCone"
    CONFORMAL = "Conformal"
    LIFTED_SPHERE = "LiftedSphere"


@dataclass(frozen=True)
class MetricSpec:
    """Immutable description of a chart metric and its singular set."""

    kind: MetricKind
    dimension: int
    vertices: tuple = ()
    alpha: float | None = None
    factor: ScalarField | None = field(default=None, compare=False)
    base: "MetricSpec | None" = field(default=None, compare=False)
    growth_exponent: float | None = None
    boundedness_warning: bool = False
    label: str = ""

    def __post_init__(self):
        if self.dimension < 2:
            raise ValueError("chart dimension must be at least 2")
        if self.kind is MetricKind.CONE and not (self.alpha and self.alpha > 0):
            raise ValueError("cone angle ratio alpha must be positive")
        if self.kind is MetricKind.CONFORMAL and self.factor is None:
            raise ValueError("conformal metric needs a factor")

    @property
    def vertex_array(self):
        if not self.vertices:
            return np.zeros((0, self.dimension))
        return np.asarray(self.vertices, dtype=float)

    @property
    def has_vertices(self):
        return len(self.vertices) > 0

    def describe(self):
        out = {"kind": self.kind.value, "dimension": self.dimension,
               "vertices": [list(v) for v in self.vertices]}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.factor is not None:
            out["factor"] = self.factor.text
        if self.base is not None:
            out["base"] = self.base.describe()
        if self.kind is MetricKind.LIFTED_SPHERE:
            out["boundedness_warning"] = self.boundedness_warning
        return out


def flat(dim: int = 2) -> MetricSpec:
    return MetricSpec(MetricKind.FLAT, dim, label="flat")


def cone(alpha: float) -> MetricSpec:
    """Euclidean cone of angle ``2*pi*alpha`` in the polar chart."""
    return MetricSpec(MetricKind.CONE, 2, vertices=((0.0, 0.0),), alpha=float(alpha),
                      label=f"cone(alpha={alpha})")


def conformal(factor, vertices=(), dim: int = 2) -> MetricSpec:
    """Conformal metric ``g(x) delta_ij``; ``factor`` is a ScalarField or text."""
    if isinstance(factor, str):
        factor = parse_field(factor, dim)
    verts = tuple(tuple(float(c) for c in v) for v in vertices)
    for v in verts:
        if len(v) != factor.dim:
            raise ValueError(f"vertex {v} does not match chart dimension {factor.dim}")
    return MetricSpec(MetricKind.CONFORMAL, factor.dim, vertices=verts, factor=factor,
                      label=f"conformal({factor.text})")


# ---------------------------------------------------------------------------
# vertex handling


def vertex_distance(metric: MetricSpec, x) -> np.ndarray:
    """Chart distance from each point in ``x`` (shape (..., d)) to the vertex set."""
    x = np.asarray(x, dtype=float)
    if metric.kind is MetricKind.CONE:
        return np.abs(x[..., 0])
    if not metric.has_vertices:
        return np.full(x.shape[:-1], np.inf)
    V = metric.vertex_array
    d = np.linalg.norm(x[..., None, :] - V, axis=-1)
    return d.min(axis=-1)


def _at_vertex(metric, x):
    return vertex_distance(metric, x) < VERTEX_TOL


# ---------------------------------------------------------------------------
# conformal factor and evaluation


def _check_factor(values, points, metric):
    bad = ~np.isfinite(values) | (values <= 0)
    if np.any(bad):
        idx = np.flatnonzero(bad.ravel())[0]
        pt = points.reshape(-1, points.shape[-1])[idx]
        raise MetricError(
            f"{metric.label or metric.kind.value}: factor undefined or non-positive "
            f"({values.ravel()[idx]!r}) at x={tuple(float(c) for c in pt)}"
        )


def _lifted_factor(metric, y):
    """Conformal factor of the lifted metric in ambient coordinates."""
    y = np.asarray(y, dtype=float)
    n = metric.dimension - 1
    norm = np.linalg.norm(y, axis=-1, keepdims=True)
    yh = y / norm
    top = yh[..., n]
    low = yh[..., :n]
    out = np.empty(y.shape[:-1])
    north = top < _HANDOFF_HEIGHT
    base = metric.base
    if np.any(north):
        x = low[north] / (1.0 - top[north])[:, None]
        out[north] = _base_factor(base, x) * (1.0 + np.sum(x * x, axis=-1)) ** 2 / 4.0
    south = ~north
    if np.any(south):
        z = low[south] / (1.0 + top[south])[:, None]
        zz = np.sum(z * z, axis=-1)
        vals = np.zeros(zz.shape)
        live = zz > 0.0
        with np.errstate(all="ignore"):
            x = z[live] / zz[live][:, None]
            vals[live] = _base_factor(base, x) * (1.0 + zz[live]) ** 2 / (4.0 * zz[live] ** 2)
        # the lifted form is defined to vanish at the north pole
        vals[~np.isfinite(vals)] = 0.0
        out[south] = vals
    pole = np.linalg.norm(yh - _north(metric.dimension), axis=-1) < VERTEX_TOL
    out[pole] = 0.0
    return out


def _base_factor(base, x):
    if base.kind is MetricKind.FLAT:
        return np.ones(x.shape[:-1])
    with np.errstate(all="ignore"):
        return base.factor(x)


def _north(ambient_dim):
    n = np.zeros(ambient_dim)
    n[-1] = 1.0
    return n


def conformal_factor(metric: MetricSpec, x, check: bool = True) -> np.ndarray:
    """Scalar factor ``g(x)`` for conformal-type metrics (vectorised).

    Vertex points get the factor's degenerate limit 0. With ``check`` set, a
    non-finite or non-positive value elsewhere raises :class:`MetricError`.
    """
    x = np.asarray(x, dtype=float)
    if metric.kind is MetricKind.FLAT:
        return np.ones(x.shape[:-1])
    if metric.kind is MetricKind.CONFORMAL:
        vals = metric.factor(x)
        at_v = _at_vertex(metric, x)
        vals = np.where(at_v, 0.0, vals)
        if check:
            _check_factor(np.where(at_v, 1.0, vals), x, metric)
        return vals
    if metric.kind is MetricKind.LIFTED_SPHERE:
        vals = _lifted_factor(metric, x)
        if check:
            _check_factor(np.where(_at_vertex(metric, x), 1.0, vals), x, metric)
        return vals
    raise UnsupportedKindError(f"{metric.kind.value} metric has no scalar factor")


def conformal_factor_grad(metric: MetricSpec, x) -> np.ndarray:
    """Gradient of the conformal factor, shape (..., d). No vertex checks."""
    x = np.asarray(x, dtype=float)
    if metric.kind is MetricKind.FLAT:
        return np.zeros(x.shape)
    if metric.kind is MetricKind.CONFORMAL:
        return metric.factor.grad(x)
    if metric.kind is MetricKind.LIFTED_SPHERE:
        return _lifted_factor_grad(metric, x)
    raise UnsupportedKindError(f"{metric.kind.value} metric has no scalar factor")


def _lifted_factor_grad(metric, y):
    """Chain rule through ``y -> y/|y| -> x = pi^{-1}(y/|y|)``.

    With ``F(x) = g(x) (1 + |x|^2)^2 / 4`` the lifted factor is ``F(x(y))``;
    its derivative in the unit-sphere coordinates is
    ``(grad F, grad F . x) / (1 - y_top)``, then projected tangentially
    and scaled by ``1/|y|`` for the radial normalisation. The pole value is
    pinned to 0 like the factor itself.
    """
    y = np.asarray(y, dtype=float)
    n = metric.dimension - 1
    norm = np.linalg.norm(y, axis=-1, keepdims=True)
    yh = y / norm
    denom = 1.0 - yh[..., n:]
    base = metric.base
    with np.errstate(all="ignore"):
        x = yh[..., :n] / denom
        xx = np.sum(x * x, axis=-1, keepdims=True)
        g = _base_factor(base, x)[..., None]
        dg = np.zeros(x.shape) if base.kind is MetricKind.FLAT else base.factor.grad(x)
        dF = dg * (1.0 + xx) ** 2 / 4.0 + g * (1.0 + xx) * x
        d_unit = np.concatenate([dF, np.sum(dF * x, axis=-1, keepdims=True)], axis=-1) / denom
        out = (d_unit - np.sum(d_unit * yh, axis=-1, keepdims=True) * yh) / norm
    out[~np.all(np.isfinite(out), axis=-1)] = 0.0
    pole = np.linalg.norm(yh - _north(metric.dimension), axis=-1) < VERTEX_TOL
    out[pole] = 0.0
    return out


def metric_eval(metric: MetricSpec, x) -> np.ndarray:
    """Metric matrix ``g(x)`` at a single chart point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (metric.dimension,):
        raise MetricError(f"point {x.tolist()} is not in a {metric.dimension}-d chart")
    d = metric.dimension
    if metric.kind is MetricKind.CONE:
        r = x[0]
        if r < 0:
            raise MetricError(f"negative radius at x={tuple(x)}")
        ang = 0.0 if r < VERTEX_TOL else (metric.alpha * r) ** 2
        return np.diag([1.0, ang])
    return float(conformal_factor(metric, x[None, :])[0]) * np.eye(d)


def metric_grad(metric: MetricSpec, x) -> np.ndarray:
    """Gradient of the scalar conformal factor at an off-vertex point."""
    x = np.asarray(x, dtype=float)
    if metric.kind is MetricKind.CONE:
        raise UnsupportedKindError("the cone metric is not conformal in its polar chart")
    if metric.kind is MetricKind.FLAT:
        return np.zeros(metric.dimension)
    if vertex_distance(metric, x[None, :])[0] < VERTEX_TOL:
        raise SingularityError(f"gradient requested at vertex x={tuple(float(c) for c in x)}")
    g = conformal_factor_grad(metric, x[None, :])[0]
    if not np.all(np.isfinite(g)):
        raise MetricError(f"gradient undefined at x={tuple(float(c) for c in x)}")
    return g


# ---------------------------------------------------------------------------
# stereographic projection from the north pole


def stereographic_fwd(x) -> np.ndarray:
    """Map points of R^n (shape (..., n)) onto S^n in R^(n+1)."""
    x = np.asarray(x, dtype=float)
    s = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([2.0 * x, s - 1.0], axis=-1) / (s + 1.0)


def stereographic_inv(y) -> np.ndarray:
    """Inverse projection ``x_i = y_i / (1 - y_{n+1})``."""
    y = np.asarray(y, dtype=float)
    norm = np.linalg.norm(y, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-12):
        raise NotOnSphereError(f"point with |y|={norm.ravel()[np.argmax(np.abs(norm - 1))]!r} is not on the sphere")
    top = y[..., -1]
    low = y[..., :-1]
    if np.any(top >= 1.0):
        raise PoleError("the north pole has no image in the chart")
    # on the upper half 1 - y_top cancels; use 1 - y_top = |y_low|^2 / (1 + y_top)
    ll = np.sum(low * low, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = low * ((1.0 + top) / ll)[..., None]
    out = np.where((top > 0.0)[..., None] & (ll > 0.0)[..., None], upper, low / (1.0 - top)[..., None])
    if not np.all(np.isfinite(out)):
        raise PoleError("the north pole has no image in the chart")
    return out


def stereographic_inv_jacobian(y) -> np.ndarray:
    """Ambient Jacobian of the inverse projection at ``y``, shape (n, n+1)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1] - 1
    denom = 1.0 - y[-1]
    if denom <= 0.0:
        raise PoleError("the north pole has no image in the chart")
    J = np.zeros((n, n + 1))
    J[:, :n] = np.eye(n) / denom
    J[:, n] = y[:n] / denom**2
    return J


def induced_sphere_metric(base: MetricSpec, growth_exponent: float | None = None) -> MetricSpec:
    """Lift a conformal metric on R^n to S^n through the stereographic chart.

    ``growth_exponent`` is the exponent ``a`` in ``-U(x) = O(|x|^a)`` when the
    base is a brachistochrone metric; ``a <= 2`` marks the lifted metric with
    a boundedness warning (not fatal).
    """
    if base.kind not in (MetricKind.CONFORMAL, MetricKind.FLAT):
        raise UnsupportedKindError("only conformal or flat metrics can be lifted")
    n = base.dimension
    north = tuple(_north(n + 1))
    verts = [north]
    if base.has_vertices:
        verts += [tuple(map(float, v)) for v in stereographic_fwd(base.vertex_array)]
    flagged = growth_exponent is not None and growth_exponent <= 2
    if flagged:
        warnings.warn(
            f"growth exponent {growth_exponent} <= 2: the lifted metric may be unbounded",
            BoundednessWarning,
            stacklevel=2,
        )
    return MetricSpec(
        MetricKind.LIFTED_SPHERE,
        n + 1,
        vertices=tuple(verts),
        base=base,
        growth_exponent=growth_exponent,
        boundedness_warning=flagged,
        label=f"lifted({base.label})",
    )


# ---------------------------------------------------------------------------
# brachistochrone metric


def brach_metric(potential, energy: float, singular_points=(), dim: int = 2,
                 sample=None) -> MetricSpec:
    """Conformal metric ``<,> / (E - U(x))`` for a potential ``U``.

    Singular points of ``U`` (where it tends to minus infinity) become
    vertices; the factor extends by 0 there. If ``sample`` points are given
    the energy level is checked on them.
    """
    if isinstance(potential, str):
        potential = parse_field(potential, dim)
    E = float(energy)
    factor = _factor_from_potential(potential, E)
    metric = conformal(factor, vertices=singular_points, dim=potential.dim)
    if sample is not None:
        check_energy_level(potential, E, sample, singular_points)
    return metric


def _factor_from_potential(potential, E):
    import sympy as sp

    from .expr import _compile

    expression = 1 / (sp.Float(E) - potential.expression)
    return _compile(f"1/({E!r} - ({potential.text}))", potential.dim, expression)


def check_energy_level(potential, energy, points, singular_points=(), radius: float = 1e-3):
    """Raise :class:`EnergyLevelError` at the first sample with ``U >= E``.

    Points within ``radius`` of a singular point are skipped.
    """
    pts = np.asarray(points, dtype=float)
    if singular_points:
        S = np.asarray(singular_points, dtype=float)
        dist = np.linalg.norm(pts[:, None, :] - S[None], axis=-1).min(axis=1)
        pts = pts[dist > radius]
    U = potential(pts)
    bad = ~(U < energy)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise EnergyLevelError(pts[i], float(U[i]), energy)
    return pts.shape[0]


# ---------------------------------------------------------------------------
# cone helpers


def cone_to_cartesian(polar) -> np.ndarray:
    """Chart ``(r, theta)`` to planar ``(r cos theta, r sin theta)``."""
    polar = np.asarray(polar, dtype=float)
    r, th = polar[..., 0], polar[..., 1]
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def cartesian_metric(metric: MetricSpec, p) -> np.ndarray:
    """Metric matrices in planar Cartesian coordinates, shape (..., 2, 2).

    For cones the polar form becomes ``P_r + alpha^2 P_t`` with the radial and
    tangential projectors; conformal and flat metrics are unchanged.
    """
    p = np.asarray(p, dtype=float)
    if metric.kind is MetricKind.CONE:
        r = np.linalg.norm(p, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = p / r[..., None]
        u = np.where(r[..., None] > 0, u, 0.0)
        Pr = u[..., :, None] * u[..., None, :]
        I = np.broadcast_to(np.eye(2), Pr.shape)
        return Pr + metric.alpha**2 * (I - Pr)
    if metric.kind in (MetricKind.FLAT, MetricKind.CONFORMAL):
        f = conformal_factor(metric, p, check=False)
        return f[..., None, None] * np.eye(metric.dimension)
    raise UnsupportedKindError(f"{metric.kind.value} has no planar chart")
