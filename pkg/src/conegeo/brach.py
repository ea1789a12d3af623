"""Brachistochrones as geodesics of ``<,> / (E - U)``.

A particle of mass 2 and total energy ``E`` moving in the potential ``U``
has speed ``sqrt(E - U)``, so the time to traverse a curve equals its length
under the conformal metric with factor ``1 / (E - U)``. Points where ``U``
tends to minus infinity are vertices of that metric.

With ``lift`` set the problem is transplanted onto the sphere through the
inverse stereographic projection, which adds a vertex at the north pole.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import directed_hausdorff

from .expr import ScalarField, parse_field
from .flows import FlowOptions, FlowReport, flow_to_geodesic
from .geometry import (
    BoundednessWarning,
    MetricError,
    MetricKind,
    MetricSpec,
    brach_metric,
    check_energy_level,
    induced_sphere_metric,
    stereographic_fwd,
)
from .paths import Boundary, DiscretePath, NoCenterError, energy, length, seed_path, winding_number
from .verify import GeodesicCertificate

__all__ = [
    "BrachScenario",
    "Solution",
    "ScenarioError",
    "build_scenario",
    "transit_time",
    "solve_brachistochrone",
    "solve_seeds",
    "deduplicate",
    "scenario_boundary",
    "SINGULAR_RADIUS",
    "VALIDATION_SAMPLES",
]

SINGULAR_RADIUS = 1e-3
VALIDATION_SAMPLES = 10_000
DEDUP_DISTANCE = 1e-3


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class BrachScenario:
    potential: ScalarField
    energy_level: float
    singular_points: tuple
    growth_exponent: float | None
    p: tuple
    q: tuple
    seed_windings: tuple = (0,)
    lift: bool = False
    window: tuple | None = None
    chart_metric: MetricSpec | None = field(default=None, compare=False)
    metric: MetricSpec | None = field(default=None, compare=False)
    samples_checked: int = 0

    @property
    def dim(self):
        return self.potential.dim


def _default_window(points, dim):
    A = np.asarray(points, dtype=float).reshape(-1, dim)
    lo, hi = A.min(axis=0), A.max(axis=0)
    pad = 0.25 * max(float(np.max(hi - lo)), 1.0)
    return tuple((float(a - pad), float(b + pad)) for a, b in zip(lo, hi))


def _validation_sample(window, dim, n=VALIDATION_SAMPLES):
    if dim == 2:
        k = int(round(math.sqrt(n)))
        xs = np.linspace(window[0][0], window[0][1], k)
        ys = np.linspace(window[1][0], window[1][1], k)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)
    rng = np.random.default_rng(0)
    lo = np.array([w[0] for w in window])
    hi = np.array([w[1] for w in window])
    return lo + rng.random((n, dim)) * (hi - lo)


def build_scenario(config: dict) -> BrachScenario:
    """Validate a scenario description and attach its metric.

    Recognised keys: ``potential`` (expression in ``x1..xn``),
    ``energy_level``, ``singular_points``, ``growth_exponent``, ``p``,
    ``q``, ``seeds`` (winding numbers), ``lift`` and ``window`` (one
    ``[lo, hi]`` pair per coordinate, the region sampled for the energy
    check; it defaults to the padded bounding box of the endpoints and
    singular points).
    """
    try:
        dim = len(config["p"])
        U = config["potential"]
        U = U if isinstance(U, ScalarField) else parse_field(str(U), dim)
        E = float(config["energy_level"])
        p = tuple(float(c) for c in config["p"])
        q = tuple(float(c) for c in config["q"])
    except KeyError as exc:
        raise ScenarioError(f"scenario is missing key {exc.args[0]!r}") from None
    if len(q) != dim or U.dim != dim:
        raise ScenarioError("endpoints and potential disagree on the dimension")
    singular = tuple(tuple(float(c) for c in s) for s in config.get("singular_points", ()))
    growth = config.get("growth_exponent")
    growth = None if growth is None else float(growth)
    if growth is not None and not growth > 0:
        raise ScenarioError("growth exponent must be positive")
    lift = bool(config.get("lift", False))
    seeds = tuple(int(k) for k in config.get("seeds", (0,)))
    for name, x in (("p", p), ("q", q)):
        for s in singular:
            if math.dist(x, s) <= SINGULAR_RADIUS:
                raise ScenarioError(f"endpoint {name}={x} lies in the singular ball around {s}")
    window = config.get("window")
    if window is None:
        window = _default_window([p, q, *singular], dim)
    window = tuple((float(a), float(b)) for a, b in window)
    sample = _validation_sample(window, dim)
    n_checked = check_energy_level(U, E, np.vstack([sample, [p, q]]), singular, SINGULAR_RADIUS)
    chart = brach_metric(U, E, singular, dim)
    metric = chart
    if lift:
        metric = induced_sphere_metric(chart, growth)
        if growth is None:
            warnings.warn("no growth exponent given; boundedness of the lifted metric is unknown",
                          BoundednessWarning, stacklevel=2)
    return BrachScenario(U, E, singular, growth, p, q, seeds, lift, window, chart, metric, n_checked)


def transit_time(path: DiscretePath, scenario: BrachScenario) -> float:
    """Travel time along ``path``: its length under the scenario metric.

    Paths given in the chart use the chart metric; paths on the sphere
    (one more coordinate) use the lifted metric.
    """
    metric = scenario.chart_metric
    if path.dim == scenario.dim + 1:
        metric = scenario.metric if scenario.lift else induced_sphere_metric(scenario.chart_metric)
    L = length(path, metric)
    if not math.isfinite(L):
        raise MetricError("path leaves the region where E > U")
    return L


@dataclass
class Solution:
    winding: int
    path: DiscretePath
    energy: float
    transit_time: float
    certificate: GeodesicCertificate
    converged: bool
    report: FlowReport
    measured_winding: float | None = None
    sphere_path: DiscretePath | None = None

    def to_dict(self):
        return {
            "winding": self.winding,
            "measured_winding": self.measured_winding,
            "energy": self.energy,
            "transit_time": self.transit_time,
            "converged": self.converged,
            "certificate": self.certificate.to_dict(),
            "nodes": self.path.nodes.tolist(),
            "accepted": self.report.accepted,
            "rejected": self.report.rejected,
        }


def _to_chart(nodes):
    """Inverse projection that tolerates nodes at the north pole (sent to inf)."""
    y = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    denom = 1.0 - y[:, -1]
    out = np.full((y.shape[0], y.shape[1] - 1), np.inf)
    ok = denom > 0
    out[ok] = y[ok, :-1] / denom[ok, None]
    return out


def _solve_one(metric, boundary, k, N, opts):
    seed = seed_path(boundary, k, metric, N)
    path, report = flow_to_geodesic(seed, metric, opts)
    E = energy(path, metric)
    L = length(path, metric)
    sphere_path = None
    if metric.kind is MetricKind.LIFTED_SPHERE:
        sphere_path = path
        chart_nodes = _to_chart(path.nodes)
        path = DiscretePath(chart_nodes, Boundary.fixed(chart_nodes[0], chart_nodes[-1]))
    try:
        w = winding_number(sphere_path if sphere_path is not None else path, metric)
    except NoCenterError:
        w = None
    return Solution(k, path, E, L, report.final_certificate, report.converged, report, w, sphere_path)


def solve_seeds(metric: MetricSpec, boundary: Boundary, seeds, N: int, opts: FlowOptions = FlowOptions()) -> list:
    """One flow per winding seed, returned in seed order.

    Lifted sphere solutions carry the chart image in ``path`` and the
    sphere path in ``sphere_path``; ``transit_time`` holds the metric length.
    """
    seeds = tuple(int(k) for k in seeds)
    if not seeds:
        return []
    with ThreadPoolExecutor(max_workers=_thread_cap(len(seeds))) as pool:
        return list(pool.map(lambda k: _solve_one(metric, boundary, k, N, opts), seeds))


def deduplicate(solutions) -> list:
    """Sort by energy (ties by input order) and drop near-copies of cheaper ones."""
    order = sorted(range(len(solutions)),
                   key=lambda i: (not math.isfinite(solutions[i].energy), solutions[i].energy, i))
    kept = []
    for i in order:
        s = solutions[i]
        if any(_hausdorff(s.path.nodes, o.path.nodes) < DEDUP_DISTANCE for o in kept):
            continue
        kept.append(s)
    return kept


def _thread_cap(n):
    env = os.environ.get("CONE_GEO_THREADS")
    if env:
        try:
            return max(1, min(n, int(env)))
        except ValueError:
            pass
    return max(1, min(n, os.cpu_count() or 1))


def _hausdorff(a, b):
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return math.inf
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def solve_brachistochrone(scenario: BrachScenario, N: int = 128, opts: FlowOptions = FlowOptions(),
                          seeds=None) -> list:
    """Run one flow per winding seed and return the distinct results.

    Seeds run concurrently (at most ``CONE_GEO_THREADS`` at a time). The
    result list is ordered by energy, ties broken by seed order, and a
    solution within Hausdorff distance 1e-3 of a cheaper one is dropped.
    """
    seeds = tuple(scenario.seed_windings if seeds is None else seeds)
    return deduplicate(solve_seeds(scenario.metric, scenario_boundary(scenario), seeds, N, opts))


def scenario_boundary(scenario: BrachScenario) -> Boundary:
    if scenario.lift:
        fp, fq = stereographic_fwd(np.array([scenario.p, scenario.q]))
        return Boundary.fixed(fp, fq)
    return Boundary.fixed(scenario.p, scenario.q)
