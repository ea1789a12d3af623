"""Command-line front end.

``conegeo run CONFIG --out DIR`` solves every winding seed of a scenario and
writes ``results.json``, ``trace.csv`` and (optionally) ``paths.svg``.
``conegeo validate CONFIG`` performs the same checks without solving.

Exit status: 0 when every reported solution converged, 2 when some did not,
1 for configuration errors.

Configuration
-------------
A single JSON object::

    {
      "metric": {"kind": "EuclideanCone", "alpha": 0.5},
      "endpoints": {"p": [1, 0], "q": [1, 3.14159]},
      "seeds": [0, 1],
      "discretization": {"N": 128},
      "flow": {"max_iters": 2000, "tol_residual": 1e-6},
      "output": {"svg": true}
    }

``metric.kind`` is one of ``FlatEuclidean``, ``EuclideanCone`` (``alpha``),
``Conformal`` (``factor``, optional ``vertices``), ``LiftedSphere``
(``base`` metric, optional ``growth_exponent``) or ``Brachistochrone``.
The last needs a ``scenario`` section with ``potential``,
``energy_level`` and optionally ``singular_points``, ``growth_exponent``,
``lift`` and ``window``. ``closed_basepoint`` replaces ``endpoints`` for
loops. Cone points are polar ``(r, theta)``.

Scalar fields (``factor``, ``potential``) use a small expression language:
numbers, ``pi``, coordinates ``x1 .. xn``, ``|x|`` for the Euclidean norm,
``+ - * /``, ``^`` or ``**`` for powers, ``pow(a, b)``, ``exp``, ``log``,
``sqrt``, ``abs``, parentheses and ``|expr|`` for absolute values.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .brach import ScenarioError, build_scenario, deduplicate, scenario_boundary, solve_seeds
from .expr import ExpressionError
from .flows import FlowOptions
from .geometry import (
    BoundednessWarning,
    MetricError,
    MetricKind,
    MetricSpec,
    cone,
    conformal,
    flat,
    induced_sphere_metric,
    stereographic_fwd,
)
from .paths import Boundary

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2

METRIC_KINDS = ("FlatEuclidean", "EuclideanCone", "Conformal", "LiftedSphere", "Brachistochrone")


class ConfigError(ValueError):
    """Configuration problem with an optional 1-based source line."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def render(self, source):
        where = f"{source}:{self.line}" if self.line else str(source)
        return f"{where}: error: {self}"


def _key_line(text, key, default=1):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else default


def _require(d, key, text, where="top level", line=None):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"missing required key {key!r} ({where})", line or _brace_line(text))
    return d[key]


def _brace_line(text):
    i = text.find("{")
    return text.count("\n", 0, i) + 1 if i >= 0 else 1


@dataclass
class RunPlan:
    metric: MetricSpec
    boundary: Boundary
    seeds: tuple
    N: int
    opts: FlowOptions
    svg: bool
    scenario: object = None
    warnings: tuple = ()


def _points(value, name, text, dim=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers", _key_line(text, name)) from None
    if arr.ndim != 1 or (dim is not None and arr.shape[0] != dim):
        raise ConfigError(f"{name} must be a point of dimension {dim}", _key_line(text, name))
    return arr


def _build_metric(m, text):
    kind = _require(m, "kind", text, "metric", _key_line(text, "metric"))
    if kind not in METRIC_KINDS:
        raise ConfigError(f"unknown metric kind {kind!r}; expected one of {', '.join(METRIC_KINDS)}",
                          _key_line(text, "kind"))
    try:
        if kind == "FlatEuclidean":
            return flat(int(m.get("dimension", 2)))
        if kind == "EuclideanCone":
            return cone(float(_require(m, "alpha", text, "metric", _key_line(text, "metric"))))
        if kind == "Conformal":
            factor = _require(m, "factor", text, "metric", _key_line(text, "metric"))
            return conformal(str(factor), m.get("vertices", ()), int(m.get("dimension", 2)))
        if kind == "LiftedSphere":
            base = _build_metric(_require(m, "base", text, "metric", _key_line(text, "metric")), text)
            return induced_sphere_metric(base, m.get("growth_exponent"))
    except ExpressionError as exc:
        raise ConfigError(f"bad expression: {exc}", _key_line(text, "factor")) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad metric: {exc}", _key_line(text, "metric")) from None
    return None  # Brachistochrone: built from the scenario


def plan_from_text(text: str, seed_filter=None) -> RunPlan:
    """Parse and validate a configuration document."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object", 1)
    raw_metric = _require(cfg, "metric", text)
    collected = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BoundednessWarning)
        metric = _build_metric(raw_metric, text)
        scenario = None
        if "scenario" in cfg:
            sc = dict(cfg["scenario"])
            if "endpoints" in cfg:
                ends = cfg["endpoints"]
                sc.setdefault("p", _require(ends, "p", text, "endpoints", _key_line(text, "endpoints")))
                sc.setdefault("q", _require(ends, "q", text, "endpoints", _key_line(text, "endpoints")))
            sc.setdefault("seeds", cfg.get("seeds", [0]))
            for key in ("potential", "energy_level"):
                _require(sc, key, text, "scenario", _key_line(text, "scenario"))
            try:
                scenario = build_scenario(sc)
            except (ScenarioError, ExpressionError, MetricError) as exc:
                raise ConfigError(f"scenario rejected: {exc}", _key_line(text, "scenario")) from None
            if metric is not None:
                raise ConfigError('a scenario requires "metric": {"kind": "Brachistochrone"}',
                                  _key_line(text, "metric"))
            metric = scenario.metric
        elif metric is None:
            raise ConfigError("Brachistochrone metric needs a 'scenario' section", _key_line(text, "metric"))
        collected = [str(w.message) for w in caught if issubclass(w.category, BoundednessWarning)]

    if scenario is not None:
        boundary = scenario_boundary(scenario)
    elif "endpoints" in cfg:
        ends = cfg["endpoints"]
        chart_dim = metric.dimension - (1 if metric.kind is MetricKind.LIFTED_SPHERE else 0)
        p = _points(_require(ends, "p", text, "endpoints", _key_line(text, "endpoints")), "p", text, chart_dim)
        q = _points(_require(ends, "q", text, "endpoints", _key_line(text, "endpoints")), "q", text, chart_dim)
        if metric.kind is MetricKind.LIFTED_SPHERE:
            p, q = stereographic_fwd(np.array([p, q]))
        boundary = Boundary.fixed(p, q)
    elif "closed_basepoint" in cfg:
        chart_dim = metric.dimension - (1 if metric.kind is MetricKind.LIFTED_SPHERE else 0)
        p = _points(cfg["closed_basepoint"], "closed_basepoint", text, chart_dim)
        if metric.kind is MetricKind.LIFTED_SPHERE:
            p = stereographic_fwd(p)
        boundary = Boundary.closed(p)
    else:
        raise ConfigError("missing required key 'endpoints' (or 'closed_basepoint')", _brace_line(text))

    seeds = cfg.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(k, int) for k in seeds):
        raise ConfigError("seeds must be a list of integers", _key_line(text, "seeds"))
    if seed_filter is not None:
        seeds = [k for k in seeds if k == seed_filter]
        if not seeds:
            raise ConfigError(f"seed filter {seed_filter} matches no configured seed", _key_line(text, "seeds"))
    disc = cfg.get("discretization", {})
    N = disc.get("N", 128) if isinstance(disc, dict) else None
    if not isinstance(N, int) or N < 2:
        raise ConfigError("discretization.N must be an integer >= 2", _key_line(text, "discretization"))
    need = 8 * (max(abs(k) for k in seeds) + 1)
    if N < need:
        raise ConfigError(f"N={N} is too small for the requested windings (need N >= {need})",
                          _key_line(text, "discretization"))
    if any(k != 0 for k in seeds) and not metric.has_vertices:
        raise ConfigError("non-zero winding seeds need a metric with a vertex", _key_line(text, "seeds"))
    flow = cfg.get("flow", {})
    try:
        opts = FlowOptions(
            max_iters=int(flow.get("max_iters", 2000)),
            tol_residual=float(flow.get("tol_residual", 1e-6)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad flow options: {exc}", _key_line(text, "flow")) from None
    svg = bool(cfg.get("output", {}).get("svg", True))
    return RunPlan(metric, boundary, tuple(seeds), N, opts, svg, scenario, tuple(collected))


# ---------------------------------------------------------------------------
# output


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialise {type(x).__name__}")


def dumps_fixed(obj) -> str:
    """JSON with every float written at 17 significant digits.

    Top-level keys go on their own lines; nested values stay compact.
    """
    if isinstance(obj, dict):
        body = ",\n".join(f"  {json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items())
        return "{\n" + body + "\n}\n"
    return _fmt(obj) + "\n"


def _results(plan: RunPlan, runs, kept):
    sols = []
    for s in kept:
        d = {
            "winding": s.winding,
            "measured_winding": s.measured_winding,
            "energy": s.energy,
            "length": s.transit_time,
            "transit_time": s.transit_time if plan.scenario is not None else None,
            "converged": s.converged,
            "certificate": s.certificate.to_dict(),
            "nodes": s.path.nodes,
        }
        if s.sphere_path is not None:
            d["sphere_nodes"] = s.sphere_path.nodes
        sols.append(d)
    return {
        "metric": plan.metric.describe(),
        "boundary": plan.boundary.to_dict(),
        "N": plan.N,
        "seeds": list(plan.seeds),
        "converged": all(s.converged for s in kept),
        "solutions": sols,
        "runs": [
            {"winding": s.winding, "accepted": s.report.accepted, "rejected": s.report.rejected,
             "converged": s.converged, "kept": any(s is k for k in kept)}
            for s in runs
        ],
        "warnings": list(plan.warnings),
    }


def _write_trace(path, runs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "seed", "energy", "step", "event"])
        for s in runs:
            for it, E, step, event in s.report.trace_rows():
                w.writerow([it, s.winding, format(float(E), ".17g"), format(float(step), ".17g"), event])


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _svg_panel(curves, crosses, x0, title, size=360):
    pts = [c for _, nodes in curves for c in nodes] + list(crosses)
    pts = np.array([p for p in pts if np.all(np.isfinite(p))]) if pts else np.zeros((1, 2))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-12) * 1.1
    mid = 0.5 * (lo + hi)

    def tr(p):
        u = (p[0] - mid[0]) / span + 0.5
        v = (p[1] - mid[1]) / span + 0.5
        return x0 + 20 + u * (size - 40), 30 + (1 - v) * (size - 40)

    out = [f'<text x="{x0 + 20}" y="18" font-size="13" font-family="sans-serif">{title}</text>']
    for color, nodes in curves:
        xy = " ".join("%.3f,%.3f" % tr(p) for p in nodes if np.all(np.isfinite(p)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{xy}"/>')
    for c in crosses:
        x, y = tr(c)
        out.append(f'<path d="M{x - 5:.3f},{y - 5:.3f}L{x + 5:.3f},{y + 5:.3f}M{x - 5:.3f},{y + 5:.3f}'
                   f'L{x + 5:.3f},{y - 5:.3f}" stroke="black" stroke-width="1.5"/>')
    return out


def render_svg(plan: RunPlan, kept) -> str:
    """Chart polylines coloured by winding class, vertices as crosses.

    Cone solutions get a second panel with the developed (unrolled) view.
    """
    metric = plan.metric
    colors = {}
    curves = []
    for s in kept:
        colors.setdefault(s.winding, _PALETTE[len(colors) % len(_PALETTE)])
        curves.append((colors[s.winding], s.path.nodes[:, :2]))
    if metric.kind is MetricKind.LIFTED_SPHERE:
        verts = [v[:2] for v in metric.base.vertex_array] if metric.base.has_vertices else []
    elif metric.kind is MetricKind.CONE:
        verts = []
    else:
        verts = [v[:2] for v in metric.vertex_array]
    size = 360
    panels = _svg_panel(curves, verts, 0, "chart")
    width = size
    if metric.kind is MetricKind.CONE:
        dev = []
        for color, nodes in curves:
            r, th = nodes[:, 0], nodes[:, 1]
            phi = metric.alpha * (th - th[0])
            dev.append((color, np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)))
        panels += _svg_panel(dev, [np.zeros(2)], size, "developed")
        width = 2 * size
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{size}" '
            f'viewBox="0 0 {width} {size}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *panels, "</svg>"]) + "\n"


# ---------------------------------------------------------------------------
# commands


def _load(path, seed_filter=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}") from None
    return plan_from_text(text, seed_filter)


def cmd_validate(args) -> int:
    try:
        plan = _load(args.config, args.seed_filter)
    except ConfigError as exc:
        print(exc.render(args.config), file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        print(f"ok: {plan.metric.label}, N={plan.N}, seeds={list(plan.seeds)}")
        if plan.scenario is not None:
            print(f"energy level checked on {plan.scenario.samples_checked} sample points")
        for w in plan.warnings:
            print(f"warning: {w}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        plan = _load(args.config, args.seed_filter)
    except ConfigError as exc:
        print(exc.render(args.config), file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runs = solve_seeds(plan.metric, plan.boundary, plan.seeds, plan.N, plan.opts)
    kept = deduplicate(runs)
    (out / "results.json").write_text(dumps_fixed(_results(plan, runs, kept)))
    _write_trace(out / "trace.csv", runs)
    if plan.svg:
        (out / "paths.svg").write_text(render_svg(plan, kept))
    all_ok = all(s.converged for s in kept)
    if not args.quiet:
        for s in kept:
            flag = "converged" if s.converged else "NOT converged"
            print(f"winding {s.winding:+d}: energy {s.energy:.12g}, length {s.transit_time:.12g}, {flag}")
        for w in plan.warnings:
            print(f"warning: {w}")
    return EXIT_OK if all_ok else EXIT_PARTIAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conegeo", description="Geodesics on conical manifolds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernels.BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "solve a configuration"), ("validate", "check a configuration")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        if name == "run":
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed-filter", type=int, default=None, metavar="K", help="only run winding K")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return cmd_validate(args)


if __name__ == "__main__":
    sys.exit(main())
