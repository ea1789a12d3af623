import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conegeo.geometry import conformal, cone, flat, induced_sphere_metric, stereographic_fwd
from conegeo.oracle import cone_unroll_geodesic
from conegeo.paths import Boundary, DiscretePath, break_structure, energy, length, seed_path
from conegeo.flows import (
    BreakCountError,
    FlowOptions,
    InconsistentBoundError,
    InvalidVariationError,
    first_variation,
    flow_to_geodesic,
    shortening_step,
    tau_bounds,
    vertex_flow,
    vertex_flow_energy,
    vertex_flow_energy_rate,
)

from helpers import jagged_flat_seed, radial_broken_path, random_broken_geodesic


def chord(p, q, N):
    return DiscretePath.from_nodes(np.linspace(p, q, N + 1))


def central_difference(path, metric, w, h=1e-6):
    up = energy(path.nodes + h * w, metric)
    down = energy(path.nodes - h * w, metric)
    return (up - down) / (2 * h)


class TestFirstVariation:
    def test_straight_path_is_critical(self, rng):
        p = chord([0.0, 0.0], [2.0, 1.0], 32)
        w = rng.normal(size=p.nodes.shape)
        w[0] = w[-1] = 0.0
        assert abs(first_variation(p, flat(2), w)) < 1e-10

    def test_single_node_is_discrete_laplacian(self, rng):
        N = 12
        p = DiscretePath.from_nodes(rng.normal(size=(N + 1, 2)))
        x = p.nodes
        for i in (1, 5, N - 1):
            w = np.zeros_like(x)
            w[i] = rng.normal(size=2)
            expected = 2 * N * float((2 * x[i] - x[i - 1] - x[i + 1]) @ w[i])
            assert first_variation(p, flat(2), w) == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_laplacian_pairing_symbolically_at_n4(self):
        N = 4
        X = sp.Matrix(N + 1, 2, lambda i, j: sp.Symbol(f"x{i}_{j}"))
        E = N * sum(((X[k + 1, j] - X[k, j]) ** 2 for k in range(N) for j in range(2)), sp.Integer(0))
        for i in range(1, N):
            for j in range(2):
                lhs = sp.diff(E, X[i, j])
                rhs = 2 * N * (2 * X[i, j] - X[i - 1, j] - X[i + 1, j])
                assert sp.expand(lhs - rhs) == 0

    def test_boundary_support_rejected(self):
        p = chord([0.0, 0.0], [1.0, 0.0], 8)
        w = np.zeros_like(p.nodes)
        w[0, 1] = 1.0
        with pytest.raises(InvalidVariationError) as err:
            first_variation(p, flat(2), w)
        assert err.value.indices == (0,)

    def test_vertex_support_rejected(self):
        p = radial_broken_path(1.5, 1.0, 1.0, 0.5, 8)
        w = np.zeros_like(p.nodes)
        w[3:6] = 1.0
        with pytest.raises(InvalidVariationError) as err:
            first_variation(p, cone(1.5), w)
        assert err.value.indices == (4,)

    @pytest.mark.parametrize("kind", ["flat", "conformal", "cone", "lifted"])
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_matches_central_differences(self, kind, seed):
        rng = np.random.default_rng(seed)
        N = 24
        s = np.linspace(0, 1, N + 1)[:, None]
        if kind == "cone":
            metric = cone(float(rng.uniform(0.3, 2.0)))
            nodes = np.hstack([1.0 + s + 0.1 * rng.normal(size=(N + 1, 1)),
                               2.0 * s + 0.1 * rng.normal(size=(N + 1, 1))])
        else:
            nodes = np.array([-1.0, 0.3]) + s * np.array([2.0, 0.4]) + 0.2 * rng.normal(size=(N + 1, 2))
            if kind == "flat":
                metric = flat(2)
            elif kind == "conformal":
                metric = conformal("1 + 0.5*exp(-|x|^2)")
            else:
                metric = induced_sphere_metric(conformal("1/(1+|x|^4)"), 4.0)
                nodes = stereographic_fwd(nodes)
        p = DiscretePath.from_nodes(nodes)
        w = rng.normal(size=nodes.shape)
        w[0] = w[-1] = 0.0
        if kind == "lifted":
            w -= np.sum(w * nodes, axis=1, keepdims=True) * nodes
        exact = first_variation(p, metric, w)
        fd = central_difference(p, metric, w)
        assert abs(exact - fd) <= 1e-5 * max(1.0, abs(fd))


class TestShorteningStep:
    def test_critical_path(self):
        p = chord([0.0, 0.0], [1.0, 1.0], 16)
        new, ok, _ = shortening_step(p, flat(2))
        assert not ok or abs(energy(new, flat(2)) - energy(p, flat(2))) <= 1e-14

    def test_l_shape_converges_to_chord(self):
        N = 32
        up = np.stack([np.zeros(N // 2 + 1), np.linspace(0, 1, N // 2 + 1)], 1)
        over = np.stack([np.linspace(0, 1, N // 2 + 1), np.ones(N // 2 + 1)], 1)
        p = DiscretePath.from_nodes(np.vstack([up, over[1:]]))
        trace = [energy(p, flat(2))]
        for _ in range(100):
            p, ok, _ = shortening_step(p, flat(2))
            if not ok:
                break
            trace.append(energy(p, flat(2)))
        assert np.all(np.diff(trace) < 0)
        assert trace[-1] == pytest.approx(2.0, abs=1e-6)

    def test_rejected_step_returns_input(self):
        p = chord([0.0, 0.0], [1.0, 0.0], 8)
        new, ok, step = shortening_step(p, flat(2))
        if not ok:
            assert new is p and step == 0.0

    def test_armijo_decrease(self, rng):
        p = jagged_flat_seed(rng, (0, 0), (1, 2), 40)
        opts = FlowOptions(nu=1e-4)
        new, ok, step = shortening_step(p, flat(2), opts)
        assert ok and 0 < step <= opts.step0
        assert energy(new, flat(2)) < energy(p, flat(2))


class TestVertexFlowEnergy:
    def test_fixed_point(self):
        for t in (0.0, 0.3, 1.0):
            assert vertex_flow_energy(1.0, 0.5, 0.5, t) == pytest.approx(1.0)

    def test_end_of_flow(self):
        assert vertex_flow_energy(4.0, 0.5, 0.25, 1.0) == pytest.approx(4.0)

    def test_start_of_flow(self):
        assert vertex_flow_energy(4.0, 0.5, 0.25, 0.0) == pytest.approx(16 / 3)

    def test_outside_unit_interval(self):
        with pytest.raises(ZeroDivisionError):
            vertex_flow_energy(1.0, 0.5, 0.0, 0.0)

    def test_rate_zero_at_fixed_point(self):
        assert vertex_flow_energy_rate(4.0, 0.5, 0.5, 0.3) == 0.0

    def test_rate_example(self):
        # 4 * 0.25 * (0.25 / 0.5625 - 0.25 / 0.0625)
        assert vertex_flow_energy_rate(4.0, 0.5, 0.25, 0.0) == pytest.approx(-32 / 9, rel=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.0, 0.99), st.floats(0.1, 10.0))
    def test_rate_matches_differences_and_is_nonpositive(self, sigma, tau, t, c0):
        h = 1e-6
        fd = (vertex_flow_energy(c0, sigma, tau, t + h) - vertex_flow_energy(c0, sigma, tau, t - h)) / (2 * h)
        rate = vertex_flow_energy_rate(c0, sigma, tau, t)
        assert rate == pytest.approx(fd, rel=1e-4, abs=1e-6)
        assert rate <= 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.1, 10.0))
    def test_minimum_at_sigma(self, sigma, c0):
        a = np.linspace(0, 1, 10_001)[1:-1]
        E = c0 * (sigma**2 / a + (1 - sigma) ** 2 / (1 - a))
        assert abs(a[np.argmin(E)] - sigma) <= 1e-4
        assert vertex_flow_energy(c0, sigma, 0.5, 1.0) == pytest.approx(c0)


class TestTauBounds:
    def test_wide(self):
        # 1/tau + 1/(1 - tau) <= 8 holds on [(1 - 1/sqrt2)/2, (1 + 1/sqrt2)/2]
        lo, hi = tau_bounds(1.0, 1.0, 0.5, 8.0)
        assert (lo, hi) == pytest.approx(((1 - 2**-0.5) / 2, (1 + 2**-0.5) / 2), rel=1e-14)
        # the cruder per-leg estimate L1^2/(sigma b), 1 - L2^2/(b (1 - sigma)) sits inside
        assert lo < 0.25 and hi > 0.75

    def test_degenerate_at_minimal_energy(self):
        lo, hi = tau_bounds(1.0, 1.0, 0.5, 4.0)
        assert lo == pytest.approx(0.5) and hi == pytest.approx(0.5)

    def test_below_reachable(self):
        with pytest.raises(InconsistentBoundError):
            tau_bounds(1.0, 1.0, 0.5, 3.9)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(1.0, 3.0))
    def test_endpoints_attain_the_bound(self, L1, L2, excess):
        b = excess * (L1 + L2) ** 2
        sigma = L1 / (L1 + L2)
        lo, hi = tau_bounds(L1, L2, sigma, b)
        assert lo - 1e-12 <= sigma <= hi + 1e-12
        for tau in (lo, hi):
            if 0 < tau < 1:
                assert L1**2 / tau + L2**2 / (1 - tau) == pytest.approx(b, rel=1e-9)


class TestVertexFlow:
    def test_already_balanced(self):
        p = radial_broken_path(1.5, 1.0, 1.0, 0.5, 64)
        out = vertex_flow(p, cone(1.5), 1.0)
        assert np.max(np.abs(out.nodes - p.nodes)) < 1e-9

    def test_balances_legs(self):
        m = cone(1.5)
        p = radial_broken_path(1.5, 1.0, 1.0, 0.25, 64)
        out = vertex_flow(p, m, 1.0)
        assert break_structure(out, m).break_params == pytest.approx((0.5,))
        assert energy(out, m) == pytest.approx(4.0, abs=1e-6)

    def test_energy_follows_closed_form(self, rng):
        for _ in range(10):
            m, p, (L1, L2, tau, sigma) = random_broken_geodesic(rng)
            c0 = (L1 + L2) ** 2
            for t in (0.0, 0.25, 0.5, 1.0):
                E = energy(vertex_flow(p, m, t), m)
                assert E == pytest.approx(vertex_flow_energy(c0, sigma, tau, t), abs=1e-8 * c0)

    def test_image_is_preserved(self, rng):
        from scipy.spatial.distance import directed_hausdorff

        from conegeo.geometry import cone_to_cartesian

        for _ in range(10):
            m, p, (L1, L2, tau, sigma) = random_broken_geodesic(rng, distinct=True)
            t = 0.5
            out = vertex_flow(p, m, t)
            a, b = cone_to_cartesian(p.nodes), cone_to_cartesian(out.nodes)
            # every new node lies on one of the two radial legs of the input
            ends = (a[0], a[-1])
            for x in b:
                off = min(abs(e[0] * x[1] - e[1] * x[0]) / np.linalg.norm(e) for e in ends)
                assert off < 1e-12
            a_t = (1 - t) * tau + t * sigma
            cell = max(L1 / a_t, L2 / (1 - a_t), L1 / tau, L2 / (1 - tau)) / p.N
            d = max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])
            assert d <= cell

    def test_no_break(self):
        with pytest.raises(BreakCountError):
            vertex_flow(chord([0.0, 0.0], [1.0, 0.0], 8), flat(2), 0.5)

    def test_time_range(self):
        with pytest.raises(ValueError):
            vertex_flow(radial_broken_path(1.5, 1.0, 1.0, 0.5, 16), cone(1.5), 1.5)


class TestFlowToGeodesic:
    def test_flat_jagged_seed(self, rng):
        p = jagged_flat_seed(rng, (0, 0), (3, 1), 48)
        out, rep = flow_to_geodesic(p, flat(2))
        assert rep.converged
        assert energy(out, flat(2)) == pytest.approx(10.0, abs=1e-6)
        assert rep.final_certificate.passed

    def test_cone_direct(self):
        m = cone(0.5)
        p = seed_path(Boundary.fixed((1.0, 0.0), (1.0, math.pi)), 0, m, 64)
        out, rep = flow_to_geodesic(p, m)
        assert rep.converged
        assert length(out, m) == pytest.approx(math.sqrt(2), abs=1e-6)
        assert break_structure(out, m).count == 0

    def test_cone_small_angle_is_direct(self):
        # developed separation 0.3 pi < pi: the shortest path misses the apex
        m = cone(0.3)
        p = seed_path(Boundary.fixed((1.0, 0.0), (1.0, math.pi)), 0, m, 64)
        out, rep = flow_to_geodesic(p, m)
        L, through, _ = cone_unroll_geodesic(0.3, (1.0, 0.0), (1.0, math.pi))
        assert not through
        assert rep.converged
        assert length(out, m) == pytest.approx(L, abs=1e-6)

    def test_cone_through_apex(self):
        m = cone(1.5)
        p = seed_path(Boundary.fixed((1.0, 0.0), (1.0, math.pi)), 0, m, 64)
        out, rep = flow_to_geodesic(p, m)
        bs = break_structure(out, m)
        assert rep.converged
        assert length(out, m) == pytest.approx(2.0, abs=1e-6)
        assert bs.count == 1 and bs.break_params[0] == pytest.approx(0.5, abs=1e-6)

    def test_accepted_energies_decrease(self, rng):
        m = conformal("1 + 0.5*exp(-|x|^2)")
        p = jagged_flat_seed(rng, (-2, 0.5), (2, -0.5), 64, amplitude=0.1)
        out, rep = flow_to_geodesic(p, m)
        accepted = [e for e, ev in zip(rep.energy_trace, rep.event_trace) if ev == "shorten"]
        assert np.all(np.diff(accepted) < 0)
        assert rep.converged
        cert = rep.final_certificate
        assert cert.straightness_residual <= 1e-6 and cert.speed_residual <= 1e-6

    def test_iteration_cap_reports_unconverged(self, rng):
        p = jagged_flat_seed(rng, (0, 0), (1, 0), 64)
        _, rep = flow_to_geodesic(p, flat(2), FlowOptions(max_iters=1))
        assert not rep.converged
        assert rep.to_dict()["converged"] is False


class TestOptions:
    @pytest.mark.parametrize("kwargs", [
        {"max_iters": 0}, {"beta": 1.0}, {"beta": 0.0}, {"step0": 0.0}, {"nu": -1.0}, {"max_move": 0.0},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            FlowOptions(**kwargs)

    def test_unbounded_move(self):
        assert FlowOptions(max_move=None).max_move is None
