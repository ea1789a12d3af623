import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conegeo.geometry import MetricError, conformal, cone, flat, induced_sphere_metric, stereographic_fwd
from conegeo.paths import (
    Boundary,
    DegeneratePathError,
    DiscretePath,
    NoCenterError,
    break_structure,
    energy,
    length,
    path_from_json,
    path_to_csv,
    path_to_json,
    reparam_constant_speed,
    seed_path,
    winding_number,
)

from helpers import radial_broken_path

node_arrays = st.integers(2, 40).flatmap(
    lambda n: arrays(np.float64, (n + 1, 2), elements=st.floats(-10, 10, allow_nan=False))
)


def l_shape(N):
    """(0,0) -> (0,1) -> (1,1) with the corner at node N/2."""
    h = N // 2
    up = np.stack([np.zeros(h + 1), np.linspace(0, 1, h + 1)], axis=1)
    over = np.stack([np.linspace(0, 1, h + 1), np.ones(h + 1)], axis=1)
    return DiscretePath.from_nodes(np.vstack([up, over[1:]]))


class TestEnergyLength:
    def test_constant_path(self):
        assert energy(np.zeros((9, 2)), flat(2)) == 0.0

    @pytest.mark.parametrize("N", [2, 7, 64])
    def test_unit_segment(self, N):
        nodes = np.stack([np.linspace(0, 1, N + 1), np.zeros(N + 1)], axis=1)
        assert energy(nodes, flat(2)) == pytest.approx(1.0, abs=1e-14)
        assert length(nodes, flat(2)) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("N", [2, 8, 100])
    def test_l_shape(self, N):
        p = l_shape(N)
        assert energy(p, flat(2)) == pytest.approx(4.0, abs=1e-12)
        assert length(p, flat(2)) == pytest.approx(2.0, abs=1e-12)

    def test_segment_error_carries_index(self):
        nodes = np.array([[1.0, 0.0], [0.5, 0.0], [-1.0, 0.0]])
        with pytest.raises(MetricError, match="segment 1"):
            energy(nodes, conformal("1/x1"))

    @settings(max_examples=80, deadline=None)
    @given(node_arrays)
    def test_energy_dominates_squared_length(self, nodes):
        E, L = energy(nodes, flat(2)), length(nodes, flat(2))
        assert E >= 0.0
        assert E >= L * L - 1e-12 * max(1.0, L * L)

    @settings(max_examples=50, deadline=None)
    @given(node_arrays)
    def test_collinear_midpoints_leave_length_unchanged(self, nodes):
        mid = 0.5 * (nodes[:-1] + nodes[1:])
        refined = np.empty((2 * nodes.shape[0] - 1, 2))
        refined[::2] = nodes
        refined[1::2] = mid
        assert length(refined, flat(2)) == pytest.approx(length(nodes, flat(2)), rel=1e-12, abs=1e-12)

    def test_collinear_midpoints_leave_energy_of_uniform_chord_unchanged(self):
        nodes = np.linspace([0.0, 0.0], [3.0, -2.0], 9)
        refined = np.linspace([0.0, 0.0], [3.0, -2.0], 17)
        assert energy(refined, flat(2)) == pytest.approx(energy(nodes, flat(2)), rel=1e-12)

    def test_cone_segment_through_apex(self):
        # developed angle alpha * pi >= pi: the two nodes are joined through the apex
        m = cone(1.5)
        nodes = np.array([[1.0, 0.0], [0.5, 2 * math.pi / 3], [2.0, 2 * math.pi / 3]])
        assert length(nodes, m) == pytest.approx(1.5 + 1.5)

    def test_cone_direct_segment(self):
        m = cone(0.5)
        nodes = np.array([[1.0, 0.0], [1.0, math.pi]])
        assert length(nodes, m) == pytest.approx(math.sqrt(2.0))

    def test_lifted_energy_converges_to_chart_energy_beyond_the_handoff(self):
        base = conformal("1/(1+|x|^4)")
        lifted = induced_sphere_metric(base, 4.0)
        gaps = []
        for N in (128, 512, 2048):
            s = np.linspace(0.0, 1.0, N + 1)[:, None]
            chart = np.array([-3.0, 0.5]) + s * np.array([6.0, 1.0])
            gaps.append(abs(energy(stereographic_fwd(chart), lifted) / energy(chart, base) - 1))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-5


class TestReparam:
    def test_fixed_point(self):
        p = DiscretePath.from_nodes(np.linspace([0.0, 0.0], [1.0, 2.0], 33))
        assert np.allclose(reparam_constant_speed(p, flat(2)).nodes, p.nodes, atol=1e-12)

    def test_clustered_l_shape(self):
        # 30 segments on the first leg, 10 on the second; the corner stays a node
        up = np.stack([np.zeros(31), np.linspace(0, 1, 31) ** 2], axis=1)
        over = np.stack([np.linspace(0, 1, 11), np.ones(11)], axis=1)
        p = DiscretePath.from_nodes(np.vstack([up, over[1:]]))
        assert energy(p, flat(2)) > 4.5
        out = reparam_constant_speed(p, flat(2))
        assert energy(out, flat(2)) == pytest.approx(4.0, rel=1e-9)

    def test_zero_length(self):
        with pytest.raises(DegeneratePathError):
            reparam_constant_speed(DiscretePath.from_nodes(np.ones((5, 2))), flat(2))

    def test_jitter_lowers_energy_and_is_idempotent(self, rng):
        u = np.sort(np.concatenate([[0, 1], rng.uniform(0, 1, 30)]))
        nodes = np.stack([u, np.sin(3 * u)], axis=1)
        p = DiscretePath.from_nodes(nodes)
        once = reparam_constant_speed(p, flat(2))
        twice = reparam_constant_speed(once, flat(2))
        assert energy(once, flat(2)) <= energy(p, flat(2))
        assert np.allclose(once.nodes, twice.nodes, atol=1e-9)
        seg = np.linalg.norm(np.diff(once.nodes, axis=0), axis=1)
        assert np.ptp(seg) / seg.mean() < 1e-6


class TestBreakStructure:
    def test_missing_vertices(self):
        m = conformal("|x|", vertices=[(0.0, 0.0)])
        p = DiscretePath.from_nodes(np.linspace([-1.0, 1.0], [1.0, 1.0], 17))
        assert break_structure(p, m).break_params == ()

    def test_symmetric_break(self):
        p = radial_broken_path(1.5, 1.0, 1.0, 0.5, 64)
        bs = break_structure(p, cone(1.5))
        assert bs.break_params == (0.5,)
        assert bs.legs == pytest.approx((1.0, 1.0))

    def test_consecutive_vertex_nodes_merge(self):
        m = conformal("|x|", vertices=[(0.0, 0.0)])
        nodes = np.array([[-1.0, 0.0], [-0.5, 0.0], [0, 0], [0, 0], [0, 0], [0.5, 0.0], [1.0, 0.0]])
        bs = break_structure(DiscretePath.from_nodes(nodes), m)
        assert bs.count == 1
        assert bs.intervals == ((2 / 6, 4 / 6),)
        assert len(bs.legs) == 2

    def test_break_inside_segment(self):
        # break at tau = 0.3 does not sit on the N = 10 grid
        p = radial_broken_path(1.5, 0.6, 1.4, 0.3, 10)
        bs = break_structure(p, cone(1.5))
        assert bs.break_params == pytest.approx((0.3,))
        assert bs.legs == pytest.approx((0.6, 1.4))
        assert len(bs.components) == 2


class TestSeeding:
    def test_flat_chord(self):
        p = seed_path(Boundary.fixed((0, 0), (2, 1)), 0, flat(2), 16)
        assert np.allclose(p.nodes, np.linspace([0, 0], [2, 1], 17))

    def test_cone_winding_adds_full_turn(self):
        m = cone(0.5)
        b = Boundary.fixed((1.0, 0.0), (1.0, 1.0))
        d0 = seed_path(b, 0, m, 64).nodes
        d1 = seed_path(b, 1, m, 64).nodes
        assert (d1[-1, 1] - d1[0, 1]) - (d0[-1, 1] - d0[0, 1]) == pytest.approx(2 * math.pi, abs=1e-9)

    def test_windings_distinct_around_vertex(self):
        m = conformal("|x|", vertices=[(0.0, 0.0)])
        b = Boundary.fixed((-1.0, 0.1), (1.0, 0.2))
        ws = [winding_number(seed_path(b, k, m, 64), m) for k in (0, 1, 2)]
        assert ws[1] - ws[0] == pytest.approx(1.0)
        assert ws[2] - ws[1] == pytest.approx(1.0)

    def test_no_center(self):
        with pytest.raises(NoCenterError):
            seed_path(Boundary.fixed((0, 0), (1, 0)), 1, flat(2), 64)

    def test_too_coarse(self):
        with pytest.raises(ValueError, match="too small"):
            seed_path(Boundary.fixed((1, 0), (1, 1)), 2, cone(0.5), 16)

    def test_deterministic(self):
        m = cone(0.7)
        b = Boundary.fixed((1.0, 0.2), (2.0, -1.0))
        assert np.array_equal(seed_path(b, 1, m, 32).nodes, seed_path(b, 1, m, 32).nodes)


class TestPathValue:
    def test_closed_identifies_endpoints(self):
        nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 0.5]])
        p = DiscretePath(nodes, Boundary.closed((0.0, 0.0)))
        assert np.array_equal(p.nodes[-1], p.nodes[0])

    def test_immutable(self):
        p = DiscretePath.from_nodes(np.zeros((3, 2)))
        with pytest.raises(ValueError):
            p.nodes[1, 0] = 2.0

    def test_too_short(self):
        with pytest.raises(ValueError):
            DiscretePath.from_nodes(np.zeros((2, 2)))

    def test_json_roundtrip(self, rng):
        p = DiscretePath.from_nodes(rng.normal(size=(6, 2)))
        q = path_from_json(path_to_json(p))
        assert np.array_equal(p.nodes, q.nodes) and p.boundary == q.boundary

    def test_csv_columns(self):
        text = path_to_csv(DiscretePath.from_nodes(np.linspace([0, 0], [1, 1], 3)))
        lines = text.strip().splitlines()
        assert lines[0].split(",")[0] == "s"
        assert len(lines) == 4
