import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conegeo.geometry import UnsupportedKindError, conformal, cone, flat, induced_sphere_metric
from conegeo.oracle import OracleDomainError, cone_unroll_geodesic, graph_shortest_path
from conegeo.paths import length


class TestUnroll:
    def test_plane_diameter(self):
        L, through, _ = cone_unroll_geodesic(1.0, (1.0, 0.0), (1.0, math.pi))
        assert through and L == pytest.approx(2.0)

    def test_half_angle_cone(self):
        L, through, w = cone_unroll_geodesic(0.5, (1.0, 0.0), (1.0, math.pi))
        assert not through and L == pytest.approx(math.sqrt(2.0), abs=1e-15)
        assert length(w, cone(0.5)) == pytest.approx(L, rel=1e-12)

    def test_quarter_angle_cone(self):
        L, through, _ = cone_unroll_geodesic(0.25, (1.0, 0.0), (1.0, math.pi))
        assert not through
        assert L == pytest.approx(math.sqrt(2 - 2 * math.cos(math.pi / 4)), abs=1e-15)

    def test_shorter_way_round(self):
        # theta difference 1.5 pi: the short lift goes the other way, 0.5 pi
        L, _, w = cone_unroll_geodesic(1.0, (1.0, 0.0), (1.0, 1.5 * math.pi))
        assert L == pytest.approx(math.sqrt(2.0))
        assert w.nodes[-1, 1] == pytest.approx(-0.5 * math.pi)

    @pytest.mark.parametrize("bad", [(0.0, 0.0), (-1.0, 1.0)])
    def test_radius_domain(self, bad):
        with pytest.raises(OracleDomainError):
            cone_unroll_geodesic(0.5, bad, (1.0, 0.0))

    def test_alpha_domain(self):
        with pytest.raises(OracleDomainError):
            cone_unroll_geodesic(0.0, (1.0, 0.0), (1.0, 1.0))

    @settings(max_examples=80, deadline=None)
    @given(st.floats(0.2, 3.0), st.floats(0.1, 5.0), st.floats(0.1, 5.0))
    def test_continuous_across_the_transition(self, alpha, rp, rq):
        if alpha * math.pi <= math.pi + 1e-6:
            # the transition angle pi/alpha must be reachable within half a turn
            return
        crit = math.pi / alpha
        below, _, _ = cone_unroll_geodesic(alpha, (rp, 0.0), (rq, crit - 1e-9))
        above, _, _ = cone_unroll_geodesic(alpha, (rp, 0.0), (rq, crit + 1e-9))
        assert below == pytest.approx(rp + rq, abs=1e-6)
        assert above == pytest.approx(rp + rq, abs=1e-12)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(0.2, 3.0), st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(-7, 7))
    def test_triangle_bounds(self, alpha, rp, rq, dth):
        L, _, w = cone_unroll_geodesic(alpha, (rp, 0.0), (rq, dth), n=32)
        assert abs(rp - rq) - 1e-12 <= L <= rp + rq + 1e-12
        assert length(w, cone(alpha)) == pytest.approx(L, rel=1e-9, abs=1e-12)


class TestGraph:
    @pytest.mark.parametrize("res", [16, 64, 128])
    def test_axis_segment(self, res):
        assert graph_shortest_path(flat(2), (0.0, 0.0), (1.0, 0.0), resolution=res) == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_metrication(self):
        d = graph_shortest_path(flat(2), (0.0, 0.0), (1.0, 1.0), resolution=128)
        assert math.sqrt(2) - 1e-12 <= d <= math.sqrt(2) * 1.011

    def test_cone_against_unroll(self):
        d = graph_shortest_path(cone(0.5), (1.0, 0.0), (1.0, math.pi), resolution=256)
        assert abs(d / math.sqrt(2) - 1) < 0.02

    def test_eight_neighbour_is_coarser(self):
        m = conformal("1 + 0.5*exp(-|x|^2)")
        d8 = graph_shortest_path(m, (-1.0, 0.3), (1.2, -0.4), resolution=64, connectivity=8)
        d16 = graph_shortest_path(m, (-1.0, 0.3), (1.2, -0.4), resolution=64, connectivity=16)
        assert d16 <= d8

    def test_monotone_under_cell_halving(self):
        m = conformal("1 + 0.5*exp(-|x|^2)")
        win = ((-2.0, 2.0), (-2.0, 2.0))
        ds = [graph_shortest_path(m, (-1.5, 0.5), (1.5, -0.5), resolution=r, window=win) for r in (16, 32, 64, 128)]
        assert all(b <= a + 1e-12 for a, b in zip(ds, ds[1:]))

    def test_outside_window(self):
        with pytest.raises(OracleDomainError):
            graph_shortest_path(flat(2), (0.0, 0.0), (3.0, 0.0), window=((-1.0, 1.0), (-1.0, 1.0)))

    def test_lifted_rejected(self):
        with pytest.raises(UnsupportedKindError):
            graph_shortest_path(induced_sphere_metric(flat(2)), (0, 0, -1), (1, 0, 0))

    def test_coarse_resolution_rejected(self):
        with pytest.raises(ValueError):
            graph_shortest_path(flat(2), (0.0, 0.0), (1.0, 0.0), resolution=8)


def test_nearby_points_keep_full_precision():
    # 2 r sin(d/2) for d = 2^-8 on the unit-slope cone
    L, _, _ = cone_unroll_geodesic(1.0, (1.625, 0.0), (1.625, 2.0**-8))
    assert L == pytest.approx(2 * 1.625 * math.sin(2.0**-9), rel=1e-15)
