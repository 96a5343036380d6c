import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpqi import descriptor
from tpqi.descriptor import (DescriptorKind, curvature, describe, distance,
                             domain_score, linear_error_instant, tpqi, vpt_instant)
from tpqi.trajectory import Trajectory

from conftest import random_rotation

RIGHT_ANGLE_Q = (math.pi / 2) * 2 ** 0.25


class TestCurvature:
    def test_collinear_is_zero(self):
        assert curvature((0, 0), (1, 0), (2, 0)) == 0.0

    def test_right_angle(self):
        assert abs(curvature((0, 0), (1, 0), (1, 1)) - math.pi / 2) < 1e-15

    def test_reversal_is_pi(self):
        assert abs(curvature((0, 0), (1, 0), (0, 0)) - math.pi) < 1e-15

    def test_degenerate_signals_skip(self):
        assert curvature((1, 1), (1, 1), (2, 2)) is None

    @given(st.floats(-1e3, 1e3), st.floats(1e-6, 1e3), st.floats(-1e-9, 1e-9))
    @settings(max_examples=200, deadline=None)
    def test_arccos_never_leaves_domain(self, a, scale, eps):
        # nearly parallel difference vectors stress the clamp
        p0 = np.array([0.0, 0.0])
        p1 = np.array([scale, a * 1e-12])
        p2 = p1 + np.array([scale, eps])
        theta = curvature(p0, p1, p2)
        if theta is not None:
            assert 0.0 <= theta <= math.pi


class TestDistance:
    def test_norm_of_sum_default(self):
        assert abs(distance((0, 0), (1, 0), (1, 1)) - math.sqrt(2)) < 1e-15

    def test_reversal_cancels(self):
        assert distance((0, 0), (1, 0), (0, 0)) == 0.0

    def test_point_to_line_height(self):
        assert abs(distance((0, 0), (1, 0), (1, 1), "point_to_line") - 1.0) < 1e-15

    def test_point_to_line_degenerate_skips(self):
        assert distance((1, 1), (1, 1), (3, 3), "point_to_line") is None

    def test_option_family(self):
        args = ((0, 0), (3, 0), (3, 4))
        assert distance(*args, "norm_first") == 3.0
        assert distance(*args, "norm_second") == 4.0
        assert distance(*args, "sum_of_norms") == 7.0
        assert distance(*args, "norm_of_sum") == 5.0

    def test_unknown_option_rejected(self):
        with pytest.raises(ValueError):
            DescriptorKind(distance_option="manhattan")


class TestInstantValues:
    def test_vpt_zero_angle(self):
        assert vpt_instant(0.0, 123.4) == 0.0

    def test_vpt_right_angle_value(self):
        assert abs(vpt_instant(math.pi / 2, math.sqrt(2)) - RIGHT_ANGLE_Q) < 1e-15

    def test_vpt_zero_distance(self):
        assert vpt_instant(math.pi, 0.0) == 0.0

    def test_vpt_monotone_in_each_argument(self):
        assert vpt_instant(0.5, 2.0) < vpt_instant(0.5, 3.0)
        assert vpt_instant(0.5, 2.0) < vpt_instant(0.6, 2.0)

    def test_linear_error_collinear(self):
        assert linear_error_instant((0, 0), (1, 0), (2, 0)) == 0.0

    def test_linear_error_hand_case(self):
        assert abs(linear_error_instant((0, 0), (1, 0), (1, 1)) - math.sqrt(2)) < 1e-15

    def test_linear_error_static(self):
        assert linear_error_instant((0, 0), (0, 0), (0, 0)) == 0.0


class TestDomainScore:
    def test_four_point_hand_value(self):
        pts = np.array([[0, 0], [1, 0], [1, 1], [2, 1]], float)
        assert abs(domain_score(pts) - math.log(RIGHT_ANGLE_Q)) < 1e-12

    def test_straight_line_floors(self):
        pts = np.array([[0.0, 5.0], [1.0, 5.0], [3.0, 5.0], [7.0, 5.0]])
        assert domain_score(pts) == math.log(descriptor.EPS_LOG)

    def test_straight_line_speed_profile_irrelevant(self):
        # exactly representable axis-aligned steps keep theta bitwise zero
        for steps in ([1, 2, 4, 2, 1], [3, 1, 1, 5], [2, 2, 2]):
            xs = np.cumsum([0] + steps).astype(float)
            pts = np.column_stack([xs, np.full_like(xs, 2.0), np.full_like(xs, -1.0)])
            assert domain_score(pts) == math.log(descriptor.EPS_LOG)
            assert describe(pts).degenerate

    def test_mean_one_scores_zero(self):
        # two instants with theta=pi/2 and S = (2/pi)^2, so theta*sqrt(S) == 1
        h = (2.0 / math.pi) ** 2 / math.sqrt(2.0)
        pts = np.array([[0, 0], [h, 0], [h, h], [0, h]], float)
        series = describe(pts)
        np.testing.assert_allclose(series.q, 1.0, atol=1e-12)
        assert abs(domain_score(pts)) < 1e-12

    def test_duplicate_frames_skipped_not_zero_counted(self):
        pts = np.array([[0, 0], [1, 0], [1, 0], [2, 0], [3, 1]], float)
        series = describe(pts)
        assert series.skipped == [1, 2]
        assert len(series.q) == 1

    def test_all_static_is_degenerate(self):
        pts = np.zeros((5, 3))
        series = describe(pts)
        assert series.q.size == 0 and series.degenerate
        assert domain_score(pts) == math.log(descriptor.EPS_LOG)


class TestTpqi:
    def test_mean_of_domain_scores(self):
        a = np.array([[0, 0], [1, 0], [1, 1], [2, 1]], float)
        b = np.array([[0, 0], [2, 0], [2, 2], [4, 2]], float)
        expected = (domain_score(a) + domain_score(b)) / 2
        assert abs(tpqi(Trajectory(a, np.ones(2)), Trajectory(b, np.ones(2))) - expected) < 1e-12

    def test_single_domain_variant(self):
        a = np.array([[0, 0], [1, 0], [1, 1], [2, 1]], float)
        assert tpqi(traj_lgn=Trajectory(a, np.ones(2))) == domain_score(a)

    def test_requires_a_trajectory(self):
        with pytest.raises(ValueError):
            tpqi()

    def test_straight_both_domains_floor(self):
        line = np.column_stack([np.arange(5.0), np.zeros(5)])
        assert tpqi(Trajectory(line, np.ones(2)),
                    Trajectory(line.copy(), np.ones(2))) == math.log(descriptor.EPS_LOG)


class TestInvariances:
    def test_rigid_motion_preserves_series(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(4, 20))
            d = int(rng.integers(2, 8))
            pts = rng.standard_normal((n, d)) * 3.0
            q = random_rotation(rng, d)
            shift = rng.standard_normal(d) * 10.0
            a = describe(pts)
            b = describe(pts @ q + shift)
            np.testing.assert_allclose(b.theta, a.theta, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(b.s, a.s, rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(b.q, a.q, rtol=1e-9, atol=1e-12)

    def test_scale_covariance(self):
        rng = np.random.default_rng(1)
        pts = rng.standard_normal((16, 6))
        for s in (0.25, 3.0, 17.5):
            a = describe(pts)
            b = describe(pts * s)
            np.testing.assert_allclose(b.theta, a.theta, rtol=1e-9)
            np.testing.assert_allclose(b.s, a.s * s, rtol=1e-9)
            np.testing.assert_allclose(b.q, a.q * math.sqrt(s), rtol=1e-9)
            assert abs((domain_score(pts * s) - domain_score(pts)) - 0.5 * math.log(s)) < 1e-9
