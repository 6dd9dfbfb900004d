import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kobalab.domain import ConvexDomainSpec, r_value
from kobalab.errors import ConfigurationError
from kobalab.kobayashi import (
    Path,
    almost_geodesic,
    ball_distance,
    distance_sandwich,
    infinitesimal_bounds,
    path_length_bounds,
    path_samples,
    path_upper,
    polydisk_separation,
    refine_knots,
    segment_upper,
)
from kobalab.sampling import ShellPairSampler

X, Y = np.array([0.99, 0]), np.array([0.999, 0])


class TestInfinitesimal:
    def test_ball_center(self, ball):
        lo, hi = infinitesimal_bounds(ball, [0, 0], [1, 0])
        assert (lo, hi) == pytest.approx((0.5, 1.0))
        assert lo <= 1.0 <= hi

    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(-0.7, 0.7), b=st.floats(-0.7, 0.7), t=st.floats(0, 2 * math.pi))
    def test_ratio_two_and_homogeneous(self, a, b, t):
        dom = ConvexDomainSpec.ellipsoid((1, 3))
        z = [a * 0.7, b * 0.7j]
        v = np.array([math.cos(t), math.sin(t) * 1j])
        lo, hi = infinitesimal_bounds(dom, z, v)
        assert hi / lo == pytest.approx(2.0)
        lo2, hi2 = infinitesimal_bounds(dom, z, 2 * v)
        assert (lo2, hi2) == pytest.approx((2 * lo, 2 * hi))

    def test_zero_vector(self, ball):
        with pytest.raises(ConfigurationError):
            infinitesimal_bounds(ball, [0, 0], [0, 0])


class TestPathLength:
    def test_zero_length(self, ball):
        assert path_length_bounds(ball, Path(np.array([[0.1, 0], [0.1, 0]]))) == (0.0, 0.0)

    def test_pointwise_factor_two(self, ball):
        lo, up = path_length_bounds(ball, Path(np.array([[0, 0], [0.5, 0]])))
        assert up / lo == pytest.approx(2.0, rel=1e-3)
        assert lo <= math.atanh(0.5) <= up

    def test_diameter(self, ball):
        lo, up = path_length_bounds(ball, Path(np.array([[-0.9, 0], [0.9, 0]])))
        assert up >= 2 * math.atanh(0.9)
        assert segment_upper(ball, [-0.9, 0], [0.9, 0]) >= 2 * math.atanh(0.9)

    def test_certified_segment_bound_tracks_quadrature(self, e12):
        a, b = np.array([0.5, 0.3j]), np.array([0.95, 0.1])
        lo, up = path_length_bounds(e12, Path(np.array([a, b])))
        s = segment_upper(e12, a, b)
        assert lo <= s and s <= up * 1.05

    def test_inclusion_monotone(self, ball, e12):
        # the ball lies inside {|z1|^2 + |z2|^4 < 1}, so shared paths are shorter there
        rng = np.random.default_rng(0)
        for _ in range(10):
            pts = 0.9 * (rng.uniform(-0.7, 0.7, (3, 2)) + 1j * rng.uniform(-0.7, 0.7, (3, 2)))
            pts = np.array([p * min(1, 0.95 / np.linalg.norm(p)) for p in pts])
            path = Path(pts)
            assert path_upper(e12, path) <= path_upper(ball, path) * (1 + 1e-12)

    def test_concatenation_adds(self, e12):
        a, b, c = np.array([0.9, 0]), np.array([0.5, 0.5j]), np.array([0.1, 0.9])
        joined = path_upper(e12, Path(np.array([a, b, c])))
        # the concatenated witness is an admissible path, so it bounds K(a, c) from above
        assert joined == pytest.approx(segment_upper(e12, a, b) + segment_upper(e12, b, c), rel=1e-12)
        assert distance_sandwich(e12, a, c).K_lo <= joined

    def test_segment_symmetric(self, e13):
        a, b = np.array([0.9, 0.1]), np.array([0.2j, 0.8])
        assert segment_upper(e13, a, b) == segment_upper(e13, b, a)

    def test_path_samples_interior(self, e13):
        path = Path(np.array([[0.99, 0], [0.5, 0.5], [0.1j, 0.9]]))
        pts = path_samples(e13, path, 16)
        assert len(pts) == 16 and all(r_value(e13, p) < 0 for p in pts)
        np.testing.assert_allclose(pts[0], path.knots[0])
        np.testing.assert_allclose(pts[-1], path.knots[-1])

    def test_validate(self, ball):
        assert Path(np.array([[0, 0], [0.5, 0]])).validate(ball)
        with pytest.raises(ConfigurationError):
            Path(np.array([[0, 0], [1.5, 0]])).validate(ball)


class TestAlmostGeodesic:
    def test_degenerate(self, ball):
        path, val, tag = almost_geodesic(ball, X, X)
        assert len(path.knots) == 1 and val == 0.0 and tag == "degenerate"

    def test_ball_example_case_split(self, ball):
        # M(x, y) = 0.017901 and M(y, x) = 1.008^2 - 0.998001 both stay below |r(x)| = 0.0199
        path, val, tag = almost_geodesic(ball, X, Y)
        assert tag == "case1"
        assert max(0.017901, 1.008 ** 2 - 0.998001) < abs(r_value(ball, X))
        assert val <= segment_upper(ball, X, Y)

    def test_beats_straight_for_separated_feet(self, ball):
        for h in (1e-3, 1e-4):
            x = np.array([1 - h, 0])
            y = (1 - h) * np.array([math.cos(0.3), math.sin(0.3)])
            path, val, _ = almost_geodesic(ball, x, y)
            assert val <= segment_upper(ball, x, y)
            assert len(path.knots) == 4


class TestSandwich:
    def test_ball_example(self, ball):
        s = distance_sandwich(ball, X, Y)
        exact = ball_distance(X, Y)
        assert exact == pytest.approx(1.1536, abs=1e-4)
        assert s.K_lo <= exact <= s.K_up
        assert s.K_lo >= 0 and s.K_lo == max(s.components["est3"], s.components["est4"])
        assert s.K_up == min(s.components["straight"], s.components["almost_geodesic"])

    def test_symmetric(self, e12):
        a, b = np.array([0.99, 0.05j]), np.array([0.97, 0.1])
        s, t = distance_sandwich(e12, a, b), distance_sandwich(e12, b, a)
        assert s.K_lo == pytest.approx(t.K_lo, abs=1e-8)
        assert s.K_up == pytest.approx(t.K_up, abs=1e-8)

    def test_distinct_points_required(self, ball):
        with pytest.raises(ConfigurationError):
            distance_sandwich(ball, X, X)

    def test_refinement_never_hurts(self, ball):
        x = np.array([0.999, 0])
        y = 0.999 * np.array([math.cos(0.2), math.sin(0.2)])
        s = distance_sandwich(ball, x, y)
        r = distance_sandwich(ball, x, y, refine=True)
        assert r.K_up <= s.K_up and r.K_lo <= ball_distance(x, y) <= r.K_up
        path, val = refine_knots(ball, s.path, s.K_up, iterations=2)
        assert val <= s.K_up

    def test_random_ball_pairs(self, ball):
        sp = ShellPairSampler(ball)
        for i in range(15):
            x, y = sp.pair(5, i, 1e-3)
            s = distance_sandwich(ball, x, y)
            assert s.K_lo <= ball_distance(x, y) <= s.K_up


class TestSeparation:
    def test_positive_floor(self, ball):
        assert polydisk_separation(ball, [0.999, 0], 2.0, samples=32) > 0.1

    def test_ball_distance_closed_form(self):
        assert ball_distance([0, 0], [0.5, 0]) == pytest.approx(math.atanh(0.5))
        assert ball_distance(X, Y) == pytest.approx(ball_distance(Y, X))
