import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_unitary, rotated_ellipsoid
from kobalab.domain import ConvexDomainSpec, hdot, level_set_distance
from kobalab.frames import (
    Polydisk,
    boundary_inequality,
    build_minimal_frame,
    harmonic_radius,
    level_slice_distance,
    polydisk_membership,
    sample_polydisk_boundary,
    scaling_profile,
)
from kobalab.sampling import PatchSampler, rng_for

TAU2 = math.sqrt(1 - 0.9801)


@pytest.fixture(scope="module")
def ball_frame(ball):
    return build_minimal_frame(ball, [0.99, 0], 0.0199)


class TestBuildFrame:
    def test_ball_closed_form(self, ball_frame):
        np.testing.assert_allclose(ball_frame.tau, [0.01, TAU2], rtol=1e-10)
        assert abs(abs(ball_frame.basis[0, 0]) - 1) < 1e-10
        assert abs(abs(ball_frame.basis[1, 1]) - 1) < 1e-10

    @pytest.mark.parametrize("name,q,eps", [("ball", [0.99, 0], 0.0199), ("e12", [0.2j, 0.7], 0.01)])
    def test_multistart_oracle_agrees(self, name, q, eps, request):
        dom = request.getfixturevalue(name)
        a = build_minimal_frame(dom, q, eps)
        b = build_minimal_frame(dom, q, eps, method="multistart")
        assert a.tau[0] == pytest.approx(b.tau[0], rel=1e-8)
        # a value-only search fixes e_1 to about sqrt(machine eps), which tau_2 inherits
        assert a.tau[1] == pytest.approx(b.tau[1], rel=1e-6)
        assert abs(hdot(a.basis[0], b.basis[0])) == pytest.approx(1, abs=1e-6)

    def test_frame_is_unitary_and_sorted(self, e13):
        fr = build_minimal_frame(e13, [0.7, 0.5 - 0.2j], 0.02)
        G = np.array([[hdot(u, v) for v in fr.basis] for u in fr.basis])
        np.testing.assert_allclose(G, np.eye(2), atol=1e-10)
        assert fr.tau[0] <= fr.tau[1]
        assert fr.tau[0] == pytest.approx(level_set_distance(e13, fr.q, fr.eps, fr.basis[0]), rel=1e-10)

    def test_phase_convention(self, e12):
        fr = build_minimal_frame(e12, [0.8, 0.3 + 0.1j], 0.05)
        for e in fr.basis:
            k = int(np.argmax(np.abs(e)))
            assert abs(e[k].imag) < 1e-12 and e[k].real > 0

    def test_ellipsoid_quarter_power_scaling(self, e12):
        hs = np.array([1e-2, 1e-3, 1e-4, 1e-5])
        t2 = [build_minimal_frame(e12, [1 - h, 0], h).tau[1] for h in hs]
        assert np.polyfit(np.log(hs), np.log(t2), 1)[0] == pytest.approx(0.25, abs=0.02)

    def test_coordinate_free(self, ball):
        rng = np.random.default_rng(4)
        Q = random_unitary(rng, 2)
        dom = rotated_ellipsoid((1, 2), Q)
        e12 = ConvexDomainSpec.ellipsoid((1, 2))
        for q, eps in [([0.8, 0.3 + 0.1j], 0.05), ([0.95, 0.1], 0.01)]:
            q = np.asarray(q, dtype=complex)
            np.testing.assert_allclose(build_minimal_frame(dom, Q @ q, eps).tau,
                                       build_minimal_frame(e12, q, eps).tau, rtol=1e-8)
            np.testing.assert_allclose(build_minimal_frame(ball, Q @ q * 0.9, eps).tau,
                                       build_minimal_frame(ball, q * 0.9, eps).tau, rtol=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(1e-6, 0.05), b=st.floats(1e-6, 0.05))
    def test_tau_increasing_in_eps(self, a, b):
        dom = ConvexDomainSpec.ellipsoid((1, 3))
        lo, hi = sorted((a, b))
        if hi <= lo * (1 + 1e-6):
            return
        q = [0.9, 0.2j]
        t_lo = build_minimal_frame(dom, q, lo).tau
        t_hi = build_minimal_frame(dom, q, hi).tau
        assert np.all(t_hi > t_lo)

    def test_rejects_exterior_point(self, ball):
        with pytest.raises(ValueError):
            build_minimal_frame(ball, [1.0, 0.5], 0.01)


class TestMembership:
    def test_center(self, ball_frame):
        assert polydisk_membership(ball_frame, ball_frame.q)

    def test_on_circle_and_outside(self, ball_frame):
        assert polydisk_membership(ball_frame, [0.99, 0.141067])
        assert not polydisk_membership(ball_frame, [0.99, 0.15])

    def test_polydisk_gauge(self, ball_frame):
        pd = Polydisk(ball_frame)
        assert pd.contains([0.99, 0.1]) and pd.gauge([0.99, 0.1]) == pytest.approx(0.1 / TAU2)

    def test_monotone_in_eps(self, e12):
        rng = np.random.default_rng(2)
        q = np.array([0.9, 0.1j])
        small = build_minimal_frame(e12, q, 1e-3)
        big = build_minimal_frame(e12, q, 4e-3)
        for _ in range(200):
            y = sample_polydisk_boundary(small, rng)
            assert polydisk_membership(big, y)


class TestScalingAndRadius:
    def test_ball_scaling_profile(self, ball):
        tab = scaling_profile(ball, [0.99, 0], 0.001, [1, 4])
        np.testing.assert_allclose(tab[0], [1, 1])
        assert tab[1][1] == pytest.approx(2.0, rel=1e-10)
        assert 4 / 1.1 < tab[1][0] < 4 * 1.1

    def test_harmonic_band_on_ellipsoid(self, e12):
        L = e12.type_bound
        for c in (0.25, 4.0):
            tab = scaling_profile(e12, [0.999, 0.01j], 1e-3, [c])[0]
            lo, hi = sorted((c ** (1 / L), c ** 0.5))
            assert lo / 1.5 <= tab[1] <= hi * 1.5
            assert c / 1.5 <= tab[0] <= c * 1.5

    def test_harmonic_radius(self, ball_frame):
        e1, e2 = ball_frame.basis
        t1, t2 = ball_frame.tau
        assert harmonic_radius(ball_frame, e1) == pytest.approx(t1)
        assert harmonic_radius(ball_frame, e2) == pytest.approx(TAU2, rel=1e-8)
        v = (e1 + e2) / math.sqrt(2)
        assert harmonic_radius(ball_frame, v) == pytest.approx(t1 * t2 * math.sqrt(2) / (t1 + t2))

    def test_harmonic_band_does_not_widen(self, e12):
        patch = PatchSampler(e12)
        hs, worst = [1e-2, 1e-3, 1e-4, 1e-5], []
        for h in hs:
            rs = []
            for i in range(8):
                rng = rng_for(9, i)
                fr = build_minimal_frame(e12, patch.fiber_point(patch.boundary_point(rng), h), h)
                for _ in range(10):
                    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
                    v /= np.linalg.norm(v)
                    rs.append(level_slice_distance(e12, fr, v) / harmonic_radius(fr, v))
            assert min(rs) >= 1 - 1e-9 and max(rs) <= 2
            worst.append(math.log(max(rs)))
        assert np.polyfit(np.log(1 / np.array(hs)), np.log(np.exp(worst)), 1)[0] <= 0.05

    def test_boundary_inequality_exact_constants(self, e13):
        rng = np.random.default_rng(8)
        fr = build_minimal_frame(e13, [0.99, 0.05], 0.01)
        for _ in range(300):
            H, d, nH = boundary_inequality(fr, sample_polydisk_boundary(fr, rng))
            assert H <= d * (1 + 1e-12) and d <= nH * (1 + 1e-12)
