"""Acceptance checks, one test per criterion, each printing a single pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also repeated in the terminal summary.
"""
import math

import numpy as np
import pytest

from conftest import bisect
from kobalab.cli import sandwich_rows, summarize_sandwich
from kobalab.domain import ConvexDomainSpec, r_value, radial_boundary_point
from kobalab.errors import OutOfChartError
from kobalab.frames import boundary_inequality, build_minimal_frame, sample_polydisk_boundary
from kobalab.hyperbolicity import (
    DEPTH_BUCKETS,
    VISUAL_OMEGA_DEPTH,
    ScanConfig,
    boundary_pairs,
    four_point_scan,
    omega_over,
    triangle_scan,
    visibility_scan,
    visual_band,
    visual_metric_ratio,
)
from kobalab.kobayashi import ball_distance, distance_sandwich, polydisk_separation
from kobalab.pseudo import calibrate, power_chain_check, pseudo_M_inf, pseudo_M_taylor
from kobalab.sampling import PatchSampler, ShellPairSampler, log_uniform, rng_for
from kobalab.stats import log_inverse, ols_slope, relative_change

pytestmark = pytest.mark.slow

DOMAINS = {
    "ball": ConvexDomainSpec.ball(2),
    "e12": ConvexDomainSpec.ellipsoid((1, 2)),
    "e13": ConvexDomainSpec.ellipsoid((1, 3)),
}
SLOPE_TOL = 0.05


def spread(values):
    """``(max - min) / max`` of positive values."""
    return (max(values) - min(values)) / max(values)


def bucket_slope(strat):
    hs = sorted(strat)
    return ols_slope(log_inverse(hs), [strat[h] for h in hs])


# ---------------------------------------------------------------------------


def test_c01_minimal_basis_ball(criterion):
    # eps up to 2 |r(q)| = 0.38 at h = 0.1 needs a level cap above the default
    dom = ConvexDomainSpec.ball(2, eps_max=0.5)
    worst = 0.0
    for h in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
        q = np.array([1 - h, 0], dtype=complex)
        rq = abs(r_value(dom, q))
        for eps in (rq, 2 * rq):
            fr = build_minimal_frame(dom, q, eps)
            closed = (math.sqrt(abs(q[0]) ** 2 + eps) - abs(q[0]), math.sqrt(eps))
            c = r_value(dom, q) + eps
            # cross-oracle: roots of r along the normal and tangential axes
            bis = (bisect(lambda t: r_value(dom, q + np.array([t, 0])) - c, 0.0, 1.0),
                   bisect(lambda t: r_value(dom, q + np.array([0, t])) - c, 0.0, 1.0))
            for k in range(2):
                worst = max(worst, abs(fr.tau[k] / closed[k] - 1), abs(bis[k] / closed[k] - 1))
    criterion("C1 minimal basis on the ball", worst < 1e-6, f"max relative error {worst:.2e} (tol 1e-6)")


def test_c02_scaling_law(criterion):
    dom = DOMAINS["e12"]
    q = np.array([1 - 1e-4, 0], dtype=complex)
    eps = np.geomspace(1e-6, 1e-2, 9)
    tau = np.array([build_minimal_frame(dom, q, e).tau for e in eps])
    s1 = np.polyfit(np.log(eps), np.log(tau[:, 0]), 1)[0]
    s2 = np.polyfit(np.log(eps), np.log(tau[:, 1]), 1)[0]
    patch = PatchSampler(dom)
    rng = np.random.default_rng(0)
    violations = 0
    for _ in range(100):
        x = patch.fiber_point(patch.boundary_point(rng), log_uniform(rng, 1e-6, 1e-2))
        fr = build_minimal_frame(dom, x, abs(r_value(dom, x)) * log_uniform(rng, 0.5, 4))
        for _ in range(10):
            H, d, nH = boundary_inequality(fr, sample_polydisk_boundary(fr, rng))
            violations += not (H <= d * (1 + 1e-12) and d <= nH * (1 + 1e-12))
    ok = abs(s2 - 0.25) <= 0.02 and abs(s1 - 1.0) <= 0.02 and violations == 0
    criterion("C2 scaling law on m=(1,2)", ok,
              f"tau_2 slope {s2:.4f} (0.25±0.02), tau_1 slope {s1:.4f} (1±0.02), "
              f"{violations} violations of H <= |q-y| <= nH over 1000 points")


def test_c03_pseudodistance_equivalence(criterion):
    buckets = (1e-2, 1e-3, 1e-4, 1e-5)
    details = []
    ok = True
    for name in ("ball", "e12"):
        dom = DOMAINS[name]
        sp = ShellPairSampler(dom)
        width = {}
        K = 1.0
        for hb in buckets:
            r = []
            for i in range(250):
                x, y = sp.pair(42, i, hb)
                r.append(pseudo_M_taylor(dom, x, y) / pseudo_M_inf(dom, x, y))
            lo, hi = min(r), max(r)
            K = max(K, hi, 1 / lo)
            width[hb] = math.log(hi / lo)
        slope = bucket_slope(width)
        ok &= abs(slope) <= SLOPE_TOL
        details.append(f"{name}: K {K:.3f}, log-width slope {slope:+.4f}")
    criterion("C3 Taylor vs infimum pseudodistance", ok, "; ".join(details) + f" (±{SLOPE_TOL})")


def _chain(dom, patch, rng):
    """A chain from ``x`` to ``y`` through jittered interpolants, all inside the domain."""
    x, y = (patch.fiber_point(patch.boundary_point(rng), log_uniform(rng, 1e-6, 1e-2)) for _ in range(2))
    k = int(rng.integers(1, 11))
    scale = np.linalg.norm(x - y) / (k + 1)
    while True:
        inner = []
        for t in np.sort(rng.uniform(size=k)):
            z = x + t * (y - x) + 0.3 * scale * (rng.standard_normal(dom.n) + 1j * rng.standard_normal(dom.n))
            if r_value(dom, z) >= 0:
                z = 0.5 * (z + radial_boundary_point(dom, z) * (1 - 1e-4))
            inner.append(z)
        if all(r_value(dom, z) < 0 for z in inner):
            return [x, *inner, y]


def test_c04_quasi_metric(criterion):
    dom = DOMAINS["ball"]
    cal = calibrate(dom, sample_count=1000, seed=42, patch_radius=0.1)
    fresh = calibrate(dom, sample_count=1000, seed=43, patch_radius=0.1)
    excess = fresh.C_quasi / cal.C_quasi - 1
    patch = PatchSampler(dom, radius=0.1)
    violations = excluded = checked = 0
    index = 0
    while checked < 1000:
        chain = _chain(dom, patch, rng_for(44, index))
        index += 1
        try:
            violations += not power_chain_check(cal, chain, cal.eps0, domain=dom)
            checked += 1
        except OutOfChartError:
            excluded += 1
    ok = excess < 0.05 and violations == 0
    criterion("C4 quasi-metric constant and power chains", ok,
              f"C_quasi {cal.C_quasi:.4f} ({cal.excluded} triples outside the chart), "
              f"fresh seed {fresh.C_quasi:.4f} ({100 * excess:+.2f}%, limit 5%), eps0 {cal.eps0:.4f}, "
              f"{violations} violations over {checked} chains ({excluded} outside the chart)")


def test_c05_sandwich_ball(criterion):
    dom = DOMAINS["ball"]
    sp = ShellPairSampler(dom)
    buckets = np.geomspace(1e-5, 5e-2, 5)
    violations = 0
    worst = math.inf
    for k in range(1000):
        x, y = sp.pair(42, k // 5, buckets[k % 5])
        s = distance_sandwich(dom, x, y)
        exact = ball_distance(x, y)
        violations += not (s.K_lo <= exact <= s.K_up)
        worst = min(worst, exact - s.K_lo, s.K_up - exact)
    criterion("C5 sandwich contains the ball distance", violations == 0,
              f"{violations} violations over 1000 pairs, depths 1e-5..1e-1, smallest margin {worst:.2e}")


def test_c06_main_band(criterion):
    details = []
    ok = True
    for name, dom in DOMAINS.items():
        summary = summarize_sandwich(sandwich_rows(dom, 500, DEPTH_BUCKETS, 42))
        slope = summary["width_slope"]
        lo, hi = summary["band"]
        ok &= slope is not None and abs(slope) <= SLOPE_TOL
        details.append(f"{name}: band [{lo:.3f}, {hi:.3f}], width slope {slope:+.4f}, "
                       f"{summary['out_of_chart']} outside the chart")
    criterion("C6 residual band of K - g", ok, "; ".join(details) + f" (±{SLOPE_TOL})")


def test_c07_polydisk_separation(criterion):
    dom = DOMAINS["ball"]
    floors = []
    for h in (1e-2, 1e-3, 1e-4, 1e-5):
        patch = PatchSampler(dom)
        rng = np.random.default_rng(1)
        floors.append(min(polydisk_separation(dom, patch.fiber_point(patch.boundary_point(rng), h), 2.0,
                                              samples=32, seed=k) for k in range(5)))
    var = spread(floors)
    criterion("C7 polydisk separation floor", min(floors) > 0 and var < 0.25,
              f"floors {', '.join(f'{f:.4f}' for f in floors)}, variation {100 * var:.1f}% (limit 25%)")


def test_c08_hyperbolicity(criterion):
    details = []
    ok = True
    for name, dom in DOMAINS.items():
        reps = [four_point_scan(dom, ScanConfig(quadruples=1000), seed=s) for s in (42, 43)]
        agree = relative_change(reps[0].max_defect, reps[1].max_defect)
        tri = triangle_scan(dom, triangles=200, seed=42)
        slopes = [r.slope for r in reps] + [tri.slope]
        ok &= all(abs(s) <= SLOPE_TOL for s in slopes) and agree < 0.25
        details.append(f"{name}: four-point max {reps[0].max_defect:.3f}/{reps[1].max_defect:.3f} "
                       f"(seeds differ {100 * agree:.1f}%), slopes {slopes[0]:+.4f}/{slopes[1]:+.4f}, "
                       f"triangle max {tri.defect_quantiles['q100']:.3f} slope {slopes[2]:+.4f}")
    criterion("C8 bounded hyperbolicity defects", ok, "; ".join(details) + f" (±{SLOPE_TOL}, 25%)")


def test_c09_visibility(criterion):
    details = []
    ok = True
    for name in ("ball", "e12"):
        rep = visibility_scan(DOMAINS[name], pairs=200, seed=42)
        fl = [rep.floors[h] for h in sorted(rep.floors, reverse=True)]
        ok &= all(f is not None and f > 0 for f in fl) and rep.slope >= -SLOPE_TOL
        details.append(f"{name}: floors {', '.join(f'{f:.4f}' for f in fl)}, log slope {rep.slope:+.4f}")
    criterion("C9 visibility ratio floor", ok, "; ".join(details) + f" (slope >= -{SLOPE_TOL})")


def test_c10_visual_metric(criterion):
    dom = DOMAINS["ball"]
    p0 = PatchSampler(dom, radius=0.1).p0
    Ks = {}
    for rad, off in [(0.1, 0.0), (0.07, 0.0), (0.05, 0.0), (0.07, 0.05), (0.07, -0.05)]:
        patch = PatchSampler(dom, radius=rad)
        foot = radial_boundary_point(dom, p0 + off * np.array([0, 1j]))
        omega = omega_over(dom, foot, VISUAL_OMEGA_DEPTH)
        rows = visual_metric_ratio(dom, omega, boundary_pairs(dom, patch, 100, 42))
        (_, _, K), flagged = visual_band(rows)
        Ks[(rad, off)] = K
    ref = Ks[(0.1, 0.0)]
    worst = max(relative_change(ref, K) for K in Ks.values())
    criterion("C10 visual metric band", worst < 0.25,
              "K " + ", ".join(f"r={r} dz={o:+}: {K:.3f}" for (r, o), K in Ks.items())
              + f"; largest change {100 * worst:.1f}% (limit 25%)")
