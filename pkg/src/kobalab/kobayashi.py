"""Certified two-sided bounds for the Kobayashi distance of a convex domain.

Lower bounds are the two constant-free estimates

* ``est3 = 1/2 log(1 + |x - y| / (delta(x, x-y) ^ delta(y, x-y)))``
* ``est4 = 1/2 |log(delta(x) / delta(y))|``

Upper bounds are lengths of explicit polygonal paths.  Each straight piece
``[a, b]`` lies in the planar convex slice ``D = Omega ∩ (a + C(b - a))`` and
``K_Omega(a, b) <= K_D(a, b)``.  On ``D`` the Kobayashi density is at most
``1/delta_D``; since ``delta_D`` is concave along the segment, ``1/delta_D``
is convex and the trapezoid rule over-estimates its integral.  The slice
distance used there is the certified lower bound of
:func:`~kobalab._kernels.slice_min_cert`.  Disks
inscribed in ``D`` give a second certified bound, the exact Poincare
distance, which is sharp where the path runs into the boundary.  The two are
combined by a shortest-chain search over a mesh graded to the boundary
distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .domain import (as_point, boundary_distance,
                     directional_boundary_distance, r_value, restriction_poly,
                     to_real)
from .errors import ConfigurationError, NumericalError, OutOfChartError
from .pseudo import g_value, pseudo_M_inf

QUAD_CAP = 2 ** 14
DISK_MARGIN = 1e-10
MESH_KAPPA = 0.5
LIFT_FACTORS = tuple(2.0 ** k for k in range(-8, 4))
PROFILE_PHASES = 32
PROFILE_PHASE_TOL = 1e-6


# ---------------------------------------------------------------------------
# infinitesimal bounds and paths


def infinitesimal_bounds(domain, z, v):
    """``(|v| / (2 delta(z, v)), |v| / delta(z, v))``, which bracket the Kobayashi metric."""
    v = as_point(v, domain.n)
    nv = float(np.linalg.norm(v))
    if nv == 0:
        raise ConfigurationError("the tangent vector must be nonzero")
    d = directional_boundary_distance(domain, z, v)
    return nv / (2.0 * d), nv / d


@dataclass(frozen=True, eq=False)
class Path:
    """Polygonal path through interior knots (rows of ``knots``)."""

    knots: np.ndarray

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.knots, dtype=complex))
        object.__setattr__(self, "knots", k)

    @property
    def segments(self):
        return [(self.knots[i], self.knots[i + 1]) for i in range(len(self.knots) - 1)]

    def euclidean_length(self):
        return float(sum(np.linalg.norm(b - a) for a, b in self.segments))

    def validate(self, domain, samples=8):
        """Check interior knots, distinct neighbours and interior sampled segment points."""
        for p in self.knots:
            if r_value(domain, p) >= 0:
                raise ConfigurationError("path knot is not interior")
        for a, b in self.segments:
            if np.array_equal(a, b):
                raise ConfigurationError("consecutive knots coincide")
            for s in (np.arange(samples) + 0.5) / samples:
                if r_value(domain, a + s * (b - a)) >= 0:
                    raise ConfigurationError("path segment leaves the domain")
        return True

    def points(self, count):
        """``count`` points spread along the path proportionally to Euclidean length."""
        seg = self.segments
        if not seg:
            return np.repeat(self.knots[:1], count, axis=0)
        lens = np.array([np.linalg.norm(b - a) for a, b in seg])
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        out = []
        for s in np.linspace(0.0, cum[-1], count):
            i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg) - 1)
            a, b = seg[i]
            f = 0.0 if lens[i] == 0 else (s - cum[i]) / lens[i]
            out.append(a + f * (b - a))
        return np.array(out)


def _segment_frame(a, b):
    d = b - a
    L = float(np.linalg.norm(d))
    u = d / L
    return L, to_real(u), to_real(1j * u)


def _profile(domain, a, b, kappa=MESH_KAPPA, extra=(), ray=None):
    """Graded mesh on ``[a, b]``, or on ``a + t u, 0 <= t <= L`` for ``ray=(u, L)``."""
    if ray is None:
        L, U, V = _segment_frame(a, b)
    else:
        u, L = ray
        U, V = to_real(u), to_real(1j * u)
    ext = np.sort(np.asarray([e for e in extra if 0 < e < L], dtype=float))
    ts, ds, ph, ok = K.segment_profile(*domain.kargs, to_real(a), U, V, L, kappa, ext,
                                       QUAD_CAP, PROFILE_PHASES, PROFILE_PHASE_TOL)
    if not ok:
        raise NumericalError("segment mesh exceeded the point cap", last_iterate=(ts, ds))
    if not np.all(np.isfinite(ds)) or np.any(ds <= 0):
        raise ConfigurationError("segment leaves the domain")
    return ts, ds


def _canonical(a, b):
    """Order segment endpoints so that a segment and its reverse share one mesh."""
    ka, kb = tuple(to_real(a)), tuple(to_real(b))
    return (a, b) if ka <= kb else (b, a)


def segment_upper(domain, a, b, kappa=MESH_KAPPA):
    """Certified upper bound for ``K_Omega(a, b)`` from the straight segment."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if np.array_equal(a, b):
        return 0.0
    a, b = _canonical(a, b)
    ts, ds = _profile(domain, a, b, kappa)
    return float(K.chain_costs(ts, ds, DISK_MARGIN)[-1])


def path_upper(domain, path, kappa=MESH_KAPPA):
    """Sum of certified segment bounds along a polygonal path."""
    return float(sum(segment_upper(domain, a, b, kappa) for a, b in path.segments))


def path_samples(domain, path, count, kappa=MESH_KAPPA):
    """``count`` points along ``path``, evenly spaced in the length density ``1/delta_D``.

    Uniform Euclidean spacing would put almost every sample far from the
    boundary; spacing by the (trapezoid) integral of the slice density keeps
    consecutive samples a bounded Kobayashi distance apart.
    """
    segs = [(a, b) for a, b in path.segments if not np.array_equal(a, b)]
    if not segs:
        return np.repeat(path.knots[:1], count, axis=0)
    params = []
    cums = []
    offset = 0.0
    for j, (a, b) in enumerate(segs):
        ts, ds = _profile(domain, a, b, kappa)
        c = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(ts) * (1.0 / ds[:-1] + 1.0 / ds[1:]))])
        params.append((j, ts))
        cums.append(offset + c)
        offset += c[-1]
    out = []
    for s in np.linspace(0.0, offset, count):
        j = next((k for k in range(len(cums)) if s <= cums[k][-1]), len(cums) - 1)
        t = float(np.interp(s, cums[j], params[j][1]))
        a, b = segs[j]
        L = float(np.linalg.norm(b - a))
        out.append(a + (t / L) * (b - a))
    return np.array(out)


def path_length_bounds(domain, path, quad_points=QUAD_CAP, rtol=1e-4):
    """Bounds ``(L_lo, L_up)`` on the Kobayashi length of a polygonal path.

    On every segment the upper infinitesimal bound ``1/delta_D`` is integrated
    with the composite trapezoid rule (an over-estimate, by convexity) and the
    midpoint rule (an under-estimate); ``L_lo`` is half the midpoint value,
    matching the lower infinitesimal bound.  Meshes start graded to the
    boundary distance and are refined by halving until the trapezoid sum
    changes by less than ``rtol`` relatively.

    Raises
    ------
    NumericalError
        If a segment needs more than ``quad_points`` points; the exception
        carries the last ``(L_lo, L_up)`` bracket.
    """
    lo_tot = up_tot = 0.0
    for a, b in path.segments:
        if np.array_equal(a, b):
            continue
        lo, up = _segment_quadrature(domain, a, b, quad_points, rtol)
        lo_tot += lo
        up_tot += up
    return lo_tot, up_tot


def _segment_quadrature(domain, a, b, cap, rtol):
    L, U, V = _segment_frame(a, b)
    ar = to_real(a)
    ts, ds = _profile(domain, a, b)

    def dist(t):
        val, _, cert = K.slice_min_cert(*domain.kargs, ar + t * U, U, V, 0.0,
                                        PROFILE_PHASES, PROFILE_PHASE_TOL)
        return cert, val

    prev = None
    while True:
        h = np.diff(ts)
        trap = float(np.sum(0.5 * h * (1.0 / ds[:-1] + 1.0 / ds[1:])))
        mids = 0.5 * (ts[:-1] + ts[1:])
        both = np.array([dist(t) for t in mids])
        dm = both[:, 0]
        # the lower bound wants actual ray lengths, never below delta_D
        mid = float(np.sum(h / both[:, 1]))
        if prev is not None and abs(trap - prev) <= rtol * trap:
            return 0.5 * mid, trap
        if 2 * ts.size - 1 > cap:
            raise NumericalError("quadrature did not converge within the point cap",
                                 last_iterate=(0.5 * mid, trap))
        prev = trap
        t2 = np.empty(2 * ts.size - 1)
        d2 = np.empty_like(t2)
        t2[0::2], t2[1::2] = ts, mids
        d2[0::2], d2[1::2] = ds, dm
        ts, ds = t2, d2


# ---------------------------------------------------------------------------
# lower bounds


def lower_components(domain, x, y, deltas=None):
    """``(est3, est4)`` for a pair of distinct interior points."""
    v = y - x
    dxv = directional_boundary_distance(domain, x, v)
    dyv = directional_boundary_distance(domain, y, v)
    est3 = 0.5 * math.log1p(float(np.linalg.norm(v)) / min(dxv, dyv))
    if deltas is None:
        deltas = (boundary_distance(domain, x).delta, boundary_distance(domain, y).delta)
    est4 = 0.5 * abs(math.log(deltas[0] / deltas[1]))
    return est3, est4


# ---------------------------------------------------------------------------
# almost geodesics


def _lift_parameter(domain, x, nvec, level):
    """Smallest ``t > 0`` with ``r(x - t n) = -level`` (``None`` if the ray never gets that deep)."""
    c = restriction_poly(domain, x, -nvec).copy()
    c[0] += level
    if c[0] >= 0 and abs(r_value(domain, x)) >= level:
        return 0.0
    roots = np.roots(c[::-1])
    real = [t.real for t in roots if abs(t.imag) <= 1e-9 * max(1.0, abs(t)) and t.real > 0]
    if not real:
        return None
    t = min(real)
    # polish on the exact polynomial
    dc = np.polynomial.polynomial.polyder(c)
    for _ in range(3):
        f = np.polynomial.polynomial.polyval(t, c)
        df = np.polynomial.polynomial.polyval(t, dc)
        if df == 0:
            break
        t -= f / df
    return float(t)


@dataclass
class _NormalLeg:
    """Normal ray from a base point with chain costs to every mesh point."""

    base: np.ndarray
    direction: np.ndarray
    ts: np.ndarray
    costs: np.ndarray

    def point(self, t):
        return self.base + t * self.direction

    def cost(self, t):
        i = int(np.argmin(np.abs(self.ts - t)))
        if self.ts[i] != t:
            raise RuntimeError("lift parameter is not a mesh point")
        return float(self.costs[i])


def _normal_leg(domain, x, lifts):
    bd = boundary_distance(domain, x)
    d = -bd.normal
    top = max(lifts)
    ts, ds = _profile(domain, x, None, extra=lifts, ray=(d, top))
    return _NormalLeg(base=x, direction=d, ts=ts, costs=K.chain_costs(ts, ds, DISK_MARGIN))


def _lift_levels(domain, x, y, Mxy, Myx):
    rx, ry = abs(r_value(domain, x)), abs(r_value(domain, y))
    if max(Mxy, Myx) <= max(rx, ry):
        m = max(rx, ry)
        return "case1", [(max(rx, s * m), max(ry, s * m)) for s in LIFT_FACTORS]
    return "case2", [(max(rx, s * Mxy), max(ry, s * Myx)) for s in LIFT_FACTORS]


def almost_geodesic(domain, x, y, M_pair=None, return_all=False):
    """The lifted path ``x -> x' -> y' -> y`` with the smallest certified length.

    Both endpoints are pushed along their inward normals to the levels of
    the case split (``|r(x')| = M(x, y)`` and ``|r(y')| = M(y, x)`` when ``M``
    dominates ``|r(x)| v |r(y)|``, otherwise the shallower point is lifted to
    the level of the deeper one).  The levels are then scanned over the
    factors ``2^-8 .. 8`` and the path with the smallest upper bound is kept.
    Lifts that would leave the chart are dropped; if none remain the straight
    segment is returned.

    Returns
    -------
    (Path, float, str)
        The path, its certified length bound and the case tag.
    """
    x = as_point(x, domain.n)
    y = as_point(y, domain.n)
    if np.array_equal(x, y):
        return Path(x[None, :]), 0.0, "degenerate"
    Mxy, Myx = M_pair if M_pair is not None else (pseudo_M_inf(domain, x, y), pseudo_M_inf(domain, y, x))
    tag, levels = _lift_levels(domain, x, y, Mxy, Myx)
    cap = domain.level_cap
    nx = -boundary_distance(domain, x).normal
    ny = -boundary_distance(domain, y).normal
    plans = []
    for lx, ly in levels:
        if lx > cap or ly > cap:
            continue
        tx = _lift_parameter(domain, x, -nx, lx)
        ty = _lift_parameter(domain, y, -ny, ly)
        if tx is None or ty is None:
            continue
        plans.append((tx, ty))
    if not plans:
        return Path(np.array([x, y])), segment_upper(domain, x, y), tag + "_straight"
    legx = _normal_leg(domain, x, [p[0] for p in plans if p[0] > 0] or [0.0]) if any(p[0] > 0 for p in plans) else None
    legy = _normal_leg(domain, y, [p[1] for p in plans if p[1] > 0] or [0.0]) if any(p[1] > 0 for p in plans) else None
    found = []
    for tx, ty in plans:
        xp = x if tx == 0 else legx.point(tx)
        yp = y if ty == 0 else legy.point(ty)
        cost = (0.0 if tx == 0 else legx.cost(tx)) + (0.0 if ty == 0 else legy.cost(ty))
        if not np.array_equal(xp, yp):
            cost += segment_upper(domain, xp, yp)
        knots = [x] + ([xp] if tx > 0 else []) + ([yp] if ty > 0 else []) + [y]
        found.append((cost, Path(np.array(knots))))
    if return_all:
        return found, tag
    cost, path = min(found, key=lambda c: c[0])
    return path, cost, tag


# ---------------------------------------------------------------------------
# the sandwich


@dataclass(frozen=True, eq=False)
class DistanceSandwich:
    """Certified interval ``[K_lo, K_up]`` for ``K_Omega(x, y)`` with ``g(x, y)``."""

    K_lo: float
    K_up: float
    g: float
    path: Path
    components: dict = field(default_factory=dict)
    case_tag: str = ""
    M: float = float("nan")
    deltas: tuple = ()

    @property
    def width(self):
        return self.K_up - self.K_lo


def distance_sandwich(domain, x, y, refine=False):
    """Two-sided certified bounds for the Kobayashi distance between ``x`` and ``y``.

    Parameters
    ----------
    refine : bool
        Also run coordinate descent on the interior knots of the best path.

    Returns
    -------
    DistanceSandwich
        ``components`` holds ``est3``, ``est4``, ``straight``,
        ``almost_geodesic`` and, when refined, ``refined``; it also records
        the constant-free part of the two-log upper estimate as the
        diagnostic ``two_log`` (it only bounds ``K`` up to an unknown
        additive constant, so it never enters ``K_up``).
    """
    x = as_point(x, domain.n)
    y = as_point(y, domain.n)
    if np.array_equal(x, y):
        raise ConfigurationError("distance_sandwich needs two distinct points")
    dx = boundary_distance(domain, x).delta
    dy = boundary_distance(domain, y).delta
    est3, est4 = lower_components(domain, x, y, (dx, dy))
    straight = segment_upper(domain, x, y)
    comps = {"est3": est3, "est4": est4, "straight": straight}
    dist = float(np.linalg.norm(x - y))
    comps["two_log"] = 0.5 * math.log1p(dist / dx) + 0.5 * math.log1p(dist / dy)
    best_path = Path(np.array([x, y]))
    K_up = straight
    try:
        Mxy = pseudo_M_inf(domain, x, y)
        Myx = pseudo_M_inf(domain, y, x)
    except OutOfChartError:
        # outside the chart M is undefined: lift both points to the chart top
        cap = domain.level_cap
        Mxy = Myx = float("nan")
        g = float("nan")
        path, ag, tag = almost_geodesic(domain, x, y, (cap, cap))
        tag = "out_of_chart"
    else:
        path, ag, tag = almost_geodesic(domain, x, y, (Mxy, Myx))
        g = g_value(domain, x, y, M=Mxy, deltas=(dx, dy))
    comps["almost_geodesic"] = ag
    if ag < K_up:
        K_up, best_path = ag, path
    if refine and len(best_path.knots) > 2:
        path, val = refine_knots(domain, best_path, K_up)
        comps["refined"] = val
        if val < K_up:
            K_up, best_path = val, path
    K_lo = max(est3, est4)
    return DistanceSandwich(K_lo=K_lo, K_up=K_up, g=g, path=best_path, components=comps,
                            case_tag=tag, M=Mxy, deltas=(dx, dy))


def refine_knots(domain, path, value=None, iterations=50, max_knots=8):
    """Coordinate descent on the interior knots of a path, minimizing its upper bound.

    Each interior knot is moved along the real coordinate directions with a
    step that halves whenever no move improves the bound.  Only the first
    ``max_knots`` interior knots are touched.
    """
    knots = path.knots.copy()
    inner = list(range(1, min(len(knots) - 1, max_knots + 1)))
    if not inner:
        return path, path_upper(domain, path) if value is None else value
    best = path_upper(domain, path) if value is None else value
    n2 = 2 * domain.n
    step = 0.25 * min(boundary_distance(domain, knots[i]).delta for i in inner)
    for _ in range(iterations):
        improved = False
        for i in inner:
            for a in range(n2):
                for sgn in (1.0, -1.0):
                    trial = knots.copy()
                    e = np.zeros(n2)
                    e[a] = sgn * step
                    trial[i] = trial[i] + (e[0::2] + 1j * e[1::2])
                    if r_value(domain, trial[i]) >= 0:
                        continue
                    try:
                        val = path_upper(domain, Path(trial))
                    except (ConfigurationError, NumericalError):
                        continue
                    if val < best:
                        best, knots, improved = val, trial, True
        if not improved:
            step *= 0.5
            if step < 1e-6 * path.euclidean_length():
                break
    return Path(knots), best


def polydisk_separation(domain, x, c=2.0, samples=64, seed=0):
    """Smallest lower bound ``K_lo(x, y)`` over samples ``y`` of ``∂P(x, c|r(x)|) ∩ Omega``."""
    from .frames import build_minimal_frame, sample_polydisk_boundary
    from .sampling import rng_for

    x = as_point(x, domain.n)
    fr = build_minimal_frame(domain, x, c * abs(r_value(domain, x)))
    dx = boundary_distance(domain, x).delta
    rng = rng_for(seed, 0)
    best = np.inf
    got = 0
    for _ in range(50 * samples):
        if got >= samples:
            break
        y = sample_polydisk_boundary(fr, rng)
        if r_value(domain, y) >= 0:
            continue
        got += 1
        est3, est4 = lower_components(domain, x, y, (dx, boundary_distance(domain, y).delta))
        best = min(best, max(est3, est4))
    return float(best)


def ball_distance(x, y):
    """Kobayashi distance of the unit ball, ``artanh |phi_x(y)|``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    nx = 1.0 - float(np.vdot(x, x).real)
    ny = 1.0 - float(np.vdot(y, y).real)
    den = abs(1.0 - np.vdot(x, y)) ** 2
    phi2 = 1.0 - nx * ny / den
    phi = math.sqrt(max(phi2, 0.0))
    return math.atanh(phi)
