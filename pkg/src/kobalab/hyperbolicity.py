"""Gromov hyperbolicity diagnostics for ``(Omega, K_Omega)``.

The true distance is unknown, so every quantity is an interval assembled from
certified sandwich bounds; the asserted statistics always use the
conservative endpoint.  Points are sampled as scale-invariant clusters (see
:class:`~kobalab.sampling.ShellPairSampler`): a base point at depth ``h`` and
partners on minimal-basis shells around it, so that a depth bucket sees the
same configurations as the next bucket, only closer to the boundary.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .domain import as_point, boundary_distance, eval_r, r_value
from .errors import ConfigurationError, OutOfChartError
from .kobayashi import distance_sandwich, path_samples, segment_upper
from .parallel import pmap
from .pseudo import pseudo_M_inf
from .sampling import PatchSampler, ShellPairSampler, rng_for
from .stats import log_inverse, ols_slope, quantiles, ratio_band, relative_change

DEPTH_BUCKETS = (1e-4, 1e-5, 1e-6, 1e-7)
SIDE_POINTS = 64
SIDE_PROBES = 16
NEAREST_CANDIDATES = 2
SIDE_SEARCH_STEP = 8
FIBER_GRID = (1e-3, 1e-4, 1e-5)
FIBER_STABILITY = 0.05
VISUAL_OMEGA_DEPTH = 0.1
VISUAL_MIN_SEPARATION = 0.5


# ---------------------------------------------------------------------------
# interval products


class SandwichTable:
    """Lazily computed sandwich intervals among a fixed list of points."""

    def __init__(self, domain, points):
        self.domain = domain
        self.points = [as_point(p, domain.n) for p in points]
        self._cache = {}

    def sandwich(self, a, b):
        key = (min(a, b), max(a, b))
        if key not in self._cache:
            self._cache[key] = distance_sandwich(self.domain, self.points[key[0]], self.points[key[1]])
        return self._cache[key]

    def interval(self, a, b):
        if a == b or np.array_equal(self.points[a], self.points[b]):
            return 0.0, 0.0
        s = self.sandwich(a, b)
        return s.K_lo, s.K_up

    def product(self, a, b, o):
        """Interval for ``(p_a | p_b)_{p_o}``."""
        return product_interval(self.interval(a, o), self.interval(o, b), self.interval(a, b))


def product_interval(K_xo, K_oy, K_xy):
    """``1/2 (K(x,o) + K(o,y) - K(x,y))`` in interval arithmetic."""
    lo = 0.5 * (K_xo[0] + K_oy[0] - K_xy[1])
    hi = 0.5 * (K_xo[1] + K_oy[1] - K_xy[0])
    return lo, hi


def gromov_product_interval(domain, x, y, omega):
    """Certified interval for the Gromov product ``(x|y)_omega``.

    Coincident points are allowed; a repeated pair contributes the exact
    distance 0.
    """
    return SandwichTable(domain, [x, y, omega]).product(0, 1, 2)


def gromov_product_estimate(domain, x, y, omega):
    """The pseudodistance expression that matches ``(x|y)_omega`` up to an additive constant::

        1/2 log [(M(x,w) + |r(x)| v |r(w)|) (M(y,w) + |r(y)| v |r(w)|)
                 / ((M(x,y) + |r(x)| v |r(y)|) |r(w)|)]
    """
    x, y, w = (as_point(p, domain.n) for p in (x, y, omega))
    rx, ry, rw = (abs(r_value(domain, p)) for p in (x, y, w))
    num = (pseudo_M_inf(domain, x, w) + max(rx, rw)) * (pseudo_M_inf(domain, y, w) + max(ry, rw))
    den = (pseudo_M_inf(domain, x, y) + max(rx, ry)) * rw
    return 0.5 * math.log(num / den)


def four_point_defect(table, a, b, c, o):
    """Largest defect interval of ``{a, b, c}`` with base ``o`` over the three role choices.

    For the middle point ``z`` and outer pair ``(x, y)`` the defect is
    ``min((x|z), (z|y)) - (x|y)``.  Returns ``(lo, hi)`` of the role with the
    largest upper endpoint.
    """
    best = None
    for x, z, y in ((a, c, b), (a, b, c), (b, a, c)):
        pxz, pzy, pxy = table.product(x, z, o), table.product(z, y, o), table.product(x, y, o)
        d = (min(pxz[0], pzy[0]) - pxy[1], min(pxz[1], pzy[1]) - pxy[0])
        if best is None or d[1] > best[1]:
            best = d
    return best


@dataclass(frozen=True)
class GromovSample:
    """One quadruple ``(x, y, z, omega)`` with its product and defect intervals."""

    points: tuple
    products: tuple
    defect: tuple
    depth: float = float("nan")


# ---------------------------------------------------------------------------
# four-point scan


@dataclass(frozen=True)
class ScanConfig:
    """Sampling plan for the four-point scan.

    ``quadruples`` are split evenly over the depth buckets and drawn from
    clusters of ``cluster_size`` points.  Every triple of a cluster, together
    with the deep base point ``omega``, forms a quadruple.  Each bucket uses
    the same cluster indices, so the buckets differ only in depth.  ``omega`` lies over the foot of the cluster's base point at
    depth ``omega_depth``.
    """

    quadruples: int = 1000
    cluster_size: int = 8
    buckets: tuple = DEPTH_BUCKETS
    omega_depth: float = 0.05
    s_lo: float = 0.1
    s_hi: float = 4.0
    patch_radius: float = 0.02

    def __post_init__(self):
        if self.quadruples < 1:
            raise ConfigurationError("quadruples must be at least 1")
        if self.cluster_size < 3:
            raise ConfigurationError("clusters need at least three points")
        if not self.buckets or min(self.buckets) <= 0:
            raise ConfigurationError("depth buckets must be positive")


@dataclass(frozen=True)
class DefectReport:
    """Summary of a defect scan.

    ``depth_stratification`` maps each bucket depth to the largest upper
    defect endpoint seen there; ``slope`` is the least-squares slope of those
    maxima against ``log(1/h)``.
    """

    sample_count: int
    seed: int
    defect_upper_quantiles: dict
    interval_width_stats: dict
    depth_stratification: dict
    slope: float | None = None
    excluded: int = 0
    samples: list = field(default_factory=list, repr=False)

    @property
    def max_defect(self):
        return self.defect_upper_quantiles["q100"]


def omega_over(domain, x, depth):
    """The point at ``depth`` on the inward normal through the boundary foot of ``x``.

    ``x`` may be interior or a boundary point.
    """
    x = as_point(x, domain.n)
    if r_value(domain, x) < 0:
        bd = boundary_distance(domain, x)
        return bd.foot - depth * bd.normal
    _, g, _ = eval_r(domain, x)
    return x - depth * g / np.linalg.norm(g)


def _bucket_slope(strat):
    hs = [h for h, v in strat.items() if v is not None]
    return ols_slope(log_inverse(hs), [strat[h] for h in hs])


def four_point_scan(domain, config=None, seed=42, sampler=None):
    """Worst-case four-point defects over depth-stratified quadruples.

    Parameters
    ----------
    domain : ConvexDomainSpec
    config : ScanConfig, optional
    seed : int
    sampler : ShellPairSampler, optional
        Defaults to the two small patches of
        :func:`~kobalab.sampling.default_patches`.

    Returns
    -------
    DefectReport
        Clusters with a pair outside the chart are skipped and counted in
        ``excluded``.
    """
    config = config or ScanConfig()
    if sampler is None:
        from .sampling import default_patches

        sampler = ShellPairSampler(domain, default_patches(domain, config.patch_radius),
                                   s_lo=config.s_lo, s_hi=config.s_hi)
    quota = -(-config.quadruples // len(config.buckets))
    per_cluster = math.comb(config.cluster_size, 3)
    samples = []
    widths = []
    excluded = 0
    for hb in config.buckets:
        got = 0
        index = 0
        pending = []
        while got < quota:
            if not pending:
                need = -(-(quota - got) // per_cluster)
                work = partial(_cluster_table, domain, sampler, seed, hb, config.cluster_size,
                               config.omega_depth)
                pending = pmap(work, range(index, index + need))[::-1]
            pts, omega, table, ok = pending.pop()
            index += 1
            o = len(pts)
            if not ok:
                excluded += 1
                _check_exclusions(excluded, index)
                continue
            widths.extend(table.sandwich(a, b).width for a, b in itertools.combinations(range(o + 1), 2))
            for a, b, c in itertools.combinations(range(o), 3):
                if got >= quota:
                    break
                d = four_point_defect(table, a, b, c, o)
                prods = (table.product(a, b, o), table.product(a, c, o), table.product(c, b, o))
                samples.append(GromovSample(points=(pts[a], pts[b], pts[c], omega), products=prods,
                                            defect=d, depth=hb))
                got += 1
    upper = np.array([s.defect[1] for s in samples])
    depth = np.array([s.depth for s in samples])
    strat = {hb: (float(upper[depth == hb].max()) if np.any(depth == hb) else None)
             for hb in config.buckets}
    return DefectReport(sample_count=len(samples), seed=seed,
                        defect_upper_quantiles=quantiles(upper),
                        interval_width_stats=_width_stats(widths),
                        depth_stratification=strat, slope=_bucket_slope(strat),
                        excluded=excluded, samples=samples)


def _cluster_table(domain, sampler, seed, hb, size, omega_depth, index):
    """Cluster ``index`` with its base point and sandwich table; ``ok`` is False outside the chart."""
    pts = sampler.cluster(seed, index, hb, size)
    omega = omega_over(domain, pts[0], omega_depth)
    table = SandwichTable(domain, list(pts) + [omega])
    pairs = itertools.combinations(range(size + 1), 2)
    ok = not any(table.sandwich(a, b).case_tag == "out_of_chart" for a, b in pairs)
    return pts, omega, table, ok


def _check_exclusions(excluded, drawn):
    if excluded > 20 and excluded > 0.9 * drawn:
        raise ConfigurationError("almost every sample leaves the chart")


def _width_stats(widths):
    w = np.asarray(widths, dtype=float)
    out = quantiles(w)
    out["mean"] = float(w.mean()) if w.size else None
    return out


# ---------------------------------------------------------------------------
# thin triangles


def _delta_all(domain, pts):
    return np.array([boundary_distance(domain, p).delta for p in pts])


def _distance_to_side(domain, u, du, sides, dsides, candidates=NEAREST_CANDIDATES):
    """Upper bound for ``min_w K(u, w)`` over the union of discretized sides.

    On each side the candidates are ranked by the quasi-hyperbolic proxy
    ``log(1 + |u - w| / min(delta(u), delta(w))) + 1/2 |log(delta(u)/delta(w))|``
    and the straight-segment bound is evaluated for the best few; from the
    best of them a pattern search along the side (steps 8, 4, 2, 1) lowers
    the bound further.
    Any evaluated point gives a valid upper bound for the minimum.
    """
    best = np.inf
    for side, dside in zip(sides, dsides):
        gap = np.linalg.norm(side - u[None, :], axis=1)
        if np.any(gap == 0):
            return 0.0
        proxy = np.log1p(gap / np.minimum(du, dside)) + 0.5 * np.abs(np.log(du / dside))
        seen = {}

        def value(k):
            if k not in seen:
                seen[k] = segment_upper(domain, u, side[k])
            return seen[k]

        top = [int(k) for k in np.argsort(proxy, kind="stable")[:candidates]]
        k = min(top, key=value)
        step = SIDE_SEARCH_STEP
        while step >= 1:
            nbrs = [j for j in (k - step, k + step) if 0 <= j < len(side)]
            j = min(nbrs, key=value)
            if value(j) < value(k):
                k = j
            else:
                step //= 2
        best = min(best, value(k))
    return float(best)


def thin_triangle_defect(domain, x, y, z, sandwiches=None, side_points=SIDE_POINTS,
                         probes=SIDE_PROBES, return_details=False):
    """Thin-triangle defect of the witness triangle on ``x, y, z``.

    Each side is the ``K_up``-optimal path of the pair's sandwich, discretized
    at ``side_points`` points spaced by the slice length density.  For
    ``probes`` points ``u`` of each side the distance to the union of the
    other two sides is bounded above (see :func:`_distance_to_side`); the
    defect is the largest of these bounds.  Because the sides are
    quasi-geodesics, the defect of a true geodesic triangle can differ by up
    to twice the sandwich widths, which are returned alongside when
    ``return_details`` is set.
    """
    pts = [as_point(p, domain.n) for p in (x, y, z)]
    if sandwiches is None:
        sandwiches = {}
    sides = []
    widths = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        if np.array_equal(pts[a], pts[b]):
            sides.append(pts[a][None, :].repeat(side_points, axis=0))
            widths.append(0.0)
            continue
        s = sandwiches.get((a, b)) or distance_sandwich(domain, pts[a], pts[b])
        sides.append(path_samples(domain, s.path, side_points))
        widths.append(s.width)
    deltas = [_delta_all(domain, s) for s in sides]
    step = max(1, side_points // probes)
    defect = 0.0
    for i in range(3):
        others = [j for j in range(3) if j != i]
        for k in range(0, side_points, step):
            u = sides[i][k]
            d = _distance_to_side(domain, u, deltas[i][k], [sides[j] for j in others],
                                  [deltas[j] for j in others])
            defect = max(defect, d)
    if return_details:
        return defect, {"widths": widths}
    return defect


@dataclass(frozen=True)
class TriangleReport:
    sample_count: int
    seed: int
    defect_quantiles: dict
    depth_stratification: dict
    slope: float | None = None
    width_max: float = float("nan")
    excluded: int = 0
    defects: list = field(default_factory=list, repr=False)


def _triangle_row(domain, sampler, seed, hb, index):
    """Defect and largest side width of triangle ``index``; ``(None, None)`` outside the chart."""
    pts = sampler.cluster(seed, index, hb, 3)
    sw = {}
    for a, b in ((0, 1), (1, 2), (2, 0)):
        sw[a, b] = distance_sandwich(domain, pts[a], pts[b])
        if sw[a, b].case_tag == "out_of_chart":
            return None, None
    d, info = thin_triangle_defect(domain, *pts, sandwiches=sw, return_details=True)
    return d, max(info["widths"])


def triangle_scan(domain, triangles=200, seed=42, buckets=DEPTH_BUCKETS, sampler=None,
                  patch_radius=0.02):
    """Thin-triangle defects over depth-stratified scale-invariant triangles."""
    if triangles < 1:
        raise ConfigurationError("triangles must be at least 1")
    if sampler is None:
        from .sampling import default_patches

        sampler = ShellPairSampler(domain, default_patches(domain, patch_radius))
    quota = -(-triangles // len(buckets))
    defects = []
    excluded = 0
    width_max = 0.0
    for hb in buckets:
        got = 0
        index = 0
        while got < quota:
            batch = range(index, index + quota - got)
            for d, w in pmap(partial(_triangle_row, domain, sampler, seed, hb), batch):
                index += 1
                if d is None:
                    excluded += 1
                    _check_exclusions(excluded, index)
                    continue
                width_max = max(width_max, w)
                defects.append((hb, d))
                got += 1
    h = np.array([t[0] for t in defects])
    v = np.array([t[1] for t in defects])
    strat = {hb: (float(v[h == hb].max()) if np.any(h == hb) else None) for hb in buckets}
    return TriangleReport(sample_count=len(defects), seed=seed, defect_quantiles=quantiles(v),
                          depth_stratification=strat, slope=_bucket_slope(strat),
                          width_max=width_max, excluded=excluded, defects=defects)


# ---------------------------------------------------------------------------
# visibility


def visibility_check(domain, x, y, sandwich=None, samples=SIDE_POINTS, return_details=False):
    """``max_z delta(z) / M(x, y)`` over samples ``z`` of the witness path.

    Coincident points return ``inf``.  With ``return_details`` the comparison
    value ``|x - y|^L / max_z delta(z)`` (``L`` the type bound) is returned too.
    """
    x = as_point(x, domain.n)
    y = as_point(y, domain.n)
    if np.array_equal(x, y):
        return (math.inf, 0.0) if return_details else math.inf
    s = sandwich or distance_sandwich(domain, x, y)
    M = s.M if np.isfinite(s.M) else pseudo_M_inf(domain, x, y)
    pts = np.vstack([s.path.knots, path_samples(domain, s.path, samples)])
    dmax = float(_delta_all(domain, pts).max())
    ratio = dmax / M
    if return_details:
        return ratio, float(np.linalg.norm(x - y)) ** domain.type_bound / dmax
    return ratio


@dataclass(frozen=True)
class VisibilityReport:
    pair_count: int
    seed: int
    floors: dict
    slope: float | None
    rows: list = field(default_factory=list, repr=False)
    excluded: int = 0


class SeparatedPairSampler:
    """Pairs at matched depths over boundary feet at least ``min_sep`` apart.

    Both feet come from one patch; ``y``'s depth is ``x``'s times ``2^u``
    with ``u`` uniform in ``[-1, 1]``.  Random numbers do not depend on the
    bucket depth.
    """

    def __init__(self, domain, patch=None, min_sep=0.05):
        self.domain = domain
        self.patch = patch or PatchSampler(domain, radius=0.1)
        self.min_sep = min_sep

    def pair(self, seed, index, h_b):
        rng = rng_for(seed, index)
        for _ in range(1000):
            p = self.patch.boundary_point(rng)
            q = self.patch.boundary_point(rng)
            if np.linalg.norm(p - q) >= self.min_sep:
                break
        else:
            raise ConfigurationError("patch too small for the requested separation")
        hx = h_b * 2.0 ** rng.uniform()
        hy = hx * 2.0 ** rng.uniform(-1.0, 1.0)
        return self.patch.fiber_point(p, hx), self.patch.fiber_point(q, hy)


def _visibility_row(domain, sampler, seed, item):
    hb, i = item
    x, y = sampler.pair(seed, i, hb)
    try:
        s = distance_sandwich(domain, x, y)
        if s.case_tag == "out_of_chart":
            return None
    except OutOfChartError:
        return None
    ratio, comp = visibility_check(domain, x, y, sandwich=s, return_details=True)
    return hb, i, ratio, comp, s.M


def visibility_scan(domain, pairs=200, seed=42, buckets=(1e-4, 1e-5, 1e-6), sampler=None):
    """Per-bucket floors of the visibility ratio; ``pairs`` is the count per bucket.

    ``slope`` is the least-squares slope of ``log(floor)`` against
    ``log(1/h)``; a decaying floor gives a negative slope.
    """
    if pairs < 1:
        raise ConfigurationError("pairs must be at least 1")
    sampler = sampler or SeparatedPairSampler(domain)
    items = [(hb, i) for hb in buckets for i in range(pairs)]
    out = pmap(partial(_visibility_row, domain, sampler, seed), items)
    rows = [r for r in out if r is not None]
    excluded = len(out) - len(rows)
    floors = {}
    for hb in buckets:
        r = [row[2] for row in rows if row[0] == hb]
        floors[hb] = float(min(r)) if r else None
    hs = [h for h in buckets if floors[h]]
    slope = ols_slope(log_inverse(hs), np.log([floors[h] for h in hs]))
    return VisibilityReport(pair_count=len(rows), seed=seed, floors=floors, slope=slope,
                            rows=rows, excluded=excluded)


# ---------------------------------------------------------------------------
# visual metric


@dataclass(frozen=True)
class VisualRow:
    """One boundary pair: fiber-limit product, its stability and the ratio columns.

    ``ratio`` is ``exp(-2 (xi|eta)) / M`` and ``ratio_literal`` is
    ``exp(-(xi|eta)) / M``; both use the lower endpoint of the product
    interval at the smallest depth of the grid.
    """

    index: int
    product_lo: float
    product_hi: float
    M: float
    ratio: float
    ratio_literal: float
    stable: bool
    differences: tuple


def fiber_product(domain, xi, eta, omega, h_grid=FIBER_GRID):
    """Product intervals ``(xi_h | eta_h)_omega`` along the inward normals, one per ``h``."""
    pk = PatchSampler(domain, center_point=xi)
    out = []
    for h in h_grid:
        x = pk.fiber_point(as_point(xi, domain.n), h)
        y = pk.fiber_point(as_point(eta, domain.n), h)
        out.append(gromov_product_interval(domain, x, y, omega))
    return out


def visual_metric_ratio(domain, omega, pairs, h_grid=FIBER_GRID, tol=FIBER_STABILITY):
    """Ratio table for boundary pairs ``(xi, eta)``.

    The product is followed down the fibers ``xi - h n(xi)``; a row is stable
    when the lower endpoints at the two smallest depths differ by less than
    ``tol`` (the coarser differences, which mostly measure ``h / M``, are
    kept in ``differences``).  ``M`` is
    evaluated at the fiber points of the smallest ``h``; pairs outside the
    chart are flagged.

    Returns
    -------
    list of VisualRow
    """
    omega = as_point(omega, domain.n)
    return pmap(partial(_visual_row, domain, omega, tuple(h_grid), tol), list(enumerate(pairs)))


def _visual_row(domain, omega, h_grid, tol, item):
    i, (xi, eta) = item
    xi = as_point(xi, domain.n)
    eta = as_point(eta, domain.n)
    prods = fiber_product(domain, xi, eta, omega, h_grid)
    los = [p[0] for p in prods]
    diffs = tuple(abs(los[k + 1] - los[k]) for k in range(len(los) - 1))
    pk = PatchSampler(domain, center_point=xi)
    x = pk.fiber_point(xi, h_grid[-1])
    y = pk.fiber_point(eta, h_grid[-1])
    lo, hi = prods[-1]
    try:
        M = pseudo_M_inf(domain, x, y)
    except OutOfChartError:
        return VisualRow(index=i, product_lo=lo, product_hi=hi, M=math.nan, ratio=math.nan,
                         ratio_literal=math.nan, stable=False, differences=diffs)
    return VisualRow(index=i, product_lo=lo, product_hi=hi, M=M,
                     ratio=math.exp(-2.0 * lo) / M, ratio_literal=math.exp(-lo) / M,
                     stable=bool(diffs) and diffs[-1] < tol, differences=diffs)


def visual_band(rows):
    """``(min, max, K)`` of the stable ratios and the number of flagged rows."""
    good = [r.ratio for r in rows if r.stable]
    return ratio_band(good), len(rows) - len(good)


def boundary_pairs(domain, patch, count, seed, min_sep=VISUAL_MIN_SEPARATION):
    """``count`` seeded boundary pairs from a patch (offsets scale with the patch radius)."""
    out = []
    for i in range(count):
        rng = rng_for(seed, i)
        for _ in range(1000):
            xi = patch.boundary_point(rng)
            eta = patch.boundary_point(rng)
            if np.linalg.norm(xi - eta) > min_sep * patch.radius:
                break
        out.append((xi, eta))
    return out


def band_stability(values):
    """Largest relative change between consecutive band constants."""
    vals = [v for v in values if v is not None]
    return max((relative_change(a, b) for a, b in zip(vals, vals[1:])), default=0.0)


__all__ = [
    "SandwichTable", "product_interval", "gromov_product_interval", "gromov_product_estimate",
    "four_point_defect", "GromovSample", "ScanConfig", "DefectReport", "four_point_scan",
    "thin_triangle_defect", "TriangleReport", "triangle_scan", "visibility_check",
    "VisibilityReport", "SeparatedPairSampler", "visibility_scan", "VisualRow", "fiber_product",
    "visual_metric_ratio", "visual_band", "boundary_pairs", "band_stability", "omega_over",
]
