"""The local pseudodistance ``M`` and the comparison functions ``g`` and ``g1``.

``M(x, y)`` is the smallest height ``eps`` whose minimal-basis polydisk at
``x`` reaches ``y``.  It is computed directly from that definition
(:func:`pseudo_M_inf`) and from the Taylor coefficients of ``r`` along the
frame axes (:func:`pseudo_M_taylor`); the two agree up to a multiplicative
band.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import brentq

from .domain import as_point, boundary_distance, r_value, restriction_poly
from .errors import ConfigurationError, NumericalError, OutOfChartError, TypeBoundError
from .frames import build_minimal_frame
from .parallel import pmap

EPS_FLOOR = 1e-14
M_RTOL = 1e-8
M_MAXIT = 60
TAYLOR_PHASES = 64


def _gauge(domain, x, y, eps):
    fr = build_minimal_frame(domain, x, eps)
    return float(np.max(np.abs(fr.coordinates(y)) / fr.tau))


def pseudo_M_inf(domain, x, y, rtol=M_RTOL):
    """``M(x, y) = inf{eps > 0 : y in P(x, eps)}``.

    The polydisk gauge ``max_i |<y - x, e_i>| / tau_i(x, eps)`` decreases in
    ``eps``; its crossing of 1 is bracketed in ``log eps`` on
    ``[1e-14, level_cap]`` and located by Brent's method on the bracket.

    Raises
    ------
    OutOfChartError
        If ``y`` is not in ``P(x, level_cap)``.
    """
    x = as_point(x, domain.n)
    y = as_point(y, domain.n)
    if np.array_equal(x, y):
        return 0.0
    cap = domain.level_cap
    # test at the bracket end itself, exp(log(cap)) need not round to cap
    hi = math.log(cap)
    g_hi = _gauge(domain, x, y, math.exp(hi))
    if g_hi > 1.0:
        raise OutOfChartError(f"point lies outside P(x, {cap:g}) (gauge {g_hi:.4g})")
    f = lambda s: _gauge(domain, x, y, math.exp(s)) - 1.0
    lo = math.log(EPS_FLOOR)
    if f(lo) <= 0.0:
        return EPS_FLOOR
    if g_hi == 1.0:
        return math.exp(hi)
    try:
        s = brentq(f, lo, hi, xtol=0.25 * rtol, rtol=4 * np.finfo(float).eps, maxiter=M_MAXIT)
    except RuntimeError as exc:
        raise NumericalError(f"pseudodistance bracket did not converge: {exc}") from None
    return math.exp(s)


@dataclass(frozen=True, eq=False)
class TaylorData:
    """Moduli ``a[i-2, k-2]`` of the order-``k`` coefficient of ``r`` along axis ``e_i``.

    Rows run over ``i = 2..n`` and columns over ``k = 2..L``.  The frame is
    the minimal basis of ``x`` at height ``|r(x)|``.
    """

    base: np.ndarray
    frame: object
    coefficients: np.ndarray
    type_bound: int = field(default=2)


def taylor_data(domain, x, nphase=TAYLOR_PHASES):
    """Exact axis Taylor coefficients of ``r`` at ``x``.

    The restriction ``s -> r(x + s e^{i theta} e_i)`` is a polynomial in the
    real variable ``s``; its coefficients are computed exactly and the modulus
    of each is maximized over a grid of ``nphase`` phases.
    """
    x = as_point(x, domain.n)
    rx = r_value(domain, x)
    if rx >= 0:
        raise ConfigurationError("taylor_data needs an interior point")
    L = domain.type_bound
    fr = build_minimal_frame(domain, x, min(abs(rx), domain.level_cap))
    thetas = 2 * np.pi * np.arange(nphase) / nphase
    a = np.zeros((domain.n - 1, L - 1))
    for i in range(1, domain.n):
        for th in thetas:
            c = restriction_poly(domain, x, np.exp(1j * th) * fr.basis[i])
            c = np.pad(c, (0, max(0, L + 1 - c.size)))[2:L + 1]
            a[i - 1] = np.maximum(a[i - 1], np.abs(c))
        scale = max(1.0, float(np.max(np.abs(restriction_poly(domain, x, fr.basis[i])))))
        if not np.any(a[i - 1] > 1e-13 * scale):
            raise TypeBoundError(f"all Taylor coefficients up to order {L} vanish along axis {i + 1}")
    return TaylorData(base=x, frame=fr, coefficients=a, type_bound=L)


def pseudo_M_taylor(domain, x, y, data=None):
    """``|w_1| + sum_{i>=2} sum_{k=2..L} a_ik |w_i|^k`` with ``w`` the frame coordinates of ``y - x``."""
    x = as_point(x, domain.n)
    y = as_point(y, domain.n)
    if np.array_equal(x, y):
        return 0.0
    if data is None:
        data = taylor_data(domain, x)
    w = np.abs(data.frame.coordinates(y))
    k = np.arange(2, data.type_bound + 1)
    total = w[0]
    for i in range(1, domain.n):
        total += float(np.sum(data.coefficients[i - 1] * w[i] ** k))
    return float(total)


# ---------------------------------------------------------------------------
# g and g1


def g_value(domain, x, y, M=None, deltas=None):
    """``log[(M(x,y) + delta(x) v delta(y)) / sqrt(delta(x) delta(y))]``."""
    if M is None:
        M = pseudo_M_inf(domain, x, y)
    if deltas is None:
        deltas = (boundary_distance(domain, x).delta, boundary_distance(domain, y).delta)
    dx, dy = deltas
    return math.log((M + max(dx, dy)) / math.sqrt(dx * dy))


def g1_value(domain, x, y, M=None):
    """``log[(M(x,y) + |r(x)| v |r(y)|) / sqrt(|r(x) r(y)|)]``."""
    if M is None:
        M = pseudo_M_inf(domain, x, y)
    rx = abs(r_value(domain, as_point(x, domain.n)))
    ry = abs(r_value(domain, as_point(y, domain.n)))
    return math.log((M + max(rx, ry)) / math.sqrt(rx * ry))


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class PseudoCalibration:
    """Empirical quasi-metric constant of ``M`` on a chart.

    ``eps0 = log 2 / (2 log 2 C_quasi)`` is the exponent for which the power
    chain inequality ``M^e(x_0, x_k) <= 2 sum M^e(x_j, x_{j+1})`` holds.
    """

    C_quasi: float
    eps0: float
    sample_count: int
    chart: tuple
    symmetry_max: float = 1.0
    triangle_max: float = 1.0
    excluded: int = 0


def eps0_from_constant(C):
    return math.log(2.0) / (2.0 * math.log(2.0 * C))


def triple_ratios(Mt):
    """Symmetry and triangle ratios from the 3x3 table ``Mt[a, b] = M(p_a, p_b)``.

    Returns ``(symmetry, triangle)``, each maximized over every ordering of
    the triple.
    """
    sym = 1.0
    tri = 1.0
    for a in range(3):
        for b in range(3):
            if a == b:
                continue
            if Mt[b, a] > 0:
                sym = max(sym, Mt[a, b] / Mt[b, a])
            c = 3 - a - b
            den = Mt[a, c] + Mt[c, b]
            if den > 0:
                tri = max(tri, Mt[a, b] / den)
    return sym, tri


def calibrate(domain, h_max=None, sample_count=1000, seed=42, patch_radius=None, points=None):
    """Estimate the quasi-metric constant ``C`` of ``M`` from random triples.

    Triples are fiber points ``p - h n(p)`` with ``p`` on a boundary patch and
    ``h`` log-uniform in ``[1e-6, h_max]``.  Triples with a pair outside the
    chart are skipped and counted in ``excluded``.

    Parameters
    ----------
    points : sequence of (3, n) arrays, optional
        Use these triples instead of sampling.
    """
    from .sampling import PatchSampler

    if sample_count < 100 and points is None:
        raise ConfigurationError("calibration needs at least 100 samples")
    h_max = domain.h_max if h_max is None else h_max
    if points is None:
        sampler = PatchSampler(domain, radius=patch_radius)
        points = (sampler.fiber_points(3, seed, i, 1e-6, h_max) for i in range(sample_count))
    sym = tri = 1.0
    excluded = 0
    used = 0
    for r in pmap(partial(_triple_row, domain), points):
        if r is None:
            excluded += 1
            continue
        sym, tri = max(sym, r[0]), max(tri, r[1])
        used += 1
    C = max(1.0, sym, tri)
    return PseudoCalibration(C_quasi=C, eps0=eps0_from_constant(C), sample_count=used,
                             chart=(domain.label, float(h_max)), symmetry_max=sym,
                             triangle_max=tri, excluded=excluded)


def _triple_row(domain, pts):
    try:
        return triple_ratios(pair_table(domain, pts))
    except OutOfChartError:
        return None


def pair_table(domain, pts):
    """All ordered pseudodistances among a small point set."""
    m = len(pts)
    Mt = np.zeros((m, m))
    for a in range(m):
        for b in range(m):
            if a != b:
                Mt[a, b] = pseudo_M_inf(domain, pts[a], pts[b])
    return Mt


def power_chain_check(calib, chain, eps, domain=None, M_values=None, strict=True):
    """Whether ``M^eps(first, last) <= 2 sum_j M^eps(x_j, x_{j+1})`` along ``chain``.

    ``M_values`` may carry precomputed ``(M(first, last), [M(x_j, x_{j+1})])``.
    With ``strict=False`` exponents above ``eps0`` are allowed (diagnostics).
    """
    if not eps > 0 or (strict and eps > calib.eps0 * (1 + 1e-12)):
        raise ConfigurationError("power chain exponent must lie in (0, eps0]")
    k = len(chain) - 2
    if not 1 <= k <= 32:
        raise ConfigurationError("chains carry between 1 and 32 intermediate points")
    if M_values is None:
        if domain is None:
            raise ConfigurationError("power_chain_check needs the domain to evaluate M")
        total = pseudo_M_inf(domain, chain[0], chain[-1])
        links = [pseudo_M_inf(domain, chain[j], chain[j + 1]) for j in range(len(chain) - 1)]
    else:
        total, links = M_values
    return bool(total ** eps <= 2.0 * sum(m ** eps for m in links) * (1 + 1e-12))
