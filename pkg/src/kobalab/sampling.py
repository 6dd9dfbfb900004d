"""Seeded point samplers near a boundary patch.

Every draw takes ``(seed, index)`` and builds its own generator
``numpy.random.default_rng([seed, index])``, so a sample does not depend on
how many others were drawn before it or on which worker drew it.
"""
from __future__ import annotations

import math

import numpy as np

from .domain import eval_r, radial_boundary_point, to_complex, to_real


def rng_for(seed, index):
    return np.random.default_rng([int(seed), int(index)])


def log_uniform(rng, lo, hi, size=None):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=size))


class PatchSampler:
    """Boundary points in a Euclidean patch around ``center_point`` and their fibers.

    Parameters
    ----------
    domain : ConvexDomainSpec
    center_point : array_like, optional
        A boundary point; defaults to where the ray from the domain center
        along the first coordinate axis leaves the domain.
    radius : float, optional
        Patch radius measured in the tangent hyperplane; defaults to 0.1.
    """

    def __init__(self, domain, center_point=None, radius=None):
        self.domain = domain
        n = domain.n
        if center_point is None:
            d = np.zeros(n, dtype=complex)
            d[0] = 1.0
            center_point = radial_boundary_point(domain, d)
        self.p0 = np.asarray(center_point, dtype=complex)
        self.radius = 0.1 if radius is None else float(radius)
        _, g, _ = eval_r(domain, self.p0)
        self.n0 = g / np.linalg.norm(g)
        nr = to_real(self.n0)
        # orthonormal basis of the real tangent hyperplane at p0
        Q, _ = np.linalg.qr(np.column_stack([nr, np.eye(2 * n)]))
        self.T = Q[:, 1:2 * n]

    def tangent_offset(self, rng, radius=None):
        rho = self.radius if radius is None else radius
        k = self.T.shape[1]
        u = rng.standard_normal(k)
        u *= rho * rng.uniform() ** (1.0 / k) / np.linalg.norm(u)
        return to_complex(self.T @ u)

    def boundary_point(self, rng, radius=None):
        """Boundary point over a uniform tangent offset (radial projection)."""
        c = np.asarray(self.domain.center)
        q = self.p0 + self.tangent_offset(rng, radius)
        return radial_boundary_point(self.domain, q - c)

    def normal(self, p):
        _, g, _ = eval_r(self.domain, p)
        return g / np.linalg.norm(g)

    def fiber_point(self, p, h):
        return p - h * self.normal(p)

    def fiber_points(self, count, seed, index, h_lo, h_hi):
        """``count`` fiber points ``p - h n(p)`` with ``h`` log-uniform in ``[h_lo, h_hi]``."""
        rng = rng_for(seed, index)
        out = []
        for _ in range(count):
            p = self.boundary_point(rng)
            out.append(self.fiber_point(p, float(log_uniform(rng, h_lo, h_hi))))
        return np.array(out)


CONVEX_DIRECTION = (1.0, 0.8)


def default_patches(domain, radius=0.02):
    """Two small patches: around the first-axis boundary point and around a second one
    off the coordinate axes.

    On the generalized ellipsoids the first is the point of maximal type and the
    second is strongly convex.  Small patches keep the local geometry of the
    feet fixed while the depth shrinks, so depth buckets see the same
    configurations at different scales.
    """
    d = np.zeros(domain.n, dtype=complex)
    d[:2] = CONVEX_DIRECTION
    p1 = radial_boundary_point(domain, d)
    return [PatchSampler(domain, radius=radius), PatchSampler(domain, center_point=p1, radius=radius)]


def shell_point(domain, frame, rng, tries=200):
    """A point of ``∂P(q, eps) ∩ Omega`` drawn by rejection."""
    from .domain import r_value
    from .frames import sample_polydisk_boundary

    for _ in range(tries):
        y = sample_polydisk_boundary(frame, rng)
        if r_value(domain, y) < 0:
            return y
    raise RuntimeError("no interior point found on the polydisk shell")


class ShellPairSampler:
    """Scale-invariant pairs: ``x`` at depth ``h``, ``y`` on ``∂P(x, s |r(x)|)``.

    ``x = p - h n(p)`` with ``p`` on one of the boundary patches (chosen at
    random; see :func:`default_patches`) and ``h = h_b 2^u``,
    ``u`` uniform in ``[0, 1]``; ``s`` is log-uniform in ``[s_lo, s_hi]``.
    All random numbers of sample ``index`` come from ``rng_for(seed, index)``
    and do not depend on the bucket depth ``h_b``, so the same index at two
    depths gives the same configuration seen at two scales.
    """

    def __init__(self, domain, patch=None, s_lo=0.1, s_hi=4.0):
        self.domain = domain
        if patch is None:
            patch = default_patches(domain)
        self.patches = list(patch) if isinstance(patch, (list, tuple)) else [patch]
        self.s_lo, self.s_hi = s_lo, s_hi

    @property
    def patch(self):
        return self.patches[0]

    def base_point(self, rng, h_b):
        patch = self.patches[int(rng.integers(len(self.patches)))]
        p = patch.boundary_point(rng)
        h = h_b * 2.0 ** rng.uniform()
        return patch.fiber_point(p, h)

    def partner(self, rng, x):
        from .domain import r_value
        from .frames import build_minimal_frame

        s = float(log_uniform(rng, self.s_lo, self.s_hi))
        eps = min(s * abs(r_value(self.domain, x)), self.domain.level_cap)
        fr = build_minimal_frame(self.domain, x, eps)
        return shell_point(self.domain, fr, rng)

    def pair(self, seed, index, h_b):
        rng = rng_for(seed, index)
        x = self.base_point(rng, h_b)
        return x, self.partner(rng, x)

    def cluster(self, seed, index, h_b, size):
        """``size`` points: a base point and partners on shells around it."""
        rng = rng_for(seed, index)
        x = self.base_point(rng, h_b)
        return np.array([x] + [self.partner(rng, x) for _ in range(size - 1)])
