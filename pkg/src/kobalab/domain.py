"""Convex model domains and their Euclidean boundary geometry.

Complex points are numpy ``complex128`` arrays of shape ``(n,)``.  Whenever a
real form is needed (kernels, CLI, polynomial exponents) the ordering is
interleaved: ``(Re z_1, Im z_1, Re z_2, Im z_2, ...)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as P

from . import _kernels as K
from .errors import ConfigurationError, NumericalError

FAMILIES = ("ball", "generalized_ellipsoid", "polynomial")

ROOT_TOL = 1e-12
PHASE_GRID = 128
PROJECTION_MAXIT = 60


def to_real(z):
    """Interleaved real form of a complex vector (or of the last axis of an array)."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def to_complex(x):
    """Inverse of :func:`to_real`."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def as_point(z, n=None):
    """Validate a complex point; a real vector of length ``2n`` is accepted too."""
    arr = np.asarray(z)
    if not np.iscomplexobj(arr) and n is not None and arr.shape == (2 * n,):
        arr = to_complex(arr)
    arr = np.asarray(arr, dtype=complex).reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise ConfigurationError(f"expected a point with {n} complex coordinates, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("point has non-finite coordinates")
    return arr


def hdot(u, v):
    """Hermitian inner product, linear in the first slot: ``sum u_j conj(v_j)``."""
    return complex(np.vdot(v, u))


@dataclass(frozen=True)
class PolyTerm:
    coeff: float
    powers: tuple


@dataclass(frozen=True, eq=False)
class ConvexDomainSpec:
    """A bounded convex domain ``{r < 0}`` from one of the supported families.

    ``h_max`` is the depth of the boundary chart and ``eps_max`` the largest
    level shift used for polydisks; ``eps_max`` defaults to a tenth of the
    diameter.  ``center`` is an interior reference point used for radial
    boundary sampling (the origin by default).
    """

    family: str
    dimension: int
    exponents: tuple = ()
    poly_terms: tuple = ()
    type_bound: int | None = None
    h_max: float = 0.1
    eps_max: float | None = None
    center: tuple | None = None
    _kargs: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unsupported domain family {self.family!r}")
        n = int(self.dimension)
        if n < 2:
            raise ConfigurationError("dimension must be at least 2")
        object.__setattr__(self, "dimension", n)
        empty_c = np.zeros(0)
        empty_p = np.zeros((0, 2 * n), dtype=np.int64)
        if self.family == "ball":
            exps = (1,) * n
            object.__setattr__(self, "exponents", exps)
            if self.type_bound is None:
                object.__setattr__(self, "type_bound", 2)
            kargs = (K.KIND_POWER_SUM, np.array(exps, dtype=np.int64), empty_c, empty_p)
        elif self.family == "generalized_ellipsoid":
            exps = tuple(int(m) for m in self.exponents)
            if len(exps) != n or any(m < 1 for m in exps):
                raise ConfigurationError("generalized_ellipsoid needs one positive integer exponent per coordinate")
            object.__setattr__(self, "exponents", exps)
            L = 2 * max(exps)
            if self.type_bound is None:
                object.__setattr__(self, "type_bound", L)
            elif int(self.type_bound) != L:
                raise ConfigurationError(f"type_bound must equal 2*max(exponents) = {L}")
            kargs = (K.KIND_POWER_SUM, np.array(exps, dtype=np.int64), empty_c, empty_p)
        else:
            terms = tuple(t if isinstance(t, PolyTerm) else PolyTerm(float(t["coeff"]), tuple(int(p) for p in t["powers"]))
                          for t in self.poly_terms)
            if not terms:
                raise ConfigurationError("polynomial family needs at least one term")
            for t in terms:
                if len(t.powers) != 2 * n or any(p < 0 for p in t.powers):
                    raise ConfigurationError("each monomial needs 2n nonnegative integer powers")
            if self.type_bound is None or int(self.type_bound) < 2:
                raise ConfigurationError("polynomial family needs a declared type_bound >= 2")
            object.__setattr__(self, "poly_terms", terms)
            coeffs = np.array([t.coeff for t in terms], dtype=float)
            powers = np.array([t.powers for t in terms], dtype=np.int64)
            kargs = (K.KIND_POLYNOMIAL, np.zeros(n, dtype=np.int64), coeffs, powers)
        object.__setattr__(self, "type_bound", int(self.type_bound))
        object.__setattr__(self, "_kargs", kargs)
        c = np.zeros(n, dtype=complex) if self.center is None else as_point(self.center, n)
        object.__setattr__(self, "center", tuple(c))
        if K.r_val(*kargs, to_real(c)) >= 0:
            raise ConfigurationError("reference center is not an interior point (r(center) >= 0)")
        if not self.h_max > 0:
            raise ConfigurationError("h_max must be positive")

    # construction helpers -------------------------------------------------
    @classmethod
    def ball(cls, n=2, **kw):
        return cls("ball", n, **kw)

    @classmethod
    def ellipsoid(cls, exponents, **kw):
        return cls("generalized_ellipsoid", len(exponents), exponents=tuple(exponents), **kw)

    @classmethod
    def from_dict(cls, d):
        try:
            kw = dict(family=d["family"], dimension=int(d["dimension"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"domain spec needs 'family' and 'dimension': {exc}") from None
        if "exponents" in d:
            kw["exponents"] = tuple(d["exponents"])
        if "poly_terms" in d:
            kw["poly_terms"] = tuple(d["poly_terms"])
        for key in ("type_bound", "h_max", "eps_max"):
            if d.get(key) is not None:
                kw[key] = d[key]
        if d.get("center") is not None:
            kw["center"] = tuple(to_complex(np.asarray(d["center"], dtype=float)))
        return cls(**kw)

    @classmethod
    def from_json(cls, path):
        try:
            text = Path(path).read_text(encoding="utf-8")
            data = json.loads(text)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read domain spec {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("domain spec must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self):
        d = {"family": self.family, "dimension": self.dimension, "type_bound": self.type_bound}
        if self.family == "generalized_ellipsoid":
            d["exponents"] = list(self.exponents)
        if self.family == "polynomial":
            d["poly_terms"] = [{"coeff": t.coeff, "powers": list(t.powers)} for t in self.poly_terms]
        d["h_max"] = self.h_max
        if self.eps_max is not None:
            d["eps_max"] = self.eps_max
        return d

    @property
    def kargs(self):
        return self._kargs

    @property
    def n(self):
        return self.dimension

    @property
    def label(self):
        if self.family == "ball":
            return f"ball{self.n}"
        if self.family == "generalized_ellipsoid":
            return "ellipsoid" + "_".join(str(m) for m in self.exponents)
        return f"poly{self.n}"

    # cached global quantities ------------------------------------------------
    @cached_property
    def radial_extent(self):
        """Largest distance from the center to the boundary over a fixed direction set."""
        rng = np.random.default_rng(12345)
        dirs = rng.standard_normal((512, 2 * self.n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.vstack([dirs, np.eye(2 * self.n), -np.eye(2 * self.n)])
        c = to_real(np.asarray(self.center))
        return max(K.ray_root(*self.kargs, c, d, 0.0, 1.0) for d in dirs)

    @cached_property
    def diameter(self):
        return 2.0 * self.radial_extent

    @cached_property
    def level_cap(self):
        return self.eps_max if self.eps_max is not None else 0.1 * self.diameter

    @cached_property
    def tube_radius(self):
        """Dyadic tube radius: largest ``2^-k`` whose fibers all project back to their foot."""
        rng = np.random.default_rng(2024)
        dirs = rng.standard_normal((48, 2 * self.n))
        feet = [radial_boundary_point(self, to_complex(d)) for d in dirs]
        normals = []
        for p in feet:
            _, g, _ = eval_r(self, p)
            normals.append(g / np.linalg.norm(g))
        for k in range(1, 40):
            h = 2.0 ** -k
            ok = True
            for p, nv in zip(feet, normals):
                x = p - h * nv
                if K.r_val(*self.kargs, to_real(x)) >= 0:
                    ok = False
                    break
                try:
                    foot, dist, _ = _project_to_level(self, x, 0.0)
                except NumericalError:
                    ok = False
                    break
                if abs(dist - h) > 1e-8 * h or np.linalg.norm(foot - p) > 1e-6 * max(h, 1e-3):
                    ok = False
                    break
            if ok:
                return h
        raise NumericalError("no dyadic tube radius found")


@dataclass(frozen=True)
class BoundaryData:
    foot: np.ndarray
    delta: float
    normal: np.ndarray
    tube_radius: float


# ---------------------------------------------------------------------------
# evaluation


def eval_r(domain, z):
    """Defining function with its exact first and second derivatives.

    Returns ``(r, grad, hess)``: the gradient as a complex vector whose
    components are ``dr/dx_j + i dr/dy_j`` and the real ``2n x 2n`` Hessian in
    interleaved ordering.
    """
    if not isinstance(domain, ConvexDomainSpec):
        raise ConfigurationError("eval_r needs a ConvexDomainSpec")
    x = to_real(as_point(z, domain.n))
    g = np.empty_like(x)
    H = np.empty((x.size, x.size))
    val = K.r_hess(*domain.kargs, x, g, H)
    return float(val), to_complex(g), H


def r_value(domain, z):
    return float(K.r_val(*domain.kargs, to_real(np.asarray(z, dtype=complex))))


def r_values(domain, Z):
    """Vectorised ``r`` over the rows of a complex array."""
    X = to_real(np.atleast_2d(np.asarray(Z, dtype=complex)))
    return np.array([K.r_val(*domain.kargs, x) for x in X])


def restriction_poly(domain, z, u):
    """Coefficients (lowest first) of the polynomial ``s -> r(z + s u)`` for real ``s``."""
    z = np.asarray(z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    if domain.kargs[0] == K.KIND_POWER_SUM:
        out = np.array([-1.0])
        for j, m in enumerate(domain.exponents):
            quad = np.array([abs(z[j]) ** 2, 2.0 * (np.conj(z[j]) * u[j]).real, abs(u[j]) ** 2])
            out = P.polyadd(out, P.polypow(quad, m))
        return out
    xr = to_real(z)
    ur = to_real(u)
    out = np.zeros(1)
    for t in domain.poly_terms:
        term = np.array([t.coeff])
        for a, p in enumerate(t.powers):
            if p:
                term = P.polymul(term, P.polypow(np.array([xr[a], ur[a]]), p))
        out = P.polyadd(out, term)
    return out


# ---------------------------------------------------------------------------
# projections and distances


def _nearest_seeds(domain, x, c, B):
    """Ray roots along a handful of seed directions inside the span of ``B``."""
    k = B.shape[1]
    g = np.empty(x.size)
    K.r_grad(*domain.kargs, x, g)
    gb = B.T @ g
    seeds = [gb / np.linalg.norm(gb)] if np.linalg.norm(gb) > 0 else []
    eye = np.eye(k)
    seeds.extend(eye)
    seeds.extend(-eye)
    out = []
    for s in seeds:
        d = B @ s
        t = K.ray_root(*domain.kargs, x, d, c, 1.0)
        if np.isfinite(t):
            out.append((t, s * t))
    out.sort(key=lambda p: p[0])
    return out


def _fallback_directions(k, count=4096):
    rng = np.random.default_rng(7)
    d = rng.standard_normal((count, k))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def nearest_on_level(domain, x, c, B=None, tries=3):
    """Nearest point to real ``x`` on ``{r = c}`` within ``x + span(B)``.

    Returns ``(alpha, dist)`` with the foot at ``x + B @ alpha``.  Newton on
    the Lagrange system from the best seed rays; falls back to dense direction
    sampling when no seed converges to a local minimum.
    """
    if B is None:
        B = np.eye(x.size)
    seeds = _nearest_seeds(domain, x, c, B)
    if not seeds:
        raise NumericalError("no seed ray crosses the level set", last_iterate=x)
    best = None
    for t, alpha0 in seeds[:tries]:
        alpha, lam, status = K.project_level(*domain.kargs, x, B, c, alpha0, PROJECTION_MAXIT)
        if status == 0:
            dist = float(np.linalg.norm(alpha))
            if best is None or dist < best[1]:
                best = (alpha, dist)
    if best is not None and best[1] <= seeds[0][0] * (1 + 1e-10):
        return best
    # dense sampling, then Newton from the best sampled direction
    dirs = _fallback_directions(B.shape[1])
    ts = np.array([K.ray_root(*domain.kargs, x, B @ d, c, seeds[0][0]) for d in dirs])
    i = int(np.argmin(ts))
    alpha, lam, status = K.project_level(*domain.kargs, x, B, c, dirs[i] * ts[i], PROJECTION_MAXIT)
    if status == 0 and np.linalg.norm(alpha) <= ts[i] * (1 + 1e-10):
        return alpha, float(np.linalg.norm(alpha))
    if best is not None:
        return best
    raise NumericalError("projection onto level set did not converge", last_iterate=x + B @ alpha)


def _project_to_level(domain, z, c):
    x = to_real(z)
    alpha, dist = nearest_on_level(domain, x, c)
    foot = to_complex(x + alpha)
    g = np.empty(x.size)
    K.r_grad(*domain.kargs, x + alpha, g)
    return foot, dist, to_complex(g / np.linalg.norm(g))


def boundary_distance(domain, x):
    """Euclidean distance to the boundary with foot point and outward unit normal."""
    z = as_point(x, domain.n)
    if r_value(domain, z) >= 0:
        raise ConfigurationError("boundary_distance needs an interior point")
    foot, dist, normal = _project_to_level(domain, z, 0.0)
    return BoundaryData(foot=foot, delta=dist, normal=normal, tube_radius=domain.tube_radius)


def delta(domain, x):
    """Shortcut for ``boundary_distance(domain, x).delta``."""
    return boundary_distance(domain, x).delta


def _line_frames(v):
    v = np.asarray(v, dtype=complex)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ConfigurationError("direction vector must be nonzero")
    u = v / nv
    return to_real(u), to_real(1j * u)


def slice_distance(domain, x, v, c=0.0):
    """Distance from ``x`` to ``{r = c}`` inside the complex line ``x + C v``.

    Returns ``(distance, phase)``; the nearest point is
    ``x + distance * exp(i phase) * v/|v|``.
    """
    U, V = _line_frames(v)
    val, th = K.slice_min(*domain.kargs, to_real(np.asarray(x, dtype=complex)), U, V, c, PHASE_GRID, ROOT_TOL)
    return float(val), float(th)


def directional_boundary_distance(domain, x, v):
    """Distance from ``x`` to the boundary inside the complex line through ``x`` along ``v``."""
    z = as_point(x, domain.n)
    if r_value(domain, z) >= 0:
        raise ConfigurationError("directional_boundary_distance needs an interior point")
    return slice_distance(domain, z, as_point(v, domain.n))[0]


def level_set_distance(domain, q, eps, v):
    """Distance from ``q`` to ``{r = r(q) + eps}`` along the real ray ``q + t v``."""
    z = as_point(q, domain.n)
    rq = r_value(domain, z)
    if rq >= 0:
        raise ConfigurationError("level_set_distance needs an interior point")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps > domain.level_cap * (1 + 1e-12):
        raise ValueError(f"eps={eps} exceeds the level cap {domain.level_cap}")
    d = to_real(as_point(v, domain.n))
    nd = np.linalg.norm(d)
    if nd == 0:
        raise ValueError("direction must be nonzero")
    return float(K.ray_root(*domain.kargs, to_real(z), d / nd, rq + eps, 1.0))


def radial_boundary_point(domain, direction):
    """Boundary point on the ray from the domain's center along ``direction``."""
    c = to_real(np.asarray(domain.center))
    d = to_real(np.asarray(direction, dtype=complex))
    d = d / np.linalg.norm(d)
    t = K.ray_root(*domain.kargs, c, d, 0.0, 1.0)
    return to_complex(c + t * d)


def inward_fiber_point(domain, foot, h):
    """``foot - h n(foot)`` for a boundary point ``foot``."""
    _, g, _ = eval_r(domain, foot)
    return np.asarray(foot, dtype=complex) - h * g / np.linalg.norm(g)


def convexity_check(domain, samples=256, seed=0):
    """Minimum Hessian eigenvalue of r over points sampled in the bounding region.

    Returns ``(passed, min_eigenvalue)``; the test tolerates rounding at the
    scale of the largest eigenvalue seen.
    """
    rng = np.random.default_rng(seed)
    R = domain.radial_extent
    c = to_real(np.asarray(domain.center))
    lo = np.inf
    hi = 0.0
    g = np.empty(2 * domain.n)
    H = np.empty((2 * domain.n, 2 * domain.n))
    for _ in range(samples):
        d = rng.standard_normal(2 * domain.n)
        d *= R * rng.uniform() ** (1.0 / d.size) / np.linalg.norm(d)
        K.r_hess(*domain.kargs, c + d, g, H)
        w = np.linalg.eigvalsh(H)
        lo = min(lo, w[0])
        hi = max(hi, abs(w[-1]))
    return bool(lo >= -1e-10 * max(hi, 1.0)), float(lo)


def validate_domain(domain, seed=0):
    """Run the structural spot checks; returns a dict of findings."""
    passed, lam_min = convexity_check(domain, seed=seed)
    rng = np.random.default_rng(seed)
    grad_ok = True
    for _ in range(64):
        p = radial_boundary_point(domain, rng.standard_normal(domain.n) + 1j * rng.standard_normal(domain.n))
        _, g, _ = eval_r(domain, p)
        if not np.linalg.norm(g) > 0:
            grad_ok = False
    return {
        "family": domain.family,
        "dimension": domain.n,
        "type_bound": domain.type_bound,
        "convex": passed,
        "min_hessian_eigenvalue": lam_min,
        "boundary_gradient_nonzero": grad_ok,
        "diameter": domain.diameter,
        "tube_radius": domain.tube_radius,
        "level_cap": domain.level_cap,
        "ok": passed and grad_ok,
    }


def unit(v):
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def angle_between(u, v):
    """Angle between two complex vectors viewed as real vectors."""
    a, b = to_real(u), to_real(v)
    cs = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(math.acos(max(-1.0, min(1.0, cs))))
