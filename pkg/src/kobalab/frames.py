"""McNeal's minimal basis and the polydisks ``P(q, eps)``.

For an interior point ``q`` and a height ``eps`` the level set
``{r = r(q) + eps}`` is a convex hypersurface around ``q``.  The first axis
points at its nearest point; every further axis is the nearest direction
inside the complex-orthogonal complement of the axes chosen so far.  The
radii ``tau_i`` are the achieved distances.

Two constructions are provided.  ``method="projection"`` solves the
constrained nearest-point problem by Newton's method on the Lagrange system
(with dense direction sampling as a fallback) and is what every other module
uses.  ``method="multistart"`` runs a seeded multi-start Nelder-Mead search
over the real sphere and serves as an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import _kernels as K
from .domain import (PHASE_GRID, ROOT_TOL, as_point, nearest_on_level, r_value,
                     slice_distance, to_complex, to_real)
from .errors import ConfigurationError, NumericalError

TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MinimalFrame:
    """Orthonormal frame ``basis[i] = e_{i+1}`` with radii ``tau`` at ``(q, eps)``."""

    q: np.ndarray
    eps: float
    basis: np.ndarray
    tau: np.ndarray

    @property
    def n(self):
        return self.q.shape[0]

    def coordinates(self, y):
        """Frame coordinates ``<y - q, e_i>``."""
        return np.conj(self.basis) @ (np.asarray(y, dtype=complex) - self.q)

    def from_coordinates(self, w):
        return self.q + np.asarray(w, dtype=complex) @ self.basis

    def as_row(self):
        """Flat record: q (re/im), eps, tau, basis entries (re/im, row by row)."""
        return np.concatenate([to_real(self.q), [self.eps], self.tau, to_real(self.basis.reshape(-1))])


@dataclass(frozen=True, eq=False)
class Polydisk:
    """Closed polydisk ``{|<y - q, e_i>| <= tau_i}`` of a frame."""

    frame: MinimalFrame

    def contains(self, y, rtol=1e-12):
        return polydisk_membership(self.frame, y, rtol=rtol)

    def gauge(self, y):
        """Largest ratio ``|<y - q, e_i>| / tau_i``; the polydisk is ``gauge <= 1``."""
        return float(np.max(np.abs(self.frame.coordinates(y)) / self.frame.tau))


def _phase_normalize(v):
    """Rotate ``v`` so that its largest component is real and positive."""
    j = int(np.argmax(np.abs(v) * (1 + 1e-12 * np.arange(v.size)[::-1])))
    return v * (abs(v[j]) / v[j])


def _complement(E, n):
    """Orthonormal basis of the complex-orthogonal complement of the rows of ``E``.

    Gram-Schmidt on the canonical vectors, skipping those that are nearly
    dependent on what has been accepted already.
    """
    acc = [e for e in E]
    out = []
    for j in range(n):
        w = np.zeros(n, dtype=complex)
        w[j] = 1.0
        for _ in range(2):
            for a in acc:
                w = w - np.vdot(a, w) * a
        nw = np.linalg.norm(w)
        if nw > 1e-6:
            w = w / nw
            acc.append(w)
            out.append(w)
        if len(out) + len(E) == n:
            break
    return np.array(out)


def _real_basis(W):
    """Real ``2n x 2m`` matrix whose columns span the complex span of the rows of ``W``."""
    cols = []
    for w in W:
        cols.append(to_real(w))
        cols.append(to_real(1j * w))
    return np.array(cols).T


def _check_args(domain, q, eps):
    z = as_point(q, domain.n)
    rq = r_value(domain, z)
    if rq >= 0:
        raise ConfigurationError("minimal frames need an interior base point")
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    if eps > domain.level_cap * (1 + 1e-12):
        raise ValueError(f"eps={eps} exceeds the level cap {domain.level_cap}")
    return z, rq


def build_minimal_frame(domain, q, eps, method="projection", seed=0):
    """Minimal basis and radii at ``q`` for the level set ``{r = r(q) + eps}``.

    Parameters
    ----------
    domain : ConvexDomainSpec
    q : array_like
        Interior base point.
    eps : float
        Level shift, at most ``domain.level_cap``.
    method : {"projection", "multistart"}
        Solver for the nearest-direction problems (see the module docstring).
    seed : int
        Restart seed for ``method="multistart"``.

    Returns
    -------
    MinimalFrame
        ``basis[0]`` is the direction that realizes ``tau[0]`` (so the real
        ray along it meets the level set at distance ``tau[0]``).  The later
        axes are normalized so their largest component is real positive;
        only their complex span enters the polydisk.
    """
    z, rq = _check_args(domain, q, eps)
    if method == "projection":
        return _frame_projection(domain, z, rq + eps, eps)
    if method == "multistart":
        return _frame_multistart(domain, z, rq + eps, eps, seed)
    raise ConfigurationError(f"unknown frame method {method!r}")


def _frame_projection(domain, z, c, eps):
    n = domain.n
    x = to_real(z)
    alpha, t1 = nearest_on_level(domain, x, c)
    E = [to_complex(alpha) / t1]
    taus = [t1]
    while len(E) < n:
        W = _complement(np.array(E), n)
        if W.shape[0] == 1:
            t, th = slice_distance(domain, z, W[0], c)
            e = np.exp(1j * th) * W[0]
        else:
            B = _real_basis(W)
            a, t = nearest_on_level(domain, x, c, B)
            e = to_complex(B @ a) / t
        taus.append(float(t))
        E.append(_phase_normalize(e / np.linalg.norm(e)))
    return MinimalFrame(q=z, eps=float(eps), basis=np.array(E), tau=np.array(taus))


def _ray(domain, x, d, c, hint=1.0):
    nd = np.linalg.norm(d)
    if not nd > 0:
        return np.inf
    return K.ray_root(*domain.kargs, x, d / nd, c, hint)


def _sphere_chart(a0):
    """Orthonormal basis of the tangent space of the unit sphere at ``a0``."""
    k = a0.size
    Q, _ = np.linalg.qr(np.column_stack([a0, np.eye(k)]))
    return Q[:, 1:k]


def _multistart_min(domain, x, c, B, rng, restarts):
    """Multi-start Nelder-Mead for the shortest ray to ``{r = c}`` inside span(B).

    Each restart works in a chart of the unit sphere around its random start,
    ``a(u) = (a0 + T u) / |a0 + T u|``, so the simplex never degenerates along
    the radial direction.
    """
    k = B.shape[1]

    def search(a0, step, xatol, fatol):
        T = _sphere_chart(a0)
        chart = lambda u: (a0 + T @ u) / np.linalg.norm(a0 + T @ u)
        f = lambda u: _ray(domain, x, B @ chart(u), c)
        simplex = np.vstack([np.zeros(k - 1), step * np.eye(k - 1)])
        res = minimize(f, np.zeros(k - 1), method="Nelder-Mead",
                       options={"xatol": xatol, "fatol": fatol, "maxiter": 2000 * k,
                                "initial_simplex": simplex})
        return float(res.fun), chart(res.x)

    coarse = []
    for _ in range(restarts):
        a0 = rng.standard_normal(k)
        coarse.append(search(a0 / np.linalg.norm(a0), 0.25, 1e-4, 1e-10))
    best = min(v for v, _ in coarse)
    if not np.isfinite(best):
        raise NumericalError("multistart direction search found no level-set crossing", last_iterate=x)
    # polish one representative of every distinct near-tie with a fresh, small simplex
    reps = []
    for v, a in sorted(coarse, key=lambda c: c[0]):
        if v <= best * (1 + 1e-5) and all(np.linalg.norm(a - b) > 1e-3 for b in reps):
            reps.append(a)
    found = [search(a, 1e-4, 1e-12, 1e-17) for a in reps]
    best = min(v for v, _ in found)
    ties = [B @ a for v, a in found if v <= best * (1 + TIE_TOL)]
    # deterministic choice among near-ties: lexicographically largest real vector
    d = max(ties, key=lambda u: tuple(np.round(u, 9)))
    a = np.linalg.lstsq(B, d, rcond=None)[0]
    return _parabolic_polish(lambda v: _ray(domain, x, B @ v, c), a / np.linalg.norm(a), B)


def _parabolic_polish(f, a, B, widths=(1e-4, 1e-5, 1e-6), sweeps=3):
    """Coordinate-wise three-point parabola steps in a sphere chart around ``a``.

    A value-only minimizer pins the direction only to about the square root
    of the objective's precision; fitting parabolas to symmetric probes
    recovers the remaining digits.
    """
    for h in [w for w in widths for _ in range(sweeps)]:
        T = _sphere_chart(a)
        u = np.zeros(T.shape[1])
        f0 = f(a)
        for k in range(T.shape[1]):
            e = np.zeros_like(u)
            e[k] = h
            fp = f(a + T @ (u + e))
            fm = f(a + T @ (u - e))
            curv = fp + fm - 2.0 * f0
            if curv > 0:
                u[k] -= 0.5 * h * (fp - fm) / curv
        cand = a + T @ u
        cand /= np.linalg.norm(cand)
        # near the optimum the objective is flat to rounding, so accept ties
        if f(cand) <= f0 * (1 + 1e-14):
            a = cand
    return float(f(a)), B @ a


def _frame_multistart(domain, z, c, eps, seed):
    n = domain.n
    x = to_real(z)
    rng = np.random.default_rng(seed)
    restarts = 64 * n
    t1, d1 = _multistart_min(domain, x, c, np.eye(2 * n), rng, restarts)
    E = [to_complex(d1)]
    taus = [t1]
    while len(E) < n:
        W = _complement(np.array(E), n)
        t, d = _multistart_min(domain, x, c, _real_basis(W), rng, restarts)
        taus.append(float(t))
        E.append(_phase_normalize(to_complex(d)))
    return MinimalFrame(q=z, eps=float(eps), basis=np.array(E), tau=np.array(taus))


def polydisk_membership(frame, y, rtol=1e-12):
    """Whether ``y`` lies in the closed polydisk of ``frame``."""
    w = np.abs(frame.coordinates(as_point(y, frame.n)))
    return bool(np.all(w <= frame.tau * (1 + rtol)))


def scaling_profile(domain, q, eps, c_list, method="projection"):
    """Table of ratios ``tau_i(q, c eps) / tau_i(q, eps)``, one row per ``c``."""
    base = build_minimal_frame(domain, q, eps, method=method).tau
    rows = []
    for c in c_list:
        if c == 1:
            rows.append(np.ones_like(base))
            continue
        rows.append(build_minimal_frame(domain, q, c * eps, method=method).tau / base)
    return np.array(rows)


def harmonic_radius(frame, v):
    """``(sum_i |<v, e_i>| / tau_i)^-1`` for a unit vector ``v``."""
    v = as_point(v, frame.n)
    a = np.abs(np.conj(frame.basis) @ v)
    return float(1.0 / np.sum(a / frame.tau))


def level_slice_distance(domain, frame, v):
    """Distance from ``q`` to the level set ``{r = r(q) + eps}`` inside ``q + C v``."""
    c = r_value(domain, frame.q) + frame.eps
    return slice_distance(domain, frame.q, as_point(v, frame.n), c)[0]


def boundary_inequality(frame, y):
    """Two-sided bound ``H <= |q - y| <= n H`` for ``y`` on the polydisk boundary.

    ``H = (sum_i |a_i| / tau_i)^-1`` with ``a`` the unit frame coordinates of
    ``q - y``.  Returns ``(H, |q - y|, n H)``.
    """
    w = frame.coordinates(y)
    dist = float(np.linalg.norm(w))
    H = dist / float(np.sum(np.abs(w) / frame.tau))
    return H, dist, frame.n * H


def sample_polydisk_boundary(frame, rng):
    """A point of ``∂P(q, eps)``: one random coordinate on its circle, the rest inside."""
    n = frame.n
    w = frame.tau * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n))
    i = int(rng.integers(n))
    w[i] = frame.tau[i] * np.exp(2j * np.pi * rng.uniform())
    return frame.from_coordinates(w)
