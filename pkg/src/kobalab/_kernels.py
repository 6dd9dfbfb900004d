"""Compiled inner loops shared by every module.

A domain reaches these kernels as four arrays ``(kind, exps, coeffs, powers)``:

* ``kind == 0``: power sum ``r = sum_j |z_j|^(2 m_j) - 1`` with ``exps = m``.
* ``kind == 1``: real polynomial ``r = sum_t c_t prod_a x_a^(p_ta)``.

Points are real vectors of length 2n in interleaved order
``(Re z_1, Im z_1, ..., Re z_n, Im z_n)``.
"""
import math

import numpy as np
from numba import njit

KIND_POWER_SUM = 0
KIND_POLYNOMIAL = 1

_TWO_PI = 2.0 * math.pi
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@njit(cache=True, inline='always')
def _ipow(x, p):
    out = 1.0
    for _ in range(p):
        out *= x
    return out


@njit(cache=True, inline='always')
def r_val(kind, exps, coeffs, powers, x):
    if kind == 0:
        s_tot = -1.0
        for j in range(exps.shape[0]):
            s = x[2 * j] * x[2 * j] + x[2 * j + 1] * x[2 * j + 1]
            s_tot += _ipow(s, exps[j])
        return s_tot
    val = 0.0
    for t in range(coeffs.shape[0]):
        term = coeffs[t]
        for a in range(x.shape[0]):
            p = powers[t, a]
            if p > 0:
                term *= _ipow(x[a], p)
        val += term
    return val


@njit(cache=True, inline='always')
def r_grad(kind, exps, coeffs, powers, x, g):
    """Value of r at ``x``; the real gradient is written into ``g``."""
    n2 = x.shape[0]
    for a in range(n2):
        g[a] = 0.0
    if kind == 0:
        s_tot = -1.0
        for j in range(exps.shape[0]):
            m = exps[j]
            u = x[2 * j]
            v = x[2 * j + 1]
            s = u * u + v * v
            s_tot += _ipow(s, m)
            ds = m * _ipow(s, m - 1)
            g[2 * j] = 2.0 * ds * u
            g[2 * j + 1] = 2.0 * ds * v
        return s_tot
    val = 0.0
    for t in range(coeffs.shape[0]):
        term = coeffs[t]
        for a in range(n2):
            p = powers[t, a]
            if p > 0:
                term *= _ipow(x[a], p)
        val += term
        for b in range(n2):
            pb = powers[t, b]
            if pb == 0:
                continue
            d = coeffs[t] * pb * _ipow(x[b], pb - 1)
            for a in range(n2):
                if a != b:
                    p = powers[t, a]
                    if p > 0:
                        d *= _ipow(x[a], p)
            g[b] += d
    return val


@njit(cache=True, inline='always')
def r_hess(kind, exps, coeffs, powers, x, g, H):
    """Value of r; gradient into ``g`` and the real Hessian into ``H``."""
    n2 = x.shape[0]
    val = r_grad(kind, exps, coeffs, powers, x, g)
    for a in range(n2):
        for b in range(n2):
            H[a, b] = 0.0
    if kind == 0:
        for j in range(exps.shape[0]):
            m = exps[j]
            u = x[2 * j]
            v = x[2 * j + 1]
            s = u * u + v * v
            d1 = m * _ipow(s, m - 1)
            d2 = 0.0
            if m >= 2:
                d2 = m * (m - 1) * _ipow(s, m - 2)
            cu = (u, v)
            for a in range(2):
                for b in range(2):
                    h = 4.0 * d2 * cu[a] * cu[b]
                    if a == b:
                        h += 2.0 * d1
                    H[2 * j + a, 2 * j + b] = h
        return val
    for t in range(coeffs.shape[0]):
        for a in range(n2):
            pa = powers[t, a]
            if pa == 0:
                continue
            for b in range(a, n2):
                pb = powers[t, b]
                if pb == 0:
                    continue
                if a == b:
                    if pa < 2:
                        continue
                    d = coeffs[t] * pa * (pa - 1) * _ipow(x[a], pa - 2)
                else:
                    d = coeffs[t] * pa * pb * _ipow(x[a], pa - 1) * _ipow(x[b], pb - 1)
                for e in range(n2):
                    if e != a and e != b:
                        pe = powers[t, e]
                        if pe > 0:
                            d *= _ipow(x[e], pe)
                H[a, b] += d
                if a != b:
                    H[b, a] += d
    return val


@njit(cache=True)
def ray_root(kind, exps, coeffs, powers, x0, d, c, t_hint):
    """Positive root of ``r(x0 + t d) = c`` for ``r(x0) < c``.

    Bracket by doubling, then Newton from the right end, falling back to
    bisection whenever the Newton iterate leaves the bracket.  Returns
    ``nan`` if ``r(x0) >= c`` and ``inf`` if no crossing is found.
    """
    n2 = x0.shape[0]
    p = np.empty(n2)
    g = np.empty(n2)
    return _ray_root(kind, exps, coeffs, powers, x0, d, c, t_hint, p, g)


@njit(cache=True, inline='always')
def _ray_root(kind, exps, coeffs, powers, x0, d, c, t_hint, p, g):
    n2 = x0.shape[0]
    if r_val(kind, exps, coeffs, powers, x0) - c >= 0.0:
        return np.nan
    lo = 0.0
    t = t_hint if t_hint > 0.0 else 1.0
    found = False
    for _ in range(400):
        for a in range(n2):
            p[a] = x0[a] + t * d[a]
        f = r_val(kind, exps, coeffs, powers, p) - c
        if f > 0.0:
            found = True
            break
        lo = t
        t *= 2.0
    if not found:
        return np.inf
    hi = t
    # a hint far above the root is cut down by bisection before Newton
    for _ in range(200):
        if lo > 0.0 or hi < 1e-300:
            break
        mid = 0.25 * hi
        for a in range(n2):
            p[a] = x0[a] + mid * d[a]
        f = r_val(kind, exps, coeffs, powers, p) - c
        if f > 0.0:
            hi = mid
        else:
            lo = mid
            break
    t = hi
    for _ in range(200):
        for a in range(n2):
            p[a] = x0[a] + t * d[a]
        f = r_grad(kind, exps, coeffs, powers, p, g) - c
        if f == 0.0:
            return t
        if f > 0.0:
            hi = t
        else:
            lo = t
        if hi - lo <= 1e-15 * hi:
            return hi
        df = 0.0
        for a in range(n2):
            df += g[a] * d[a]
        tn = 0.5 * (lo + hi)
        if df > 0.0:
            step = f / df
            if f > 0.0 and 0.0 <= step <= 1e-15 * t:
                # converged from the right: the step is below rounding
                return t - step
            cand = t - step
            if lo < cand < hi:
                tn = cand
        if abs(tn - t) <= 2e-16 * t:
            return tn
        t = tn
    return t


@njit(cache=True, inline='always')
def _phase_dir(U, V, th, d):
    cs = math.cos(th)
    sn = math.sin(th)
    for a in range(U.shape[0]):
        d[a] = cs * U[a] + sn * V[a]


@njit(cache=True)
def _golden_phase(kind, exps, coeffs, powers, x0, U, V, c, a, b, hint, tol):
    d = np.empty(x0.shape[0])
    p = np.empty(x0.shape[0])
    g = np.empty(x0.shape[0])
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    _phase_dir(U, V, x1, d)
    f1 = _ray_root(kind, exps, coeffs, powers, x0, d, c, hint, p, g)
    _phase_dir(U, V, x2, d)
    f2 = _ray_root(kind, exps, coeffs, powers, x0, d, c, hint, p, g)
    for _ in range(200):
        if b - a <= tol:
            break
        if f1 <= f2:
            b = x2
            x2 = x1
            f2 = f1
            x1 = b - _INVPHI * (b - a)
            _phase_dir(U, V, x1, d)
            f1 = _ray_root(kind, exps, coeffs, powers, x0, d, c, 1.001 * f2, p, g)
        else:
            a = x1
            x1 = x2
            f1 = f2
            x2 = a + _INVPHI * (b - a)
            _phase_dir(U, V, x2, d)
            f2 = _ray_root(kind, exps, coeffs, powers, x0, d, c, 1.001 * f1, p, g)
    if f1 <= f2:
        return f1, x1
    return f2, x2


@njit(cache=True)
def slice_min(kind, exps, coeffs, powers, x0, U, V, c, nphase, tol):
    """Minimum over phases of the ray root along ``cos(t) U + sin(t) V``.

    ``U`` and ``V`` are the real forms of a unit complex vector ``u`` and of
    ``i u``, so the rays sweep the complex line ``x0 + C u``.  A uniform grid
    of ``nphase`` phases is refined by golden section around the two lowest
    grid minima.  Returns ``(distance, phase)``.
    """
    val, th, cert = _slice_core(kind, exps, coeffs, powers, x0, U, V, c, nphase, tol)
    return val, th


@njit(cache=True)
def slice_min_cert(kind, exps, coeffs, powers, x0, U, V, c, nphase, tol):
    """Certified lower bound for the slice distance: ``(distance, phase, cert)``.

    With grid spacing ``D``, the supporting line at the nearest point of the
    slice boundary bounds the ray length by ``delta / cos(angle)``.  Either
    the true minimizer lies in a refined bracket (then the refined value is
    the minimum) or its nearest grid phase lies outside both brackets, whose
    value is then at most ``delta / cos(D/2)``.  Hence ``delta >= cert =
    min(refined values, cos(D/2) * min of the remaining grid values)``.
    """
    return _slice_core(kind, exps, coeffs, powers, x0, U, V, c, nphase, tol)


@njit(cache=True)
def _slice_core(kind, exps, coeffs, powers, x0, U, V, c, nphase, tol):
    R = np.empty(nphase)
    d = np.empty(x0.shape[0])
    p = np.empty(x0.shape[0])
    g = np.empty(x0.shape[0])
    step = _TWO_PI / nphase
    hint = 1.0
    for k in range(nphase):
        _phase_dir(U, V, k * step, d)
        R[k] = _ray_root(kind, exps, coeffs, powers, x0, d, c, hint, p, g)
        if not np.isfinite(R[k]):
            return R[k], 0.0, R[k]
        hint = 1.25 * R[k]
    best1 = -1
    best2 = -1
    for k in range(nphase):
        km = (k - 1) % nphase
        kp = (k + 1) % nphase
        if R[k] <= R[km] and R[k] <= R[kp]:
            if best1 < 0 or R[k] < R[best1]:
                best2 = best1
                best1 = k
            elif best2 < 0 or R[k] < R[best2]:
                best2 = k
    val, th = _golden_phase(kind, exps, coeffs, powers, x0, U, V, c,
                            (best1 - 1) * step, (best1 + 1) * step, R[best1], tol)
    if R[best1] < val:
        val = R[best1]
        th = best1 * step
    refined2 = False
    if best2 >= 0 and R[best2] < val * (1.0 + 1e-3):
        refined2 = True
        v2, t2 = _golden_phase(kind, exps, coeffs, powers, x0, U, V, c,
                               (best2 - 1) * step, (best2 + 1) * step, R[best2], tol)
        if v2 < val:
            val = v2
            th = t2
    rest = np.inf
    for k in range(nphase):
        if k == best1 or (refined2 and k == best2):
            continue
        if R[k] < rest:
            rest = R[k]
    cert = min(val, math.cos(0.5 * step) * rest)
    return val, th % _TWO_PI, cert


@njit(cache=True)
def slice_min_many(kind, exps, coeffs, powers, X, U, V, c, nphase, tol):
    """``slice_min`` for every row of ``X`` along one fixed complex direction."""
    m = X.shape[0]
    out = np.empty(m)
    ths = np.empty(m)
    for i in range(m):
        out[i], ths[i] = slice_min(kind, exps, coeffs, powers, X[i], U, V, c, nphase, tol)
    return out, ths


@njit(cache=True)
def project_level(kind, exps, coeffs, powers, q, B, c, alpha0, maxit):
    """Nearest point to ``q`` on ``{r = c}`` inside the affine set ``q + B alpha``.

    Damped Newton on the Lagrange system ``alpha = lam B^T grad r``,
    ``r = c``.  Returns ``(alpha, lam, status)`` where status is 0 for a
    converged local minimum, 1 for a converged non-minimal critical point
    and 2 for non-convergence.
    """
    n2 = q.shape[0]
    k = B.shape[1]
    g = np.empty(n2)
    H = np.empty((n2, n2))
    xi = np.empty(n2)
    alpha = alpha0.copy()
    for a in range(n2):
        xi[a] = q[a]
        for b in range(k):
            xi[a] += B[a, b] * alpha[b]
    r_grad(kind, exps, coeffs, powers, xi, g)
    gb = B.T @ g
    lam = np.dot(alpha, gb) / max(np.dot(gb, gb), 1e-300)
    F = np.empty(k + 1)
    J = np.zeros((k + 1, k + 1))
    status = 2
    for it in range(maxit):
        for a in range(n2):
            xi[a] = q[a]
            for b in range(k):
                xi[a] += B[a, b] * alpha[b]
        val = r_hess(kind, exps, coeffs, powers, xi, g, H) - c
        gb = B.T @ g
        HB = B.T @ H @ B
        for a in range(k):
            F[a] = alpha[a] - lam * gb[a]
        F[k] = val
        fn = math.sqrt(np.dot(F, F))
        scale = math.sqrt(np.dot(alpha, alpha)) + 1e-300
        if fn <= 1e-15 * max(scale, 1.0) and it > 0:
            status = 0
            break
        for a in range(k):
            for b in range(k):
                J[a, b] = -lam * HB[a, b]
            J[a, a] += 1.0
            J[a, k] = -gb[a]
            J[k, a] = gb[a]
        J[k, k] = 0.0
        try:
            delta = np.linalg.solve(J, -F)
        except Exception:
            return alpha, lam, 2
        s = 1.0
        accepted = False
        for _ in range(40):
            alpha_n = alpha + s * delta[:k]
            lam_n = lam + s * delta[k]
            for a in range(n2):
                xi[a] = q[a]
                for b in range(k):
                    xi[a] += B[a, b] * alpha_n[b]
            val_n = r_grad(kind, exps, coeffs, powers, xi, g) - c
            gb_n = B.T @ g
            fn_n = val_n * val_n
            for a in range(k):
                fa = alpha_n[a] - lam_n * gb_n[a]
                fn_n += fa * fa
            if math.sqrt(fn_n) <= (1.0 - 1e-4 * s) * fn or math.sqrt(fn_n) <= 1e-15:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            # stagnation at rounding level counts as converged
            if fn <= 1e-12 * max(scale, 1.0):
                status = 0
            break
        stepn = s * math.sqrt(np.dot(delta[:k], delta[:k]))
        alpha = alpha_n
        lam = lam_n
        if stepn <= 1e-15 * scale:
            status = 0
            break
    if status != 0:
        return alpha, lam, 2
    if lam <= 0.0:
        return alpha, lam, 1
    # second-order test on the tangent space of the constraint
    for a in range(n2):
        xi[a] = q[a]
        for b in range(k):
            xi[a] += B[a, b] * alpha[b]
    r_hess(kind, exps, coeffs, powers, xi, g, H)
    gb = B.T @ g
    HB = B.T @ H @ B
    nrm = math.sqrt(np.dot(gb, gb))
    P = np.eye(k)
    for a in range(k):
        for b in range(k):
            P[a, b] -= gb[a] * gb[b] / (nrm * nrm)
    L = P @ (np.eye(k) - lam * HB) @ P
    w = np.linalg.eigvalsh(L)
    # P has one zero eigenvalue along gb; every other one must be >= 0
    neg = 0
    for e in w:
        if e < -1e-9:
            neg += 1
    if neg > 0:
        return alpha, lam, 1
    return alpha, lam, 0


@njit(cache=True)
def disk_distance(wa, wb, wc, rho):
    """Poincare distance of ``wa, wb`` in the disk ``|w - wc| < rho`` (complex scalars)."""
    za = (wa - wc) / rho
    zb = (wb - wc) / rho
    if abs(za) >= 1.0 or abs(zb) >= 1.0:
        return np.inf
    num = abs(za - zb)
    den = abs(1.0 - za.conjugate() * zb)
    q = num / den
    if q >= 1.0:
        return np.inf
    return math.atanh(q)


@njit(cache=True)
def segment_profile(kind, exps, coeffs, powers, a, U, V, length, kappa, extra, max_pts, nphase, tol):
    """Graded sample of the slice distance along ``a + t U``, ``0 <= t <= length``.

    ``U, V`` are the real forms of a unit complex vector ``u`` and of
    ``i u``.  Steps are ``kappa * delta(t)``, so the mesh follows the boundary
    scale; the sorted parameters in ``extra`` are inserted as mesh points.
    ``delta`` is the certified lower bound of :func:`slice_min_cert`.
    Returns ``(t, delta, phase, ok)``; ``ok`` is False when ``max_pts`` is hit.
    """
    n2 = a.shape[0]
    ts = np.empty(max_pts)
    ds = np.empty(max_pts)
    ph = np.empty(max_pts)
    x0 = np.empty(n2)
    t = 0.0
    m = 0
    ie = 0
    ok = True
    while True:
        for k in range(n2):
            x0[k] = a[k] + t * U[k]
        val, th, d = _slice_core(kind, exps, coeffs, powers, x0, U, V, 0.0, nphase, tol)
        ts[m] = t
        ds[m] = d
        ph[m] = th
        m += 1
        if t >= length:
            break
        if m >= max_pts:
            ok = False
            break
        tn = t + kappa * d
        while ie < extra.shape[0] and extra[ie] <= t:
            ie += 1
        if ie < extra.shape[0] and extra[ie] < tn:
            tn = extra[ie]
        if tn >= length:
            tn = length
        t = tn
    return ts[:m], ds[:m], ph[:m], ok


@njit(cache=True)
def chain_costs(ts, ds, margin):
    """Shortest certified chain from mesh point 0 to every mesh point.

    The mesh lies on a segment inside a planar convex slice ``D``; ``ds`` are
    the distances to ``∂D``.  Two bounds on ``K_D`` between mesh points are
    combined: the trapezoid rule on ``1/delta`` between neighbours (an upper
    bound because ``delta`` is concave along segments) and the exact Poincare
    distance in the inscribed disk of radius ``delta_k`` around any mesh point
    ``k`` that contains both points.  Returns the array of best costs.
    """
    m = ts.shape[0]
    best = np.full(m, np.inf)
    best[0] = 0.0
    for j in range(1, m):
        # neighbour trapezoid
        h = ts[j] - ts[j - 1]
        c = best[j - 1] + 0.5 * h * (1.0 / ds[j - 1] + 1.0 / ds[j])
        if c < best[j]:
            best[j] = c
        for k in range(m):
            rho = ds[k] * (1.0 - margin)
            zb = (ts[j] - ts[k]) / rho
            if zb >= 1.0 or zb <= -1.0:
                continue
            for i in range(j):
                if best[i] == np.inf:
                    continue
                za = (ts[i] - ts[k]) / rho
                if za >= 1.0 or za <= -1.0:
                    continue
                q = abs(za - zb) / (1.0 - za * zb)
                if q >= 1.0:
                    continue
                c = best[i] + math.atanh(q)
                if c < best[j]:
                    best[j] = c
    return best
