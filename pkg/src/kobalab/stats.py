"""Small statistics helpers shared by the acceptance harness and the CLI reports."""
from __future__ import annotations

import math

import numpy as np


def ols_slope(x, y):
    """Least-squares slope of ``y`` against ``x``; ``None`` with fewer than two distinct ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    if x.size < 2 or np.ptp(x) == 0:
        return None
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def log_inverse(h):
    return np.log(1.0 / np.asarray(h, dtype=float))


def quantiles(values, qs=(0.5, 0.95, 1.0)):
    v = np.sort(np.asarray(values, dtype=float))
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {f"q{int(round(100 * q))}": None for q in qs}
    return {f"q{int(round(100 * q))}": float(np.quantile(v, q)) for q in qs}


def band(values):
    """``(min, max)`` of the finite entries."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return (None, None)
    return float(v.min()), float(v.max())


def ratio_band(values):
    """Multiplicative band ``(min, max, K)`` with ``K = sqrt(max / min)``, so the values lie in ``[c/K, c K]``."""
    lo, hi = band(values)
    if lo is None or lo <= 0:
        return lo, hi, None
    return lo, hi, math.sqrt(hi / lo)


def relative_change(a, b):
    """``|a - b| / max(|a|, |b|)``."""
    m = max(abs(a), abs(b))
    return 0.0 if m == 0 else abs(a - b) / m


def bucket_statistic(h, values, buckets, stat=np.max):
    """Apply ``stat`` to the values falling in each bucket ``[h_b, 2 h_b)`` (keyed by ``h_b``)."""
    h = np.asarray(h, dtype=float)
    v = np.asarray(values, dtype=float)
    out = {}
    for hb in buckets:
        sel = (h >= hb) & (h < 2 * hb) & np.isfinite(v)
        out[hb] = float(stat(v[sel])) if np.any(sel) else None
    return out
