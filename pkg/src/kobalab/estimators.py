"""scikit-learn style front ends for calibration and distance bounds.

Both estimators are thin wrappers: all numerics live in :mod:`kobalab.pseudo`
and :mod:`kobalab.kobayashi`.  Inputs are arrays of complex points with the
last axis the ambient coordinate.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ConfigurationError, OutOfChartError
from .kobayashi import distance_sandwich
from .pseudo import calibrate, pair_table, triple_ratios


def _points(X, n, k):
    X = np.asarray(X, dtype=complex)
    if X.ndim != 3 or X.shape[1:] != (k, n):
        raise ConfigurationError(f"expected an array of shape (m, {k}, {n}), got {X.shape}")
    return X


class QuasiMetricCalibrator(BaseEstimator):
    """Empirical quasi-metric constant of the pseudodistance ``M``.

    Parameters
    ----------
    domain : ConvexDomainSpec
    h_max : float, optional
        Chart depth; defaults to ``domain.h_max``.
    sample_count : int
        Number of sampled triples when :meth:`fit` gets no data.
    seed : int
    patch_radius : float, optional

    Attributes
    ----------
    calibration_ : PseudoCalibration
    C_quasi_, eps0_ : float
    """

    def __init__(self, domain, h_max=None, sample_count=1000, seed=42, patch_radius=None):
        self.domain = domain
        self.h_max = h_max
        self.sample_count = sample_count
        self.seed = seed
        self.patch_radius = patch_radius

    def fit(self, X=None, y=None):
        """Calibrate on triples ``X`` of shape ``(m, 3, n)``, or on seeded samples if ``X`` is None."""
        pts = None if X is None else list(_points(X, self.domain.n, 3))
        self.calibration_ = calibrate(self.domain, h_max=self.h_max, sample_count=self.sample_count,
                                      seed=self.seed, patch_radius=self.patch_radius, points=pts)
        self.C_quasi_ = float(self.calibration_.C_quasi)
        self.eps0_ = float(self.calibration_.eps0)
        return self

    def ratios(self, X):
        """Per-triple ``(symmetry, triangle)`` ratios; NaN rows for triples outside the chart."""
        out = []
        for pts in _points(X, self.domain.n, 3):
            try:
                out.append(triple_ratios(pair_table(self.domain, pts)))
            except OutOfChartError:
                out.append((np.nan, np.nan))
        return np.array(out, dtype=float).reshape(-1, 2)

    def score(self, X, y=None):
        """Largest ratio on ``X`` relative to the fitted constant (at most 1 when it holds up)."""
        check_is_fitted(self, "C_quasi_")
        r = self.ratios(X)
        return float(np.nanmax(r, initial=1.0) / self.C_quasi_)


class DistanceSandwichTransformer(TransformerMixin, BaseEstimator):
    """Map point pairs to ``[K_lo, K_up, g]``.

    Parameters
    ----------
    domain : ConvexDomainSpec
    refine : bool
        Also run knot refinement on the witness path.
    """

    def __init__(self, domain, refine=False):
        self.domain = domain
        self.refine = refine

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        """``X`` of shape ``(m, 2, n)``; returns an ``(m, 3)`` array of ``K_lo, K_up, g``."""
        rows = []
        for x, y in _points(X, self.domain.n, 2):
            s = distance_sandwich(self.domain, x, y, refine=self.refine)
            rows.append((s.K_lo, s.K_up, s.g))
        return np.array(rows, dtype=float).reshape(-1, 3)
