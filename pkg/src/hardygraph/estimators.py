"""scikit-learn style wrappers over the functional API.

Only two objects fit the estimator mould naturally: a power-law regressor
for ``(r, value)`` series and a transformer applying ``L^power`` to vertex
functions stored as rows.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .asymptotics import fit_series
from .graph import WeightedGraph
from .spectral import apply_spectral_function, eigendecompose


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Fit ``y ~ A r^s`` (``correction="none"``) or ``y ~ A r^s - B`` (``"offset"``).

    Parameters
    ----------
    correction : {"none", "offset"}
    window : tuple or None
        Inclusive ``(lo, hi)`` range of ``r`` used by the fit.
    """

    def __init__(self, correction: str = "none", window=None):
        self.correction = correction
        self.window = window

    def fit(self, X, y):
        r = np.asarray(X, dtype=float).reshape(len(y), -1)[:, 0]
        y = np.asarray(y, dtype=float)
        order = np.argsort(r)
        self.fit_ = fit_series(r[order], y[order], self.window, self.correction)
        self.slope_ = self.fit_.slope
        self.intercept_ = self.fit_.intercept
        self.offset_ = self.fit_.offset
        self.stderr_ = self.fit_.stderr
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        r = np.asarray(X, dtype=float).reshape(np.shape(X)[0], -1)[:, 0]
        return np.exp(self.intercept_) * r ** self.slope_ - self.offset_


class SpectralPowerTransformer(TransformerMixin, BaseEstimator):
    """Apply ``L^power`` of a fitted graph to each row of ``X``.

    ``fit`` takes a :class:`WeightedGraph`; ``transform`` takes an array of
    shape ``(n_functions, n_vertices)``. Negative powers need a positive
    spectral gap.
    """

    def __init__(self, power: float = 0.5, gap_tol=None):
        self.power = power
        self.gap_tol = gap_tol

    def fit(self, X: WeightedGraph, y=None):
        if not isinstance(X, WeightedGraph):
            raise TypeError("fit expects a WeightedGraph")
        self.spectrum_ = eigendecompose(X, self.gap_tol)
        self.n_features_in_ = X.n
        return self

    def transform(self, X):
        check_is_fitted(self, "spectrum_")
        F = np.atleast_2d(np.asarray(X, dtype=float))
        if F.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} vertex values per row, got {F.shape[1]}")
        p = float(self.power)
        if p < 0:
            self.spectrum_.require_gap("a negative power")
        out = apply_spectral_function(self.spectrum_, lambda lam: lam ** p, F.T, positive_only=p > 0)
        return out.T
