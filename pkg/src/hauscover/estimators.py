"""Scikit-learn style wrappers around the content engines.

``fit`` takes an (n, d) coordinate array, builds the finite metric space and
solves; fitted attributes carry a trailing underscore.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .content import DEFAULT_EXACT_CAP, hausdorff_content, weighted_content
from .metricspace import FiniteMetricSpace

__all__ = ["HausdorffContent", "WeightedContent"]


def _space(X, metric, resolution) -> FiniteMetricSpace:
    X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    coords = [tuple(Fraction(float(v)) for v in row) for row in X]
    return FiniteMetricSpace.from_coordinates(coords, metric=metric, eps=Fraction(float(resolution)))


class HausdorffContent(BaseEstimator):
    """Integer-cover content of a point cloud at scale ``delta`` (None: unbounded)."""

    def __init__(self, s=1.0, delta=None, resolution=0.0, metric="euclidean",
                 exact_cap=DEFAULT_EXACT_CAP):
        self.s = s
        self.delta = delta
        self.resolution = resolution
        self.metric = metric
        self.exact_cap = exact_cap

    def fit(self, X, y=None):
        self.space_ = _space(X, self.metric, self.resolution)
        res = hausdorff_content(self.space_, None, self.s, self.delta, exact_cap=self.exact_cap)
        self.result_ = res
        self.content_ = res.value
        self.mode_ = res.mode
        self.witness_ = res.witness
        self.n_features_in_ = len(self.space_.coords[0])
        return self

    def transform(self, X=None):
        """Index of the first witness set covering each fitted point."""
        check_is_fitted(self, "result_")
        label = np.full(self.space_.n, -1, dtype=np.int64)
        for k, A in enumerate(self.witness_):
            for i in A:
                if label[i] < 0:
                    label[i] = k
        return label


class WeightedContent(BaseEstimator, TransformerMixin):
    """Fractional-cover content; ``transform`` returns the dual packing per point."""

    def __init__(self, s=1.0, delta=None, resolution=0.0, metric="euclidean"):
        self.s = s
        self.delta = delta
        self.resolution = resolution
        self.metric = metric

    def fit(self, X, y=None):
        self.space_ = _space(X, self.metric, self.resolution)
        res = weighted_content(self.space_, None, self.s, self.delta)
        self.result_ = res
        self.content_ = res.value
        self.mode_ = res.mode
        self.dual_ = res.dual
        self.n_features_in_ = len(self.space_.coords[0])
        return self

    def transform(self, X=None):
        check_is_fitted(self, "result_")
        return np.array([float(self.dual_.get(i, 0)) for i in range(self.space_.n)])
