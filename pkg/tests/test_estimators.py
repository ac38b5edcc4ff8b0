import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hauscover.content import hausdorff_content
from hauscover.estimators import HausdorffContent, WeightedContent
from hauscover.metricspace import FiniteMetricSpace


def coords():
    return np.array([[0.0, 0.0], [0.25, 0.0], [1.0, 0.5], [0.5, 0.5]])


def test_hausdorff_estimator_matches_engine():
    est = HausdorffContent(s=1, delta=0.6, resolution=0.125).fit(coords())
    from fractions import Fraction
    X = FiniteMetricSpace.from_coordinates([tuple(Fraction(v) for v in r) for r in coords()],
                                           eps=Fraction(1, 8))
    assert est.content_ == hausdorff_content(X, None, 1, 0.6).value
    labels = est.transform()
    assert (labels >= 0).all() and labels.shape == (4,)


def test_weighted_estimator_dual():
    est = WeightedContent(s=1, resolution=0.125)
    dual = est.fit_transform(coords())
    assert dual.sum() == pytest.approx(float(est.content_))


def test_params_and_clone():
    est = HausdorffContent(s=0.5, exact_cap=10)
    assert est.get_params()["exact_cap"] == 10
    assert clone(est).set_params(s=2).s == 2
    with pytest.raises(NotFittedError):
        WeightedContent().transform(coords())


def test_input_validation():
    with pytest.raises(ValueError):
        HausdorffContent().fit(np.array([[np.nan, 0.0]]))
