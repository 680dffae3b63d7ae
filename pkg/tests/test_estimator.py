import numpy as np
import pytest
from sklearn.base import clone

from msh import ModeSeekingHypergraph
from msh.bench import gen_lines, misclassification_error, star5_spec
from msh.exceptions import DimensionMismatch


@pytest.fixture(scope="module")
def star5():
    return gen_lines(star5_spec(0), dim=2)


def test_params_roundtrip():
    est = ModeSeekingHypergraph("line3d", k=30, random_state=2)
    params = est.get_params()
    assert params["model"] == "line3d" and params["k"] == 30
    c = clone(est)
    assert c.get_params() == params
    est.set_params(e_threshold=3.0)
    assert est.e_threshold == 3.0


def test_fit_predict_star5(star5):
    est = ModeSeekingHypergraph("line2d", random_state=0)
    labels = est.fit_predict(star5.points)
    assert est.n_modes_ == 5
    assert labels.shape == (len(star5.points),)
    assert est.transform(star5.points).shape == (len(star5.points), 5)
    # predict on the training points reproduces the gate labels
    assert np.array_equal(est.predict(star5.points), labels)
    assert est.score(star5.points, star5.gt_labels) == -misclassification_error(labels, star5.gt_labels)


def test_random_state_reproducible(star5):
    a = ModeSeekingHypergraph(n_hypotheses=1500, random_state=7).fit(star5.points)
    b = ModeSeekingHypergraph(n_hypotheses=1500, random_state=7).fit(star5.points)
    assert np.array_equal(a.labels_, b.labels_)


def test_input_validation(star5):
    with pytest.raises(DimensionMismatch):
        ModeSeekingHypergraph("line3d").fit(star5.points)
    with pytest.raises(ValueError):
        ModeSeekingHypergraph().fit(np.array([[0.0, np.nan], [1, 1], [2, 2]]))
    est = ModeSeekingHypergraph(n_hypotheses=500, random_state=0).fit(star5.points)
    with pytest.raises(DimensionMismatch):
        est.predict(np.zeros((3, 3)))


def test_not_fitted():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        ModeSeekingHypergraph().predict(np.zeros((3, 2)))
