"""scikit-learn compatible front end for mode seeking on hypergraphs."""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionMismatch
from .geometry import ModelKind, residuals_batch
from .modeseek import (
    DEFAULT_DROP_WINDOW,
    DEFAULT_WAS_FRACTION,
    MSHConfig,
    msh_fit,
)
from .scale import DEFAULT_E

__all__ = ["ModeSeekingHypergraph", "check_points"]


def check_points(X, kind):
    """Validate a point array for ``kind``: 2D, finite, matching dimension."""
    kind = ModelKind.parse(kind)
    X = check_array(X, dtype=np.float64, ensure_min_samples=kind.minimal_size)
    if X.shape[1] != kind.dim:
        raise DimensionMismatch(
            f"{kind.value} needs {kind.dim} columns, got {X.shape[1]}"
        )
    return X


class ModeSeekingHypergraph(ClusterMixin, TransformerMixin, BaseEstimator):
    """Multi-structure geometric model fitting by mode seeking on hypergraphs.

    Model hypotheses from proximity-sampled minimal subsets become weighted
    vertices of a hypergraph whose hyperedges are the data points.  Model
    instances are the vertices that are far, in Tanimoto distance of their
    inlier preferences, from every higher-weighted vertex.

    Parameters
    ----------
    model : {"line2d", "circle2d", "line3d", "homography", "fundamental"}
        Model family.  Points have 2, 2, 3, 4 and 4 columns respectively;
        correspondences are ``(x1, y1, x2, y2)``.
    n_hypotheses : int, optional
        Size of the hypothesis pool.  None uses 5000 for lines and circles,
        10000 for homographies and 20000 for fundamental matrices.
    k : int, optional
        Order statistic used by the inlier scale estimator; None uses 10% of
        the number of points.
    e_threshold : float, default=2.5
        Inlier threshold in estimated scales.
    was_fraction : float, default=0.15
        Fraction of vertices kept by weight-aware sampling.
    use_was : bool, default=True
        Disable to run mode seeking on every vertex.
    drop_window : int, default=100
        Number of leading positions searched for the largest MTD drop.
    proximity_sigma : float, optional
        Proximity sampling bandwidth in data units; None uses 0.1 times the
        bounding-box diagonal.
    refine : bool, default=False
        Refit each mode to its inliers by least squares.
    random_state : int, optional
    n_jobs : int, optional
        Worker threads for hypothesis generation and hypergraph building.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        0 for outliers, ``k`` for the k-th mode.
    modes_ : list of ModelParams
    mode_scales_ : ndarray of shape (n_modes,)
    n_modes_ : int
    result_ : FittingResult
    """

    def __init__(self, model="line2d", *, n_hypotheses=None, k=None,
                 e_threshold=DEFAULT_E, was_fraction=DEFAULT_WAS_FRACTION,
                 use_was=True, drop_window=DEFAULT_DROP_WINDOW,
                 proximity_sigma=None, refine=False, random_state=None,
                 n_jobs=None):
        self.model = model
        self.n_hypotheses = n_hypotheses
        self.k = k
        self.e_threshold = e_threshold
        self.was_fraction = was_fraction
        self.use_was = use_was
        self.drop_window = drop_window
        self.proximity_sigma = proximity_sigma
        self.refine = refine
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self):
        seed = self.random_state
        if seed is None:
            seed = int(np.random.default_rng().integers(2**32))
        elif isinstance(seed, np.random.Generator):
            seed = int(seed.integers(2**32))
        elif isinstance(seed, np.random.RandomState):
            seed = int(seed.randint(2**31))
        return MSHConfig(
            hypotheses=self.n_hypotheses,
            k=self.k,
            e_threshold=self.e_threshold,
            was_fraction=self.was_fraction,
            drop_window=self.drop_window,
            proximity_sigma=self.proximity_sigma,
            seed=int(seed),
            refine=self.refine,
            use_was=self.use_was,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        """Detect the model instances in ``X``.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_columns)
        y : None
            Ignored.

        Returns
        -------
        self
        """
        kind = ModelKind.parse(self.model)
        X = check_points(X, kind)
        self.kind_ = kind
        self.n_features_in_ = X.shape[1]
        self.result_ = msh_fit(X, kind, self._config())
        self.modes_ = self.result_.modes
        self.mode_scales_ = self.result_.mode_scales
        self.n_modes_ = self.result_.n_modes
        self.labels_ = self.result_.labels
        return self

    def transform(self, X):
        """Scale-normalized residuals ``r / s`` of every point to every mode,
        shape (n_samples, n_modes)."""
        check_is_fitted(self, "modes_")
        X = check_points(X, self.kind_)
        thetas = np.stack([m.theta for m in self.modes_])
        return (residuals_batch(self.kind_, thetas, X) / self.mode_scales_[:, None]).T

    def predict(self, X):
        """Label new points: the accepting mode with the smallest normalized
        residual, or 0 when every residual exceeds ``e_threshold`` scales."""
        Z = self.transform(X)
        labels = np.argmin(Z, axis=1) + 1
        labels[Z.min(axis=1) > self.e_threshold] = 0
        return labels

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    def score(self, X, y):
        """Negative misclassification percentage of ``predict(X)`` against ``y``."""
        from .bench import misclassification_error

        return -misclassification_error(self.predict(X), y)
