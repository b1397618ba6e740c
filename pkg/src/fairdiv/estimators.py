"""scikit-learn compatible wrappers around the learner and the dependency estimate."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dependency import estimate_dependency
from .divergence import RatioBounds
from .learner import TrainConfig, train
from .ratio import KernelSpec, estimate_ratio


def _viewpoints(X, col):
    raw = X[:, col]
    v = np.rint(raw).astype(int)
    if np.any(np.abs(raw - v) > 1e-9) or np.any(v < 0):
        raise ValueError(f"column {col} must hold non-negative integer viewpoints")
    return v


class FairClassifier(ClassifierMixin, BaseEstimator):
    """Linear multiclass classifier whose relaxed predictions meet a dependency budget.

    The viewpoint is read from column ``viewpoint_col`` of ``X``; the scorer
    sees all columns, the viewpoint included.
    """

    def __init__(self, eta=math.inf, phi="hellinger", viewpoint_col=0, c_lo=0.1, c_hi=10.0,
                 coupling_rho=10.0, solver="auto", max_iter=3000, tol=1e-3):
        self.eta = eta
        self.phi = phi
        self.viewpoint_col = viewpoint_col
        self.c_lo = c_lo
        self.c_hi = c_hi
        self.coupling_rho = coupling_rho
        self.solver = solver
        self.max_iter = max_iter
        self.tol = tol

    def _config(self):
        return TrainConfig(
            eta=float(self.eta), phi=self.phi, bounds=RatioBounds(self.c_lo, self.c_hi),
            coupling_rho=self.coupling_rho, solver=self.solver,
            max_outer_iters=self.max_iter, tol=self.tol,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        v = _viewpoints(X, self.viewpoint_col)
        self.n_features_in_ = X.shape[1]
        self.n_viewpoints_ = int(v.max()) + 1
        self.model_ = train(X, y_enc, v, self._config(), n_classes=len(self.classes_),
                            n_v=self.n_viewpoints_)
        self.achieved_fairness_ = self.model_.achieved_fairness
        self.empirical_risk_ = self.model_.empirical_risk
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.model_.scorer.scores(X)

    def predict_proba(self, X):
        return softmax(self.decision_function(X), axis=1)

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


class DependencyAuditor(TransformerMixin, BaseEstimator):
    """Estimates the viewpoint/prediction dependency from ``(v, yhat)`` pairs.

    ``fit`` takes a two-column array; ``transform`` maps pairs to the fitted
    per-cell ratio (NaN for cells never seen during fit).
    """

    def __init__(self, phi="hellinger", t=2.3, c_lo=0.1, c_hi=10.0):
        self.phi = phi
        self.t = t
        self.c_lo = c_lo
        self.c_hi = c_hi

    def _pairs(self, X):
        X = check_array(X)
        if X.shape[1] != 2:
            raise ValueError("expected two columns (viewpoint, prediction)")
        return _viewpoints(X, 0), _viewpoints(X, 1)

    def fit(self, X, y=None):
        v, yhat = self._pairs(X)
        self.kernel_ = KernelSpec(int(v.max()) + 1, int(yhat.max()) + 1)
        bounds = RatioBounds(self.c_lo, self.c_hi)
        self.report_ = estimate_dependency(self.phi, (v, yhat), self.kernel_, bounds, t=self.t)
        self.ratio_ = estimate_ratio((v, yhat), self.kernel_, clamp=bounds).per_cell
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "report_")
        v, yhat = self._pairs(X)
        if v.max() >= self.kernel_.n_v or yhat.max() >= self.kernel_.n_y:
            raise ValueError("pair outside the fitted index range")
        return self.ratio_[v, yhat][:, None]

    def score(self, X, y=None):
        """Negative upper bound of a fresh fit on ``X``; higher means less dependent."""
        return -type(self)(**self.get_params()).fit(X).report_.upper_bound
