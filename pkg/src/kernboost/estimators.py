"""scikit-learn compatible wrappers around the boosted and higher-order smoothers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import as_1d, check_bandwidth, check_iterations, check_xy
from .kernels import get_kernel
from .smoother import (
    DEFAULT_DENOM_FLOOR,
    FitConfig,
    Sample,
    boosted_weights,
    fit_boosted,
    higher_order_fit,
    staged_predictions,
)

__all__ = ["BoostedKernelRegressor", "HigherOrderKernelRegressor"]


def _covariate(X, name="X"):
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2 and X.shape[1] != 1:
        raise ValueError(f"{name} must have exactly one feature, got {X.shape[1]}")
    return as_1d(X, name)


class BoostedKernelRegressor(RegressorMixin, BaseEstimator):
    """Nadaraya-Watson smoother improved by ``n_iter`` rounds of L2 boosting.

    Parameters
    ----------
    bandwidth : float, default=0.1
    n_iter : int, default=1
        Boosting rounds; 0 gives the plain Nadaraya-Watson fit.
    kernel : {"gaussian", "epanechnikov"}, default="gaussian"
    denom_floor : float, default=1e-300
        Evaluation points whose kernel mass does not exceed this are flagged
        and predicted as NaN.

    Attributes
    ----------
    fit_ : BoostFit
        Fitted values and residuals at the design points for every round.
    """

    def __init__(self, bandwidth=0.1, n_iter=1, kernel="gaussian", denom_floor=DEFAULT_DENOM_FLOOR):
        self.bandwidth = bandwidth
        self.n_iter = n_iter
        self.kernel = kernel
        self.denom_floor = denom_floor

    def fit(self, X, y):
        x = _covariate(X)
        x, y = check_xy(x, y)
        self.config_ = FitConfig(check_bandwidth(self.bandwidth), check_iterations(self.n_iter),
                                 get_kernel(self.kernel), self.denom_floor)
        self.X_, self.y_ = x, y
        self.fit_ = fit_boosted(Sample(x, y), self.config_)
        self.n_features_in_ = 1
        return self

    def staged_predict(self, X):
        """Yield predictions after each round ``0..n_iter``."""
        check_is_fitted(self, "fit_")
        preds, flags = staged_predictions(self.X_, self.y_, _covariate(X), self.config_.h,
                                          self.config_.kernel, self.config_.r, self.denom_floor)
        preds[:, flags] = np.nan
        yield from preds

    def predict(self, X):
        *_, last = self.staged_predict(X)
        return last

    def weight_profile(self, X):
        """Exact boosted weights on ``X`` (a :class:`WeightProfile`)."""
        check_is_fitted(self, "fit_")
        return boosted_weights(self.X_, _covariate(X), self.config_.h, self.config_.kernel,
                               self.config_.r, self.denom_floor)


class HigherOrderKernelRegressor(RegressorMixin, BaseEstimator):
    """Nadaraya-Watson ratio with a twicing-built higher-order kernel.

    The denominator is left unguarded on purpose; ``predict_with_flags``
    reports which points had a near-zero or negative denominator.
    """

    def __init__(self, bandwidth=0.1, order=1, kernel="gaussian", instability_tol=0.1):
        self.bandwidth = bandwidth
        self.order = order
        self.kernel = kernel
        self.instability_tol = instability_tol

    def fit(self, X, y):
        x, y = check_xy(_covariate(X), y)
        check_bandwidth(self.bandwidth)
        check_iterations(self.order)
        self.sample_ = Sample(x, y)
        self.n_features_in_ = 1
        return self

    def predict_with_flags(self, X):
        check_is_fitted(self, "sample_")
        return higher_order_fit(self.sample_, self.bandwidth, get_kernel(self.kernel), self.order,
                                _covariate(X), self.instability_tol)

    def predict(self, X):
        return self.predict_with_flags(X)[0]
