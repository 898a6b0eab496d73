"""Scikit-learn style estimator classes wrapping the fitting routines.

Each estimator is fit with ``fit(X, y, sigma2)`` where X is the (K, p) design,
y the per-area direct estimates, and sigma2 the known sampling variances.
Fitted attributes follow sklearn conventions (trailing underscore), and
``get_params`` / ``set_params`` come from BaseEstimator so the classes
compose with pipelines, clone, and parameter search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils import check_array

from .data import AreaDataset
from .predictors import (
    fit_cbp,
    fit_eblup,
    fit_multitau_cbp,
    fit_obp,
    fit_plugin_cbp,
)


class _BaseAreaEstimator(BaseEstimator):
    """Shared fit/predict plumbing for the per-area shrinkage estimators."""

    def _fit_impl(self, data: AreaDataset):
        raise NotImplementedError

    def fit(self, X, y, sigma2):
        X = check_array(X, ensure_2d=True, dtype=float)
        y = check_array(y, ensure_2d=False, dtype=float)
        sigma2 = check_array(sigma2, ensure_2d=False, dtype=float)
        data = AreaDataset(y=y, x=X, sigma2=sigma2)
        result = self._fit_impl(data)
        self.result_ = result
        self.beta_ = result.beta
        self.theta_ = result.theta_hat
        self.tau_ = result.tau_star
        self.alpha_ = result.alpha_star
        self.weights_ = np.asarray(result.weights)
        self.shrinkage_ = np.asarray(result.shrinkage)
        self.risk_estimate_ = result.risk_estimate
        self.n_features_in_ = data.p
        return self

    def predict(self, X=None):
        """In-sample shrinkage predictions, or the regression surface X @ beta
        for new design rows when X is given."""
        if not hasattr(self, "result_"):
            raise NotFittedError(
                f"{type(self).__name__} must be fitted before calling predict"
            )
        if X is None:
            return self.theta_
        X = check_array(X, ensure_2d=True, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns, expected {self.n_features_in_}"
            )
        return X @ self.beta_

    def fit_predict(self, X, y, sigma2):
        return self.fit(X, y, sigma2).predict()


class Eblup(_BaseAreaEstimator):
    """Precision-weighted shrinkage predictor with an estimated variance
    component; ``tau_method`` is one of "reml", "mle", "ure"."""

    def __init__(self, tau_method: str = "reml"):
        self.tau_method = tau_method

    def _fit_impl(self, data):
        return fit_eblup(data, self.tau_method)


class ObservedBestPredictor(_BaseAreaEstimator):
    """Shrinkage predictor with prediction-targeted regression weights."""

    def _fit_impl(self, data):
        return fit_obp(data)


class CompromiseBestPredictor(_BaseAreaEstimator):
    """Shrinkage predictor mixing the two weight families, with the mixture
    and variance component chosen by minimizing the unbiased risk estimate."""

    def __init__(self, alpha_seeds: int = 17, tau_seeds: int = 33):
        self.alpha_seeds = alpha_seeds
        self.tau_seeds = tau_seeds

    def _fit_impl(self, data):
        return fit_cbp(data, alpha_seeds=self.alpha_seeds, tau_seeds=self.tau_seeds)


class PluginCompromiseBestPredictor(_BaseAreaEstimator):
    """Compromise predictor with plugged-in variance components; only the
    mixing weight is tuned."""

    def __init__(self, alpha_seeds: int = 33):
        self.alpha_seeds = alpha_seeds

    def _fit_impl(self, data):
        return fit_plugin_cbp(data, alpha_seeds=self.alpha_seeds)


class MultiTauCompromiseBestPredictor(_BaseAreaEstimator):
    """Compromise predictor with separate variance components per family."""

    def __init__(self, alpha_seeds: int = 9, tau_seeds: int = 17):
        self.alpha_seeds = alpha_seeds
        self.tau_seeds = tau_seeds

    def _fit_impl(self, data):
        return fit_multitau_cbp(
            data, alpha_seeds=self.alpha_seeds, tau_seeds=self.tau_seeds
        )
