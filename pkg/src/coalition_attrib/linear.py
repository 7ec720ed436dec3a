"""Ordinary least squares with an intercept, solved by Householder QR."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_vector, check_features, feature_names_of
from .exceptions import InsufficientDataError, RankDeficiencyError, SchemaError

# |R_kk| below this fraction of max |R_ii| flags column k as dependent.
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    column_names: tuple = ()

    def predict(self, X):
        return predict_linear(self, X)


def fit_ols(X, y, column_names=None):
    """Least-squares fit of ``y ~ intercept + X @ coef``.

    Raises
    ------
    InsufficientDataError
        If there are not more rows than parameters.
    RankDeficiencyError
        If ``[1 | X]`` is not of full column rank; the error names the
        first column that is a combination of the ones before it.
    """
    if column_names is None:
        column_names = feature_names_of(X)
    X = as_matrix(X)
    y = as_vector(y, X.shape[0])
    n, p = X.shape
    if column_names is None:
        column_names = [f"x{j}" for j in range(p)]
    column_names = tuple(str(c) for c in column_names)
    if len(column_names) != p:
        raise SchemaError(f"{len(column_names)} column names for {p} columns")
    if n <= p + 1:
        raise InsufficientDataError(
            f"OLS with {p} predictors needs more than {p + 1} rows, got {n}"
        )

    design = np.hstack([np.ones((n, 1)), X])
    q, r = np.linalg.qr(design, mode="reduced")
    diag = np.abs(np.diag(r))
    small = np.flatnonzero(diag < RANK_RTOL * diag.max())
    if small.size:
        k = int(small[0])
        raise RankDeficiencyError("intercept" if k == 0 else column_names[k - 1])
    beta = solve_triangular(r, q.T @ y, lower=False)
    return LinearModel(float(beta[0]), beta[1:].copy(), column_names)


def predict_linear(model, X):
    X = as_matrix(X)
    if X.shape[1] != len(model.coefficients):
        raise SchemaError(
            f"X has {X.shape[1]} columns, model has {len(model.coefficients)} coefficients"
        )
    return model.intercept + X @ model.coefficients


class OLSRegression(RegressorMixin, BaseEstimator):
    """Linear regression with intercept.

    Attributes
    ----------
    intercept_ : float
    coef_ : ndarray of shape (n_features,)
    model_ : LinearModel
    """

    def fit(self, X, y):
        names = feature_names_of(X)
        self.model_ = fit_ols(X, y, names)
        self.intercept_ = self.model_.intercept
        self.coef_ = self.model_.coefficients
        self.n_features_in_ = len(self.coef_)
        if names is not None:
            self.feature_names_in_ = names
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict_linear(self.model_, check_features(self, X))
