"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InsufficientDataError, SchemaError, ValidationError


def feature_names_of(X):
    columns = getattr(X, "columns", None)
    if columns is None:
        return None
    return np.asarray([str(c) for c in columns], dtype=object)


def as_matrix(X, name="X"):
    """Finite float64 2-D array with at least one row."""
    try:
        arr = check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=0)
    except ValueError as exc:
        raise ValidationError(f"{name}: {exc}") from None
    if arr.shape[0] < 1:
        raise InsufficientDataError(f"{name} has no rows")
    return arr


def as_vector(y, n_rows, name="y"):
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] != n_rows:
        raise SchemaError(f"{name} has {arr.shape[0]} entries but X has {n_rows} rows")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_features(estimator, X):
    """Validate ``X`` against the schema recorded at fit time."""
    names = feature_names_of(X)
    arr = as_matrix(X)
    expected = estimator.n_features_in_
    if arr.shape[1] != expected:
        raise SchemaError(
            f"X has {arr.shape[1]} features, but {type(estimator).__name__} "
            f"was fitted with {expected}"
        )
    fitted_names = getattr(estimator, "feature_names_in_", None)
    if names is not None and fitted_names is not None and list(names) != list(fitted_names):
        raise SchemaError(
            f"column names {list(names)} do not match fitted columns {list(fitted_names)}"
        )
    return arr
