"""Input checks shared by the numerical routines and the estimators."""

import numpy as np


class InvalidInputError(ValueError):
    """Raised for non-finite or otherwise unusable numerical input."""


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


def check_matrix(X, name="X", dtype=complex):
    """Return ``X`` as a finite 2-D array of ``dtype``.

    Raises
    ------
    DimensionError
        If ``X`` is not two-dimensional or has an empty axis.
    InvalidInputError
        If any entry is NaN or infinite.
    """
    X = np.asarray(X, dtype=dtype)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return X


def check_vector(x, length=None, name="x", dtype=complex):
    x = np.asarray(x, dtype=dtype)
    if x.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {x.shape}")
    if length is not None and x.shape[0] != length:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {length}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return x


def check_positive(value, name):
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a positive finite number, got {value}")
    return value
