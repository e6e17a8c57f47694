"""Input validation helpers.

scikit-learn's ``check_array`` rejects complex input, so channel data goes
through these instead.
"""

import numbers

import numpy as np

from .exceptions import InvalidArgumentError


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise InvalidArgumentError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise InvalidArgumentError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise InvalidArgumentError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_vector3(v, name="vector"):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be a finite 3-vector, got {v!r}")
    return arr


def check_complex_2d(X, name="X", n_features=None):
    """Return ``X`` as a 2-D complex128 array of shape (n_samples, n_features).

    A 1-D input is treated as a single sample.
    """
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains NaN or inf")
    if n_features is not None and arr.shape[1] != n_features:
        raise InvalidArgumentError(
            f"{name} has {arr.shape[1]} features, expected {n_features}"
        )
    return arr


def check_square(M, name="matrix"):
    arr = np.asarray(M)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains NaN or inf")
    return arr.astype(np.complex128, copy=False)
