"""Small input-validation helpers shared by the public functions."""

import numbers

import numpy as np

from .exceptions import DimensionMismatchError


def check_vector(x, n=None, name="x"):
    """Return ``x`` as a 1-D float64 array, optionally enforcing its length."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    elif arr.ndim != 1:
        arr = arr.reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise DimensionMismatchError(
            f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def check_scalar(value, name, *, min_val=None, include_min=True, max_val=None):
    """Validate a real scalar parameter and return it as ``float``."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if min_val is not None:
        if include_min and value < min_val:
            raise ValueError(f"{name} must be >= {min_val}, got {value}")
        if not include_min and value <= min_val:
            raise ValueError(f"{name} must be > {min_val}, got {value}")
    if max_val is not None and value > max_val:
        raise ValueError(f"{name} must be <= {max_val}, got {value}")
    return value


def check_shape(shape, n, name="shape"):
    """Validate an image shape ``(H, W)`` (or ``(n,)``) against a length."""
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ValueError(f"{name} entries must be positive, got {shape}")
    if int(np.prod(shape)) != n:
        raise DimensionMismatchError(
            f"{name} {shape} has {int(np.prod(shape))} pixels, expected {n}")
    return shape
