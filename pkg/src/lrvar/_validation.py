"""Input validation helpers used by estimators and module-level functions."""

import numpy as np

from .exceptions import SampleTooSmall


def as_float_array(x, name="array"):
    a = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must contain only finite values")
    return a


def check_matrix(m, name="matrix"):
    a = as_float_array(m, name)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {a.shape}")
    return a


def check_square_matrix(m, name="matrix"):
    a = check_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def check_trajectory(x, min_steps=2, name="trajectory"):
    """Validate a trajectory laid out as (n_steps, dimension) rows-as-time."""
    a = as_float_array(x, name)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if a.shape[0] < min_steps:
        raise SampleTooSmall(
            f"{name} has {a.shape[0]} time steps; at least {min_steps} are required"
        )
    return a


def check_pairs(z, y):
    """Validate explicit (regressor, target) rows; shapes must match."""
    zz = check_matrix(z, "regressors")
    yy = check_matrix(y, "targets")
    if zz.shape != yy.shape:
        raise ValueError(
            f"regressors and targets must share a shape, got {zz.shape} and {yy.shape}"
        )
    if zz.shape[0] < 1:
        raise SampleTooSmall("at least one regressor/target pair is required")
    return zz, yy
