"""Small input-validation helpers used across the public API."""

import numpy as np

from .errors import ContractViolation


def as_float_array(x, name="array"):
    """Coerce to a float64 ndarray, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return arr


def check_vector(x, length, name="vector"):
    arr = as_float_array(x, name)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise ContractViolation(
            f"{name} must be a vector of length {length}, got shape {arr.shape}"
        )
    return arr


def check_matrix(x, shape, name="matrix"):
    arr = as_float_array(x, name)
    expected = tuple(shape)
    if arr.ndim != 2 or any(
        want is not None and got != want for got, want in zip(arr.shape, expected)
    ):
        raise ContractViolation(
            f"{name} must have shape {expected}, got {arr.shape}"
        )
    return arr


def check_trajectory(points, dof=None, name="trajectory"):
    """Validate a (T+1, d) joint-space trajectory.

    Requires at least 3 rows and every entry within [-pi, pi] (the network's
    bounded output range); returns the validated float64 array.
    """
    arr = as_float_array(points, name)
    if arr.ndim != 2:
        raise ContractViolation(f"{name} must be 2-D (rows x joints), got ndim={arr.ndim}")
    if arr.shape[0] < 3:
        raise ContractViolation(f"{name} needs at least 3 rows, got {arr.shape[0]}")
    if dof is not None and arr.shape[1] != dof:
        raise ContractViolation(
            f"{name} has {arr.shape[1]} joints, expected {dof}"
        )
    if np.any(np.abs(arr) > np.pi + 1e-12):
        raise ContractViolation(f"{name} has entries outside [-pi, pi]")
    return arr


def check_in_range(value, low, high, name="value"):
    if not (low <= value <= high):
        raise ContractViolation(f"{name} must lie in [{low}, {high}], got {value}")
    return value


def check_positive(value, name="value", strict=True):
    if strict and not value > 0:
        raise ContractViolation(f"{name} must be > 0, got {value}")
    if not strict and not value >= 0:
        raise ContractViolation(f"{name} must be >= 0, got {value}")
    return value
