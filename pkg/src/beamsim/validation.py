"""Input validation helpers shared by the estimators and the functional API."""

from __future__ import annotations

import numpy as np

from .exceptions import ContractError


def as_cmatrix(a, name: str = "matrix", *, allow_vector: bool = False) -> np.ndarray:
    """Return ``a`` as a finite complex128 array with at least one row and column.

    1-D input is promoted to a column when ``allow_vector`` is set.
    """
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim == 1 and allow_vector:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains NaN or Inf entries")
    return arr


def as_cvector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.complex128).reshape(-1)
    if arr.size == 0:
        raise ContractError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains NaN or Inf entries")
    return arr


def check_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.shape[0] != a.shape[1]:
        raise ContractError(f"{name} must be square, got {a.shape}")


def check_hermitian(a: np.ndarray, name: str = "matrix", tol: float = 1e-9) -> None:
    check_square(a, name)
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) > tol * scale:
        raise ContractError(f"{name} is not Hermitian within {tol:g}")


def check_unit_vector(v: np.ndarray, name: str = "vector", tol: float = 1e-9) -> None:
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > tol:
        raise ContractError(f"{name} must have unit norm, got {norm:.12g}")


def check_conformable(left: np.ndarray, right: np.ndarray, what: str) -> None:
    if left.shape[1] != right.shape[0]:
        raise ContractError(f"{what}: shapes {left.shape} and {right.shape} are not conformable")


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise ContractError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
