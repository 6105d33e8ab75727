"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` complex128 arrays. The functions here wrap LAPACK
with the numerical contracts the rest of the code relies on: a deterministic
phase convention for singular vectors, a stable base-2 log-determinant, and a
Cholesky solve for Hermitian positive definite systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ContractError, DecompositionError
from .validation import as_cmatrix, check_hermitian

EIG_CLAMP = 1e-15


@dataclass(frozen=True)
class SvdResult:
    """Economy-size SVD ``a = u @ diag(s) @ v.conj().T``."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.conj().T


def svd(a) -> SvdResult:
    """Economy SVD with each column of ``u`` rotated so its first nonzero entry is real and nonnegative.

    ``v`` receives the same rotation, so the product is unchanged.
    """
    a = as_cmatrix(a, "svd input")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(
            f"SVD did not converge for a {a.shape[0]}x{a.shape[1]} matrix"
        ) from exc
    v = vh.conj().T
    tol = 1e-12 * max(1.0, float(np.max(np.abs(u))))
    for k in range(u.shape[1]):
        nz = np.flatnonzero(np.abs(u[:, k]) > tol)
        if nz.size == 0:
            continue
        lead = u[nz[0], k]
        rot = np.conj(lead) / abs(lead)
        u[:, k] *= rot
        v[:, k] *= rot
    return SvdResult(u=u, s=s, v=v)


def frobenius_norm(a) -> float:
    a = np.asarray(a, dtype=np.complex128)
    return float(np.sqrt(np.sum(np.abs(a) ** 2)))


def log_det_hermitian_psd(a, tol: float = 1e-9) -> float:
    """Base-2 log-determinant of a Hermitian PSD matrix via its eigenvalues.

    Eigenvalues are clamped below at 1e-15 before the logarithm; anything more
    negative than ``-tol`` (relative to the largest magnitude) is rejected.
    """
    a = as_cmatrix(a, "log-det input")
    check_hermitian(a, "log-det input", tol)
    w = np.linalg.eigvalsh((a + a.conj().T) / 2)
    scale = max(1.0, float(np.max(np.abs(w))))
    if w.min() < -tol * scale:
        raise ContractError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3g})")
    return float(np.sum(np.log2(np.maximum(w, EIG_CLAMP))))


def solve_hermitian(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for Hermitian positive definite ``a``."""
    a = as_cmatrix(a, "system matrix")
    b = as_cmatrix(b, "right-hand side", allow_vector=True)
    check_hermitian(a, "system matrix")
    if a.shape[0] != b.shape[0]:
        raise ContractError(f"system matrix {a.shape} and right-hand side {b.shape} mismatch")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ContractError("system matrix is singular or indefinite") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def inv_sqrt_hermitian(a) -> np.ndarray:
    """``a^{-1/2}`` for Hermitian positive definite ``a``."""
    a = as_cmatrix(a, "matrix")
    check_hermitian(a, "matrix")
    w, q = np.linalg.eigh((a + a.conj().T) / 2)
    if w.min() <= EIG_CLAMP * max(1.0, float(w.max())):
        raise ContractError("matrix is singular; inverse square root undefined")
    return (q / np.sqrt(w)) @ q.conj().T


def blkdiag(*blocks) -> np.ndarray:
    return scipy.linalg.block_diag(*[np.asarray(b, dtype=np.complex128) for b in blocks])
