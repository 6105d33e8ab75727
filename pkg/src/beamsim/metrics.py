"""Link-quality metrics and arithmetic-complexity estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import SystemDims
from .exceptions import ContractError, SingularCombinerError
from .linalg import frobenius_norm, log_det_hermitian_psd
from .validation import as_cmatrix, as_cvector, check_unit_vector


@dataclass(frozen=True)
class LinkBudget:
    """Average received power ``rho`` and noise variance, both linear."""

    rho: float
    sigma_n2: float = 1.0

    def __post_init__(self):
        if not (self.rho > 0 and self.sigma_n2 > 0):
            raise ContractError("rho and sigma_n2 must be positive")

    @classmethod
    def from_snr_db(cls, snr_db: float, sigma_n2: float = 1.0) -> "LinkBudget":
        return cls(rho=sigma_n2 * 10.0 ** (snr_db / 10.0), sigma_n2=sigma_n2)

    @property
    def snr_db(self) -> float:
        return 10.0 * np.log10(self.rho / self.sigma_n2)


def spectral_efficiency(h, sol, budget: LinkBudget, n_s: int | None = None) -> float:
    """Achievable rate of a precoder/combiner pair under Gaussian signalling.

    ``sol`` is anything with ``f_t`` and ``w_t`` (hybrid or fully digital).
    The noise covariance ``sigma^2 W_T^H W_T`` is Cholesky-factored so the
    determinant argument stays Hermitian.
    """
    h = as_cmatrix(h, "channel")
    f_t = as_cmatrix(sol.f_t, "precoder")
    w_t = as_cmatrix(sol.w_t, "combiner")
    n_s = f_t.shape[1] if n_s is None else n_s
    r_n = budget.sigma_n2 * (w_t.conj().T @ w_t)
    try:
        chol = scipy.linalg.cholesky(r_n, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularCombinerError(
            f"noise covariance of the {w_t.shape[0]}x{w_t.shape[1]} combiner is singular"
        ) from exc
    g = scipy.linalg.solve_triangular(chol, w_t.conj().T @ h @ f_t, lower=True, check_finite=False)
    m = np.eye(g.shape[0]) + (budget.rho / n_s) * (g @ g.conj().T)
    return log_det_hermitian_psd((m + m.conj().T) / 2)


def mutual_information(h, f_rf, f_bb, budget: LinkBudget, n_s: int) -> float:
    h = as_cmatrix(h, "channel")
    f_t = as_cmatrix(f_rf, "analog precoder") @ as_cmatrix(f_bb, "digital precoder")
    g = h @ f_t
    m = np.eye(h.shape[0]) + budget.rho / (n_s * budget.sigma_n2) * (g @ g.conj().T)
    return log_det_hermitian_psd((m + m.conj().T) / 2)


def euclidean_objective(f_opt, f_rf, f_bb) -> float:
    return frobenius_norm(np.asarray(f_opt) - np.asarray(f_rf) @ np.asarray(f_bb))


def chordal_distance(a, b) -> float:
    """``sqrt(1 - |a^H b|^2)`` between unit vectors."""
    a = as_cvector(a, "a")
    b = as_cvector(b, "b")
    check_unit_vector(a, "a")
    check_unit_vector(b, "b")
    overlap = min(1.0, abs(np.vdot(a, b)) ** 2)
    return float(np.sqrt(1.0 - overlap))


@dataclass(frozen=True)
class ComplexityReport:
    """Normalized operation counts (all hidden constants set to one)."""

    scheme: str
    phases: dict[str, float]
    total: float
    reduction_vs_baseline: float


def _omp_phases(dims: SystemDims, b: int) -> dict[str, float]:
    n_t, n_r, n_rf, n_s = dims.n_t, dims.n_r, dims.n_rf_t, dims.n_s
    return {
        "f_opt": float(n_t**2 * n_r + n_r**3),
        "analog": float(2**b * n_t * n_rf * n_s),
        "digital": float(n_rf**2 * n_t * (n_rf + n_s)),
    }


def _hyp_sld_phases(dims: SystemDims, p: int, q: int, b: int) -> dict[str, float]:
    return {
        "f_opt": 0.0,
        "analog": float(2**b * dims.n_t * q),
        "digital": float(p * q**3),
    }


def flop_estimate(scheme: str, dims: SystemDims, p: int, q: int, b: int) -> ComplexityReport:
    """Transmitter-side operation counts for ``omp`` or ``hyp_sld``.

    The reduction is measured against OMP at the same dimensions.
    """
    baseline = sum(_omp_phases(dims, b).values())
    if scheme == "omp":
        phases = _omp_phases(dims, b)
    elif scheme == "hyp_sld":
        phases = _hyp_sld_phases(dims, p, q, b)
    else:
        raise ContractError(f"unknown scheme {scheme!r}")
    total = sum(phases.values())
    reduction = min(1.0, max(0.0, 1.0 - total / baseline))
    return ComplexityReport(scheme, phases, total, reduction)
