"""scikit-learn style wrappers around the precoder designs.

``fit`` takes a :class:`ChannelRealization` (or, for the fully digital
baseline, a bare channel matrix) and stores the designed matrices in
trailing-underscore attributes. ``transform`` maps symbol vectors to antenna
signals and ``score`` returns the spectral efficiency on a channel.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .channel import ChannelRealization, UlaGeometry
from .codebook import build_codebook
from .exceptions import ContractError
from .metrics import LinkBudget, spectral_efficiency
from .precoder import hyp_sld, omp_hybrid, svd_precoder
from .validation import as_cmatrix, check_positive_int


def _channel_matrix(X) -> np.ndarray:
    if isinstance(X, ChannelRealization):
        return X.h
    return as_cmatrix(X, "channel")


def _require_realization(X, who: str) -> ChannelRealization:
    if not isinstance(X, ChannelRealization):
        raise ContractError(f"{who} needs a ChannelRealization (lobe structure), got {type(X).__name__}")
    return X


class _PrecoderMixin(TransformerMixin):
    def transform(self, X):
        """Precode symbols: ``X`` is ``n_streams`` long or ``n_streams x n_vectors``."""
        check_is_fitted(self, "solution_")
        s = np.asarray(X, dtype=np.complex128)
        if s.shape[0] != self.n_streams_:
            raise ContractError(f"expected {self.n_streams_} stream rows, got {s.shape[0]}")
        return self.solution_.f_t @ s

    def combine(self, Y):
        """Apply ``W_T^H`` to received antenna samples."""
        check_is_fitted(self, "solution_")
        return self.solution_.w_t.conj().T @ np.asarray(Y, dtype=np.complex128)

    def score(self, X, y=None, snr_db: float = 0.0):
        """Spectral efficiency (bits/s/Hz) of the fitted design on channel ``X``."""
        check_is_fitted(self, "solution_")
        return spectral_efficiency(_channel_matrix(X), self.solution_, LinkBudget.from_snr_db(snr_db))

    def _store(self, sol):
        self.solution_ = sol
        self.precoder_ = sol.f_t
        self.combiner_ = sol.w_t
        self.n_streams_ = sol.n_streams
        return self


class SvdPrecoder(_PrecoderMixin, BaseEstimator):
    """Fully digital SVD baseline."""

    def __init__(self, n_streams: int = 1):
        self.n_streams = n_streams

    def fit(self, X, y=None):
        h = _channel_matrix(X)
        self._store(svd_precoder(h, check_positive_int(self.n_streams, "n_streams")))
        self.singular_values_ = self.solution_.singular_values
        return self


class OmpPrecoder(_PrecoderMixin, BaseEstimator):
    """Spatially sparse OMP hybrid baseline over a ``bits``-bit codebook."""

    def __init__(self, n_streams: int = 1, n_rf_t: int = 1, n_rf_r: int = 1, bits: int = 7):
        self.n_streams = n_streams
        self.n_rf_t = n_rf_t
        self.n_rf_r = n_rf_r
        self.bits = bits

    def fit(self, X, y=None):
        h = _channel_matrix(X)
        n_r, n_t = h.shape
        cb_t = build_codebook(UlaGeometry(n_t), self.bits)
        cb_r = build_codebook(UlaGeometry(n_r), self.bits)
        sol = omp_hybrid(h, check_positive_int(self.n_streams, "n_streams"), cb_t, cb_r, self.n_rf_t, self.n_rf_r)
        self._store(sol)
        self.selected_t_ = sol.selected_t
        self.selected_r_ = sol.selected_r
        return self


class HypSldPrecoder(_PrecoderMixin, BaseEstimator):
    """Spatial-lobes-division hybrid precoder; ``n_streams=None`` keeps one stream per path."""

    def __init__(self, bits: int = 7, n_streams=None, orthonormalize_combiner: bool = True, dedup_aliases: bool = True):
        self.bits = bits
        self.n_streams = n_streams
        self.orthonormalize_combiner = orthonormalize_combiner
        self.dedup_aliases = dedup_aliases

    def fit(self, X, y=None):
        ch = _require_realization(X, type(self).__name__)
        cb_t = build_codebook(UlaGeometry(ch.dims.n_t), self.bits).with_partition(ch.lobes)
        cb_r = build_codebook(UlaGeometry(ch.dims.n_r), self.bits).with_partition(ch.lobes)
        sol = hyp_sld(
            ch,
            cb_t,
            cb_r,
            self.n_streams,
            orthonormalize=self.orthonormalize_combiner,
            dedup_aliases=self.dedup_aliases,
        )
        self._store(sol)
        self.lobe_blocks_ = sol.lobe_blocks
        self.n_rf_chains_ = sol.f_rf.shape[1]
        return self
