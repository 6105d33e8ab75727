"""Hybrid and fully digital precoder design.

Three designers share one output shape:

* :func:`svd_precoder` - unconstrained fully digital baseline from the channel SVD.
* :func:`omp_hybrid` - orthogonal matching pursuit over the quantized codebook.
* :func:`hyp_sld` - per-lobe codeword selection steered by the path responses,
  followed by a block-diagonal digital stage from per-lobe SVDs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .codebook import QuantizedCodebook
from .exceptions import ContractError, InfeasibleCodebookError
from .linalg import blkdiag, frobenius_norm, svd
from .validation import as_cmatrix, check_conformable, check_positive_int

log = logging.getLogger(__name__)

LS_RIDGE = 1e-12


def _argmax_lowest(x: np.ndarray, rtol: float = 1e-12) -> int:
    """Index of the maximum; values within ``rtol`` of it count as ties and go to the lowest index."""
    top = float(np.max(x))
    return int(np.flatnonzero(x >= top - rtol * max(abs(top), 1e-300))[0])


@dataclass(frozen=True)
class LobeBlock:
    """Where one lobe lives inside the hybrid matrices."""

    lobe_index: int
    rf_cols: range
    streams: range


@dataclass(frozen=True)
class HybridSolution:
    f_rf: np.ndarray
    f_bb: np.ndarray
    w_rf: np.ndarray
    w_bb: np.ndarray
    lobe_blocks: tuple[LobeBlock, ...] = ()
    selected_t: tuple[int, ...] = ()
    selected_r: tuple[int, ...] = ()
    w_bb_blocks: np.ndarray | None = None
    block_svds: tuple = ()
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def f_t(self) -> np.ndarray:
        return self.f_rf @ self.f_bb

    @property
    def w_t(self) -> np.ndarray:
        return self.w_rf @ self.w_bb

    @property
    def n_streams(self) -> int:
        return self.f_bb.shape[1]


@dataclass(frozen=True)
class FullDigitalSolution:
    f_opt: np.ndarray
    w_opt: np.ndarray
    singular_values: np.ndarray

    @property
    def f_t(self) -> np.ndarray:
        return self.f_opt

    @property
    def w_t(self) -> np.ndarray:
        return self.w_opt

    @property
    def n_streams(self) -> int:
        return self.f_opt.shape[1]


def svd_precoder(h, n_s: int) -> FullDigitalSolution:
    """First ``n_s`` right/left singular vectors with equal power per stream."""
    h = as_cmatrix(h, "channel")
    n_s = check_positive_int(n_s, "n_s")
    if n_s > min(h.shape):
        raise ContractError(f"n_s={n_s} exceeds channel dimensions {h.shape}")
    dec = svd(h)
    return FullDigitalSolution(dec.v[:, :n_s].copy(), dec.u[:, :n_s].copy(), dec.s[:n_s].copy())


def normalize_power(f_rf, f_bb, n_s: int) -> np.ndarray:
    """Rescale ``f_bb`` so that ``||f_rf f_bb||_F^2 == n_s``."""
    f_bb = np.asarray(f_bb, dtype=np.complex128)
    norm = frobenius_norm(np.asarray(f_rf) @ f_bb)
    if norm == 0.0:
        raise ContractError("cannot normalize a zero precoder")
    return np.sqrt(n_s) * f_bb / norm


def orthonormalize_combiner(w_rf, w_bb) -> np.ndarray:
    """Return ``w_bb @ (W_T^H W_T)^{-1/2}`` so that the total combiner has orthonormal columns.

    The spectral efficiency is unchanged (the noise covariance term absorbs
    any invertible right factor); the point is white post-combining noise
    for the detector.
    """
    w_t = w_rf @ w_bb
    # work from the SVD of W_T itself; forming W_T^H W_T would square its condition number
    _, s, vh = np.linalg.svd(w_t, full_matrices=False)
    if s[-1] <= 1e-15 * max(s[0], 1e-300):
        raise ContractError("combiner columns are linearly dependent; cannot orthonormalize")
    return w_bb @ ((vh.conj().T / s) @ vh)


def select_lobe_codewords(
    cb: QuantizedCodebook,
    lobe: int,
    reference: np.ndarray,
    q: int,
    *,
    exclude_keys=(),
    dedup_aliases: bool = True,
) -> tuple[list[int], int]:
    """Greedy max-projection codeword selection inside one lobe's feasible set.

    Returns the chosen codebook columns and how many candidates were dropped
    as aliases (identical vectors) of an earlier choice. Ties go to the
    lowest column index.
    """
    cols = cb.feasible_set(lobe)
    cand = cb.vectors[:, cols]
    psi = cand.conj().T @ reference
    power = np.sum(np.abs(psi) ** 2, axis=1)
    keys = cb.alias_keys[cols]
    available = np.ones(cols.size, dtype=bool)
    dropped = 0
    if dedup_aliases and len(exclude_keys):
        blocked = np.isin(keys, np.asarray(list(exclude_keys)))
        dropped += int(np.count_nonzero(blocked))
        available[blocked] = False
    chosen: list[int] = []
    for _ in range(q):
        if not available.any():
            raise InfeasibleCodebookError(
                f"lobe {lobe}: feasible set has fewer than {q} usable codewords"
            )
        k = _argmax_lowest(np.where(available, power, -1.0))
        chosen.append(int(cols[k]))
        available[k] = False
        if dedup_aliases:
            same = available & (keys == keys[k])
            dropped += int(np.count_nonzero(same))
            available[same] = False
    return chosen, dropped


def _analog_stage(
    cb: QuantizedCodebook, ch: ChannelRealization, responses: np.ndarray, dedup_aliases: bool
) -> tuple[list[int], list[range], int]:
    selected: list[int] = []
    ranges: list[range] = []
    dropped = 0
    for lobe in ch.lobes:
        ref = responses[:, ch.lobe_columns(lobe.index)]
        keys = cb.alias_keys[selected] if selected else ()
        picks, d = select_lobe_codewords(
            cb, lobe.index, ref, lobe.num_subpaths, exclude_keys=keys, dedup_aliases=dedup_aliases
        )
        ranges.append(range(len(selected), len(selected) + len(picks)))
        selected.extend(picks)
        dropped += d
    return selected, ranges, dropped


def _pick_streams(block_svds, n_s: int) -> list[list[int]]:
    """Global top-``n_s`` singular values across blocks; per-block local indices."""
    entries = [(-float(s), b, k) for b, (_, s, _) in enumerate(block_svds) for k, s in enumerate(s)]
    entries.sort()
    keep = [[] for _ in block_svds]
    for _, b, k in entries[:n_s]:
        keep[b].append(k)
    return [sorted(k) for k in keep]


def hyp_sld(
    ch: ChannelRealization,
    cb_t: QuantizedCodebook,
    cb_r: QuantizedCodebook,
    n_s: int | None = None,
    *,
    orthonormalize: bool = True,
    dedup_aliases: bool = True,
) -> HybridSolution:
    """Spatial-lobes-division hybrid precoder and combiner.

    Uses exactly ``sum(Q_i)`` RF chains per side regardless of how many the
    hardware offers. With ``n_s`` below the path count, the streams with the
    largest per-block singular values are kept.
    """
    n_paths = len(ch.paths)
    n_s = n_paths if n_s is None else check_positive_int(n_s, "n_s")
    if n_s > n_paths:
        raise ContractError(f"n_s={n_s} exceeds the number of paths {n_paths}")

    sel_t, rf_ranges, drop_t = _analog_stage(cb_t, ch, ch.a_t, dedup_aliases)
    sel_r, rf_ranges_r, drop_r = _analog_stage(cb_r, ch, ch.a_r, dedup_aliases)
    assert rf_ranges == rf_ranges_r
    f_rf = cb_t.vectors[:, sel_t]
    w_rf = cb_r.vectors[:, sel_r]

    h_eq = w_rf.conj().T @ ch.h @ f_rf
    block_svds = []
    for rows in rf_ranges:
        blk = h_eq[rows.start : rows.stop, rows.start : rows.stop]
        dec = svd(blk)
        block_svds.append((dec.u, dec.s, dec.v))

    keep = _pick_streams(block_svds, n_s)
    f_blocks, w_blocks, blocks = [], [], []
    stream = 0
    for lobe, rows, (u, _, v), k in zip(ch.lobes, rf_ranges, block_svds, keep):
        f_blocks.append(v[:, k])
        w_blocks.append(u[:, k])
        blocks.append(LobeBlock(lobe.index, rows, range(stream, stream + len(k))))
        stream += len(k)
    f_bb = blkdiag(*f_blocks)
    w_bb_raw = blkdiag(*w_blocks)
    f_bb = normalize_power(f_rf, f_bb, n_s)
    w_bb = orthonormalize_combiner(w_rf, w_bb_raw) if orthonormalize else w_bb_raw
    return HybridSolution(
        f_rf=f_rf,
        f_bb=f_bb,
        w_rf=w_rf,
        w_bb=w_bb,
        lobe_blocks=tuple(blocks),
        selected_t=tuple(sel_t),
        selected_r=tuple(sel_r),
        w_bb_blocks=w_bb_raw,
        block_svds=tuple(block_svds),
        diagnostics={"aliases_dropped_t": drop_t, "aliases_dropped_r": drop_r},
    )


def omp_precoder(h, f_opt, cb: QuantizedCodebook, n_rf: int, n_s: int | None = None, *, return_info: bool = False):
    """Residual OMP approximation of ``f_opt`` by ``n_rf`` codebook columns.

    ``h`` only fixes the conformable dimension. ``f_bb`` is the least-squares
    fit to ``f_opt``; when ``n_s`` is given it is scaled to
    ``||f_rf f_bb||_F^2 == n_s`` (combiners pass ``None``).
    """
    h = as_cmatrix(h, "channel")
    f_opt = as_cmatrix(f_opt, "reference precoder")
    n_rf = check_positive_int(n_rf, "n_rf")
    if n_rf > cb.size:
        raise ContractError(f"n_rf={n_rf} exceeds codebook size {cb.size}")
    if f_opt.shape[0] != cb.vectors.shape[0]:
        raise ContractError("codebook and reference precoder dimensions differ")
    if f_opt.shape[0] not in h.shape:
        raise ContractError(f"reference precoder with {f_opt.shape[0]} rows does not fit channel {h.shape}")
    selected: list[int] = []
    regularized = 0
    residual = f_opt.copy()
    f_bb = None
    for _ in range(n_rf):
        psi = cb.vectors.conj().T @ residual
        selected.append(_argmax_lowest(np.sum(np.abs(psi) ** 2, axis=1)))
        f_rf = cb.vectors[:, selected]
        gram = f_rf.conj().T @ f_rf
        if np.linalg.matrix_rank(gram) < gram.shape[0]:
            gram = gram + LS_RIDGE * np.eye(gram.shape[0])
            regularized += 1
            log.debug("OMP gram matrix rank-deficient; ridge %g applied", LS_RIDGE)
        f_bb = np.linalg.solve(gram, f_rf.conj().T @ f_opt)
        res = f_opt - f_rf @ f_bb
        rnorm = frobenius_norm(res)
        if rnorm == 0.0:
            residual = res
        else:
            residual = res / rnorm
    f_rf = cb.vectors[:, selected]
    if n_s is not None:
        f_bb = normalize_power(f_rf, f_bb, n_s)
    if return_info:
        return f_rf, f_bb, {"selected": selected, "regularized": regularized}
    return f_rf, f_bb


def omp_hybrid(
    h,
    n_s: int,
    cb_t: QuantizedCodebook,
    cb_r: QuantizedCodebook,
    n_rf_t: int,
    n_rf_r: int,
    *,
    orthonormalize: bool = True,
) -> HybridSolution:
    """OMP precoder and plain least-squares OMP combiner around the SVD reference."""
    h = as_cmatrix(h, "channel")
    if n_s > n_rf_t or n_s > n_rf_r:
        raise ContractError(f"OMP needs at least n_s={n_s} RF chains per side")
    ref = svd_precoder(h, n_s)
    f_rf, f_bb, info_t = omp_precoder(h, ref.f_opt, cb_t, n_rf_t, n_s, return_info=True)
    w_rf, w_bb, info_r = omp_precoder(h, ref.w_opt, cb_r, n_rf_r, None, return_info=True)
    if orthonormalize:
        w_bb = orthonormalize_combiner(w_rf, w_bb)
    return HybridSolution(
        f_rf=f_rf,
        f_bb=f_bb,
        w_rf=w_rf,
        w_bb=w_bb,
        selected_t=tuple(info_t["selected"]),
        selected_r=tuple(info_r["selected"]),
        diagnostics={"regularized_t": info_t["regularized"], "regularized_r": info_r["regularized"]},
    )


def effective_channel(w_rf, h, f_rf, lobe_blocks):
    """``W_RF^H H F_RF``, its per-lobe diagonal blocks, and the off-block energy fraction."""
    w_rf = as_cmatrix(w_rf, "combiner")
    h = as_cmatrix(h, "channel")
    f_rf = as_cmatrix(f_rf, "precoder")
    check_conformable(w_rf.conj().T, h, "effective channel")
    check_conformable(h, f_rf, "effective channel")
    h_eq = w_rf.conj().T @ h @ f_rf
    if not lobe_blocks:
        return h_eq, [h_eq], 0.0
    diag_blocks = [h_eq[b.rf_cols.start : b.rf_cols.stop, b.rf_cols.start : b.rf_cols.stop] for b in lobe_blocks]
    total = frobenius_norm(h_eq) ** 2
    if total == 0.0:
        return h_eq, diag_blocks, 0.0
    off = h_eq - blkdiag(*diag_blocks)
    return h_eq, diag_blocks, frobenius_norm(off) ** 2 / total
