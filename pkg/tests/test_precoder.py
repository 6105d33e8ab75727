import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamsim.channel import (
    PathComponent,
    SystemDims,
    UlaGeometry,
    assemble_channel,
    default_lobe_layout,
    generate_channel,
    steering_matrix,
)
from beamsim.codebook import build_codebook
from beamsim.exceptions import ContractError, InfeasibleCodebookError
from beamsim.linalg import blkdiag
from beamsim.metrics import LinkBudget, euclidean_objective, spectral_efficiency
from beamsim.precoder import (
    effective_channel,
    hyp_sld,
    normalize_power,
    omp_hybrid,
    omp_precoder,
    select_lobe_codewords,
    svd_precoder,
)
from beamsim.schemes import design, partitioned_codebooks

from conftest import crandn

GRID = 2 * np.pi / 128


def _codebooks(ch, bits=7):
    return partitioned_codebooks(ch, bits)


def _waterfilling_capacity(h, rho, n_s):
    g = np.linalg.svd(h, compute_uv=False)[:n_s] ** 2 * rho / n_s
    lo, hi = 0.0, 1e9
    for _ in range(200):
        mu = (lo + hi) / 2
        if np.maximum(mu - 1 / g, 0).sum() < n_s:
            lo = mu
        else:
            hi = mu
    return float(np.sum(np.log2(1 + g * np.maximum(lo - 1 / g, 0))))


class TestSvdPrecoder:
    def test_rank_one(self):
        a_t = steering_matrix(8, [0.3])[:, 0]
        a_r = steering_matrix(4, [1.1])[:, 0]
        sol = svd_precoder(5 * np.outer(a_r, a_t.conj()), 1)
        assert abs(np.vdot(sol.f_opt[:, 0], a_t)) == pytest.approx(1.0)
        assert abs(np.vdot(sol.w_opt[:, 0], a_r)) == pytest.approx(1.0)
        assert sol.singular_values[0] == pytest.approx(5.0)

    def test_identity(self):
        sol = svd_precoder(np.eye(2), 2)
        np.testing.assert_allclose(np.abs(sol.f_opt), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(np.abs(sol.w_opt), np.eye(2), atol=1e-12)

    def test_orthonormal_columns(self, rng):
        sol = svd_precoder(crandn(rng, 8, 8), 3)
        np.testing.assert_allclose(sol.f_opt.conj().T @ sol.f_opt, np.eye(3), atol=1e-9)
        assert np.linalg.norm(sol.f_t) ** 2 == pytest.approx(3)

    def test_too_many_streams(self, rng):
        with pytest.raises(ContractError):
            svd_precoder(crandn(rng, 3, 5), 4)


class TestNormalizePower:
    def test_postcondition_and_scale_invariance(self, rng):
        f_rf = crandn(rng, 16, 4)
        f_bb = crandn(rng, 4, 3)
        out = normalize_power(f_rf, f_bb, 3)
        assert np.linalg.norm(f_rf @ out) ** 2 == pytest.approx(3, abs=1e-12)
        np.testing.assert_allclose(normalize_power(f_rf, 7 * f_bb, 3), out, atol=1e-12)
        np.testing.assert_allclose(normalize_power(f_rf, out, 3), out, atol=1e-12)

    def test_zero(self):
        with pytest.raises(ContractError):
            normalize_power(np.ones((4, 2)), np.zeros((2, 2)), 2)


def _one_lobe_on_grid_channel(k=3):
    dims = SystemDims(64, 32, 1, 1, 1)
    lobes = default_lobe_layout(1, 1)
    return assemble_channel(dims, lobes, [PathComponent(1, k * GRID, k * GRID, 0.8 - 0.6j)])


class TestHypSldOracles:
    def test_single_path_on_grid(self):
        ch = _one_lobe_on_grid_channel()
        cb_t, cb_r = _codebooks(ch)
        sol = hyp_sld(ch, cb_t, cb_r)
        assert sol.selected_t == (3,) and sol.selected_r == (3,)
        np.testing.assert_allclose(sol.f_rf[:, 0], cb_t.vectors[:, 3])
        assert abs(sol.f_bb[0, 0]) == pytest.approx(np.sqrt(1) / np.linalg.norm(sol.f_rf))
        budget = LinkBudget.from_snr_db(0)
        ref = spectral_efficiency(ch.h, svd_precoder(ch.h, 1), budget)
        assert spectral_efficiency(ch.h, sol, budget) == pytest.approx(ref, abs=1e-6)

    def test_two_lobes_on_grid(self):
        dims = SystemDims(64, 32, 2, 2, 2)
        lobes = default_lobe_layout(2, 1)
        paths = [PathComponent(1, 5 * GRID, 5 * GRID, 1.0), PathComponent(2, 67 * GRID, 67 * GRID, 0.5j)]
        ch = assemble_channel(dims, lobes, paths)
        sol = hyp_sld(ch, *_codebooks(ch))
        assert sol.selected_t == (5, 67) and sol.selected_r == (5, 67)
        off = sol.f_bb - np.diag(np.diag(sol.f_bb))
        assert np.all(off == 0)

    def test_infeasible(self, ref_dims):
        ch = generate_channel(ref_dims, default_lobe_layout(4, 2), np.random.default_rng(1))
        cb_t, cb_r = _codebooks(ch, bits=2)
        with pytest.raises(InfeasibleCodebookError):
            hyp_sld(ch, cb_t, cb_r)

    def test_too_many_streams(self, ref_channel):
        with pytest.raises(ContractError):
            hyp_sld(ref_channel, *_codebooks(ref_channel), n_s=9)

    def test_tie_break_lowest_index(self):
        cb = build_codebook(UlaGeometry(8), 4).with_partition(default_lobe_layout(1, 1))
        # reference orthogonal to everything ties every score at zero
        chosen, _ = select_lobe_codewords(cb, 1, np.zeros((8, 1)), 2, dedup_aliases=False)
        feasible = cb.feasible_set(1)
        assert chosen == [int(feasible[0]), int(feasible[1])]


def _check_invariants(ch, sol, cb_t, cb_r):
    n_s = sol.n_streams
    lobes = {l.index: l for l in ch.lobes}
    # analog columns are feasible codewords of the owning lobe, never repeated within a lobe
    for block in sol.lobe_blocks:
        for side, cb in (("t", cb_t), ("r", cb_r)):
            sel = np.array(getattr(sol, f"selected_{side}"))[list(block.rf_cols)]
            assert set(sel) <= set(cb.feasible_set(block.lobe_index))
            assert len(set(sel)) == len(sel)
        assert len(block.rf_cols) == lobes[block.lobe_index].num_subpaths
    np.testing.assert_allclose(np.abs(sol.f_rf), 1 / np.sqrt(ch.dims.n_t), atol=1e-12)
    np.testing.assert_allclose(np.abs(sol.w_rf), 1 / np.sqrt(ch.dims.n_r), atol=1e-12)
    assert np.linalg.norm(sol.f_rf @ sol.f_bb) ** 2 == pytest.approx(n_s, abs=1e-9)
    w_t = sol.w_t
    np.testing.assert_allclose(w_t.conj().T @ w_t, np.eye(n_s), atol=1e-6)
    # block-diagonal digital stages
    mask = np.zeros(sol.f_bb.shape, dtype=bool)
    for block in sol.lobe_blocks:
        mask[block.rf_cols.start : block.rf_cols.stop, block.streams.start : block.streams.stop] = True
    assert np.all(sol.f_bb[~mask] == 0)
    assert np.all(sol.w_bb_blocks[~mask] == 0)
    # block SVDs reconstruct the diagonal blocks of the effective channel
    _, diag_blocks, _ = effective_channel(sol.w_rf, ch.h, sol.f_rf, sol.lobe_blocks)
    recon = blkdiag(*[(u * s) @ v.conj().T for u, s, v in sol.block_svds])
    np.testing.assert_allclose(recon, blkdiag(*diag_blocks), atol=1e-9)
    for u, _, v in sol.block_svds:
        np.testing.assert_allclose(v.conj().T @ v, np.eye(v.shape[1]), atol=1e-9)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(u.shape[1]), atol=1e-9)


class TestHypSldInvariants:
    def test_reference_config(self, ref_channel):
        cb_t, cb_r = _codebooks(ref_channel)
        sol = hyp_sld(ref_channel, cb_t, cb_r)
        assert sol.f_rf.shape == (64, 8) and sol.w_rf.shape == (32, 8)
        assert sol.n_streams == 8
        _check_invariants(ref_channel, sol, cb_t, cb_r)

    def test_scale_covariance(self, ref_channel):
        ch = ref_channel
        scaled = assemble_channel(ch.dims, ch.lobes, [
            PathComponent(p.lobe_index, p.aoa, p.aod, 3.7 * p.gain) for p in ch.paths
        ])
        a = hyp_sld(ch, *_codebooks(ch))
        b = hyp_sld(scaled, *_codebooks(scaled))
        assert a.selected_t == b.selected_t and a.selected_r == b.selected_r

    def test_fewer_streams_than_paths(self, ref_channel):
        cb_t, cb_r = _codebooks(ref_channel)
        sol = hyp_sld(ref_channel, cb_t, cb_r, n_s=3)
        assert sol.f_bb.shape == (8, 3)
        _check_invariants(ref_channel, sol, cb_t, cb_r)
        kept = sorted((s for u, sv, v in sol.block_svds for s in sv), reverse=True)[:3]
        used = [sol.block_svds[i][1][k] for i, b in enumerate(sol.lobe_blocks) for k in range(len(b.streams))]
        assert sorted(used, reverse=True) == pytest.approx(kept)

    def test_raw_combiner_kept(self, ref_channel):
        sol = hyp_sld(ref_channel, *_codebooks(ref_channel), orthonormalize=False)
        np.testing.assert_array_equal(sol.w_bb, sol.w_bb_blocks)

    @settings(max_examples=40, deadline=None)
    @given(
        p=st.integers(1, 4),
        q=st.lists(st.integers(1, 3), min_size=4, max_size=4),
        seed=st.integers(0, 2**31),
        n=st.sampled_from([16, 32]),
    )
    def test_random_configs(self, p, q, seed, n):
        qs = q[:p]
        dims = SystemDims(n, n, sum(qs), sum(qs), sum(qs))
        ch = generate_channel(dims, default_lobe_layout(p, qs), np.random.default_rng(seed))
        cb_t, cb_r = _codebooks(ch, bits=7)
        parts = list(cb_t.lobe_partition.values())
        flat = np.concatenate(parts)
        assert flat.size == np.unique(flat).size
        sol = hyp_sld(ch, cb_t, cb_r)
        _check_invariants(ch, sol, cb_t, cb_r)
        se = spectral_efficiency(ch.h, sol, LinkBudget(1.0))
        assert se <= _waterfilling_capacity(ch.h, 1.0, sum(qs)) + 1e-9


class TestOmp:
    def test_exact_codeword(self):
        cb = build_codebook(UlaGeometry(16), 6)
        f_opt = cb.vectors[:, [9]] * np.exp(0.4j)
        f_rf, f_bb, info = omp_precoder(np.zeros((4, 16)), f_opt, cb, 1, 1, return_info=True)
        assert info["selected"] == [int(np.flatnonzero(cb.alias_keys == cb.alias_keys[9])[0])]
        assert euclidean_objective(f_opt, f_rf, f_bb) == pytest.approx(0, abs=1e-12)
        assert f_bb[0, 0] == pytest.approx(np.exp(0.4j) * np.vdot(f_rf[:, 0], cb.vectors[:, 9]))

    def test_objective_non_increasing(self, ref_channel):
        cb = build_codebook(UlaGeometry(64), 7)
        f_opt = svd_precoder(ref_channel.h, 8).f_opt
        errs = [euclidean_objective(f_opt, *omp_precoder(ref_channel.h, f_opt, cb, n)) for n in (2, 4, 8, 16, 128)]
        assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:])), errs

    def test_full_codebook_regularizes(self, ref_channel):
        cb = build_codebook(UlaGeometry(64), 7)
        f_opt = svd_precoder(ref_channel.h, 8).f_opt
        f_rf, f_bb, info = omp_precoder(ref_channel.h, f_opt, cb, 128, 8, return_info=True)
        assert np.all(np.isfinite(f_bb))
        assert info["regularized"] > 0  # the codebook repeats columns
        assert np.linalg.norm(f_rf @ f_bb) ** 2 == pytest.approx(8)

    def test_errors(self, rng):
        cb = build_codebook(UlaGeometry(8), 3)
        with pytest.raises(ContractError):
            omp_precoder(np.zeros((4, 8)), crandn(rng, 8, 1), cb, 9)
        with pytest.raises(ContractError):
            omp_precoder(np.zeros((4, 4)), crandn(rng, 8, 1), cb, 2)

    def test_hybrid_needs_chains(self, ref_channel):
        cb_t = build_codebook(UlaGeometry(64), 7)
        cb_r = build_codebook(UlaGeometry(32), 7)
        with pytest.raises(ContractError):
            omp_hybrid(ref_channel.h, 3, cb_t, cb_r, 16, 2)
        sol = omp_hybrid(ref_channel.h, 8, cb_t, cb_r, 16, 8)
        np.testing.assert_allclose(sol.w_t.conj().T @ sol.w_t, np.eye(8), atol=1e-6)
        assert np.linalg.norm(sol.f_t) ** 2 == pytest.approx(8, abs=1e-9)

    @pytest.mark.xfail(strict=True, reason="b=7 quantization leaves OMP about 14% below SVD at these dimensions")
    def test_close_to_svd_reference_config(self, ref_dims):
        budget = LinkBudget.from_snr_db(0)
        svd_se, omp_se = [], []
        for t in range(200):
            ch = generate_channel(ref_dims, default_lobe_layout(4, 2), np.random.default_rng([11, t]))
            svd_se.append(spectral_efficiency(ch.h, design("svd", ch, 7).solution, budget))
            omp_se.append(spectral_efficiency(ch.h, design("omp", ch, 7).solution, budget))
        assert np.mean(omp_se) >= 0.95 * np.mean(svd_se)


def _offdiag_median(dims, trials=200, seed=3):
    vals = []
    for t in range(trials):
        ch = generate_channel(dims, default_lobe_layout(4, 2), np.random.default_rng([seed, t]))
        sol = hyp_sld(ch, *_codebooks(ch))
        vals.append(effective_channel(sol.w_rf, ch.h, sol.f_rf, sol.lobe_blocks)[2])
    return float(np.median(vals))


class TestEffectiveChannel:
    def test_single_lobe_no_leakage(self, rng):
        ch = generate_channel(SystemDims(32, 16, 2, 2, 2), default_lobe_layout(1, 2), rng)
        sol = hyp_sld(ch, *_codebooks(ch))
        h_eq, blocks, off = effective_channel(sol.w_rf, ch.h, sol.f_rf, sol.lobe_blocks)
        assert off == 0.0
        np.testing.assert_allclose(blocks[0], h_eq)

    def test_definition(self, ref_channel):
        sol = hyp_sld(ref_channel, *_codebooks(ref_channel))
        h_eq, blocks, off = effective_channel(sol.w_rf, ref_channel.h, sol.f_rf, sol.lobe_blocks)
        np.testing.assert_allclose(h_eq, sol.w_rf.conj().T @ ref_channel.h @ sol.f_rf)
        expected = np.linalg.norm(h_eq - blkdiag(*blocks)) ** 2 / np.linalg.norm(h_eq) ** 2
        assert off == pytest.approx(expected)

    def test_small_arrays_leak_more(self):
        assert _offdiag_median(SystemDims(8, 8, 8, 8, 8)) > _offdiag_median(SystemDims(64, 32, 16, 8, 8))

    def test_reference_config_measured_level(self):
        # measured oracle: front/back aliasing of the ULA couples lobes 1/3 and 2/4
        assert 0.25 < _offdiag_median(SystemDims(64, 32, 16, 8, 8)) < 0.45

    @pytest.mark.xfail(strict=True, reason="ULA sin-folding maps lobe pairs onto the same beams; measured median is about 0.35")
    def test_reference_config_below_tenth(self):
        assert _offdiag_median(SystemDims(64, 32, 16, 8, 8)) < 0.1
