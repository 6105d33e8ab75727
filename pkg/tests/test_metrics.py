import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamsim.channel import SystemDims
from beamsim.exceptions import ContractError, SingularCombinerError
from beamsim.metrics import (
    LinkBudget,
    chordal_distance,
    euclidean_objective,
    flop_estimate,
    mutual_information,
    spectral_efficiency,
)
from beamsim.precoder import FullDigitalSolution, HybridSolution, svd_precoder

from conftest import crandn

REF_DIMS = SystemDims(64, 32, 16, 8, 8)


class TestLinkBudget:
    def test_from_db(self):
        b = LinkBudget.from_snr_db(10.0, sigma_n2=0.5)
        assert b.rho == pytest.approx(5.0)
        assert b.snr_db == pytest.approx(10.0, abs=1e-9)

    @pytest.mark.parametrize("rho,sigma", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_positive(self, rho, sigma):
        with pytest.raises(ContractError):
            LinkBudget(rho, sigma)


class TestSpectralEfficiency:
    def test_scalar_shannon(self):
        g = 0.7 - 0.2j
        sol = FullDigitalSolution(np.ones((1, 1)), np.ones((1, 1)), np.ones(1))
        b = LinkBudget(3.0, 0.5)
        assert spectral_efficiency([[g]], sol, b) == pytest.approx(np.log2(1 + 3.0 * abs(g) ** 2 / 0.5))

    def test_vanishing_power(self, rng):
        h = crandn(rng, 4, 4)
        sol = svd_precoder(h, 2)
        vals = [spectral_efficiency(h, sol, LinkBudget(r)) for r in (1e-2, 1e-4, 1e-8)]
        assert vals[0] > vals[1] > vals[2] >= 0
        assert vals[2] < 1e-6

    def test_monotone_in_rho(self, ref_channel):
        sol = svd_precoder(ref_channel.h, 8)
        vals = [spectral_efficiency(ref_channel.h, sol, LinkBudget.from_snr_db(s)) for s in range(-40, 21, 5)]
        assert np.all(np.diff(vals) >= 0)

    def test_svd_closed_form(self, rng):
        h = crandn(rng, 6, 5)
        sol = svd_precoder(h, 3)
        s = np.linalg.svd(h, compute_uv=False)[:3]
        expected = np.sum(np.log2(1 + 2.0 / 3 * s**2))
        assert spectral_efficiency(h, sol, LinkBudget(2.0)) == pytest.approx(expected, abs=1e-9)

    def test_invariant_to_combiner_basis(self, rng):
        # any invertible right factor on W_BB leaves the rate unchanged
        h = crandn(rng, 6, 6)
        sol = svd_precoder(h, 3)
        w_rf = np.eye(6)
        mixed = HybridSolution(np.eye(6), sol.f_opt, w_rf, sol.w_opt @ (np.eye(3) + 0.3 * crandn(rng, 3, 3)))
        b = LinkBudget(1.5)
        assert spectral_efficiency(h, mixed, b) == pytest.approx(spectral_efficiency(h, sol, b), abs=1e-9)

    def test_singular_combiner(self, rng):
        h = crandn(rng, 4, 4)
        w = np.zeros((4, 2), dtype=complex)
        w[:, 0] = w[:, 1] = 0.5
        sol = FullDigitalSolution(np.eye(4)[:, :2], w, np.ones(2))
        with pytest.raises(SingularCombinerError):
            spectral_efficiency(h, sol, LinkBudget(1.0))


class TestMutualInformation:
    def test_zero_channel(self):
        assert mutual_information(np.zeros((3, 4)), np.eye(4), np.eye(4)[:, :2], LinkBudget(1.0), 2) == pytest.approx(0)

    def test_optimal_unconstrained(self, rng):
        h = crandn(rng, 5, 6)
        sol = svd_precoder(h, 3)
        s = np.linalg.svd(h, compute_uv=False)[:3]
        b = LinkBudget(2.0, 0.5)
        expected = np.sum(np.log2(1 + 2.0 * s**2 / (3 * 0.5)))
        assert mutual_information(h, np.eye(6), sol.f_opt, b, 3) == pytest.approx(expected, abs=1e-9)

    def test_equals_se_with_matched_combiner(self, rng):
        h = crandn(rng, 5, 5)
        sol = svd_precoder(h, 2)
        b = LinkBudget(1.3)
        assert mutual_information(h, np.eye(5), sol.f_opt, b, 2) == pytest.approx(spectral_efficiency(h, sol, b), abs=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 4))
    def test_unitary_invariance(self, seed, n_s):
        rng = np.random.default_rng(seed)
        h = crandn(rng, 6, 8)
        f_rf = crandn(rng, 8, 5)
        f_bb = crandn(rng, 5, n_s)
        u = np.linalg.qr(crandn(rng, n_s, n_s))[0]
        b = LinkBudget(0.7)
        assert mutual_information(h, f_rf, f_bb @ u, b, n_s) == pytest.approx(
            mutual_information(h, f_rf, f_bb, b, n_s), abs=1e-9
        )


class TestObjectiveAndDistance:
    def test_objective(self, rng):
        f_rf = crandn(rng, 8, 3)
        f_bb = crandn(rng, 3, 2)
        assert euclidean_objective(f_rf @ f_bb, f_rf, f_bb) == pytest.approx(0, abs=1e-12)
        f_opt = crandn(rng, 8, 2)
        assert euclidean_objective(f_opt, f_rf, np.zeros((3, 2))) == pytest.approx(np.linalg.norm(f_opt))

    def test_chordal(self, rng):
        a = crandn(rng, 6)
        a /= np.linalg.norm(a)
        assert chordal_distance(a, a) == pytest.approx(0, abs=1e-7)
        assert chordal_distance(a, np.exp(1.2j) * a) == pytest.approx(0, abs=1e-7)
        assert chordal_distance([1, 0], [0, 1]) == pytest.approx(1)
        with pytest.raises(ContractError):
            chordal_distance([1, 1], [1, 0])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0, 2 * np.pi))
    def test_chordal_symmetric_phase_invariant(self, seed, phase):
        rng = np.random.default_rng(seed)
        a, b = crandn(rng, 5), crandn(rng, 5)
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        d = chordal_distance(a, b)
        assert 0 <= d <= 1
        assert chordal_distance(b, a) == pytest.approx(d, abs=1e-12)
        assert chordal_distance(a, np.exp(1j * phase) * b) == pytest.approx(d, abs=1e-7)


class TestFlops:
    def test_reference_counts(self):
        omp = flop_estimate("omp", REF_DIMS, 4, 2, 7)
        hyp = flop_estimate("hyp_sld", REF_DIMS, 4, 2, 7)
        assert omp.phases == {"f_opt": 64**2 * 32 + 32**3, "analog": 128 * 64 * 16 * 8, "digital": 16**2 * 64 * 24}
        assert omp.total == 1605632
        assert hyp.phases == {"f_opt": 0, "analog": 128 * 64 * 2, "digital": 4 * 8}
        assert hyp.total == 16416
        assert hyp.reduction_vs_baseline == 1 - 16416 / 1605632
        assert omp.reduction_vs_baseline == 0

    def test_doubling_bits(self):
        a = flop_estimate("hyp_sld", REF_DIMS, 4, 2, 7)
        b = flop_estimate("hyp_sld", REF_DIMS, 4, 2, 8)
        assert b.phases["analog"] == 2 * a.phases["analog"]
        assert flop_estimate("omp", REF_DIMS, 4, 2, 8).phases["analog"] == 2 * flop_estimate("omp", REF_DIMS, 4, 2, 7).phases["analog"]
        # analog terms dominate at large b, so the reduction settles
        r = [flop_estimate("hyp_sld", REF_DIMS, 4, 2, bits).reduction_vs_baseline for bits in (14, 15, 16)]
        assert abs(r[2] - r[1]) < abs(r[1] - r[0]) + 1e-12

    def test_degenerate_inputs_stay_in_range(self):
        dims = SystemDims(4, 4, 4, 4, 4)
        rep = flop_estimate("hyp_sld", dims, 1, 64, 1)
        assert 0 <= rep.reduction_vs_baseline <= 1

    def test_unknown_scheme(self):
        with pytest.raises(ContractError):
            flop_estimate("svd", REF_DIMS, 4, 2, 7)
