"""Baseband transmission chain: QPSK, precoded channel with AWGN, LMMSE, MRC.

Symbols are unit-power QPSK ``u``; the transmitted vector is ``s = u / sqrt(N_s)``
so that ``E[s s^H] = I / N_s``. The receiver divides by ``sqrt(rho / N_s)``
before detection, which makes the LMMSE regularizer ``sigma^2 N_s / rho``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import ContractError
from .linalg import solve_hermitian
from .metrics import LinkBudget
from .validation import as_cmatrix

_QPSK_SCALE = 1.0 / np.sqrt(2.0)


def qpsk_modulate(bits) -> np.ndarray:
    """Gray-mapped QPSK: first bit picks the imaginary sign, second the real sign.

    00 -> (+1+j)/sqrt2, 01 -> (-1+j)/sqrt2, 11 -> (-1-j)/sqrt2, 10 -> (+1-j)/sqrt2.
    """
    bits = np.asarray(bits, dtype=np.int8).reshape(-1)
    if bits.size % 2:
        raise ContractError(f"QPSK needs an even number of bits, got {bits.size}")
    b0 = bits[0::2]
    b1 = bits[1::2]
    return ((1 - 2 * b1) + 1j * (1 - 2 * b0)) * _QPSK_SCALE


def qpsk_demodulate(symbols) -> np.ndarray:
    """Hard quadrant decisions back to bits (inverse of :func:`qpsk_modulate`)."""
    symbols = np.asarray(symbols).reshape(-1)
    out = np.empty(2 * symbols.size, dtype=np.int8)
    out[0::2] = symbols.imag < 0
    out[1::2] = symbols.real < 0
    return out


@dataclass(frozen=True)
class StreamPlan:
    """Which stream slots carry which symbol.

    In ``multiplex`` mode every slot is its own symbol. In ``mrc`` mode each
    group of slots (one group per lobe with at least one stream) carries
    copies of a single symbol.
    """

    mode: str
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.mode not in ("multiplex", "mrc"):
            raise ContractError(f"unknown stream mode {self.mode!r}")
        slots = [s for g in self.groups for s in g]
        if sorted(slots) != list(range(len(slots))):
            raise ContractError("stream groups must partition 0..N_s-1")
        if any(len(g) == 0 for g in self.groups):
            raise ContractError("empty stream group")

    @property
    def n_slots(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def n_symbols(self) -> int:
        return len(self.groups) if self.mode == "mrc" else self.n_slots

    @classmethod
    def multiplex(cls, n_s: int) -> "StreamPlan":
        return cls("multiplex", tuple((k,) for k in range(n_s)))

    @classmethod
    def from_solution(cls, sol, mode: str = "mrc") -> "StreamPlan":
        if mode == "multiplex":
            return cls.multiplex(sol.n_streams)
        blocks = getattr(sol, "lobe_blocks", ())
        if not blocks:
            raise ContractError("MRC needs a solution with per-lobe stream blocks")
        return cls("mrc", tuple(tuple(b.streams) for b in blocks if len(b.streams)))


@dataclass(frozen=True)
class MrcWeights:
    w: np.ndarray
    plan: StreamPlan


def replicate_for_mrc(symbols, plan: StreamPlan) -> np.ndarray:
    """Copy lobe symbol ``i`` into each of its slots and scale by ``1/sqrt(N_s)``.

    ``symbols`` may be a length-P vector or a ``P x n_vectors`` array.
    """
    if plan.mode != "mrc":
        raise ContractError("replicate_for_mrc needs an mrc stream plan")
    symbols = np.asarray(symbols, dtype=np.complex128)
    squeeze = symbols.ndim == 1
    if squeeze:
        symbols = symbols[:, None]
    if symbols.shape[0] != plan.n_symbols:
        raise ContractError(f"expected {plan.n_symbols} symbols, got {symbols.shape[0]}")
    s = np.empty((plan.n_slots, symbols.shape[1]), dtype=np.complex128)
    for i, group in enumerate(plan.groups):
        s[list(group)] = symbols[i]
    s /= np.sqrt(plan.n_slots)
    return s[:, 0] if squeeze else s


def transmit(h, sol, s, budget: LinkBudget, rng: np.random.Generator) -> np.ndarray:
    """``y = sqrt(rho) W_T^H H F_T s + W_T^H n`` with ``n ~ CN(0, sigma^2 I)``."""
    h = as_cmatrix(h, "channel")
    s = np.asarray(s, dtype=np.complex128)
    squeeze = s.ndim == 1
    if squeeze:
        s = s[:, None]
    w_t = np.asarray(sol.w_t)
    noise = rng.standard_normal((h.shape[0], s.shape[1])) + 1j * rng.standard_normal((h.shape[0], s.shape[1]))
    noise *= np.sqrt(budget.sigma_n2 / 2.0)
    y = np.sqrt(budget.rho) * (w_t.conj().T @ h @ (np.asarray(sol.f_t) @ s)) + w_t.conj().T @ noise
    return y[:, 0] if squeeze else y


def effective_gain(h, sol) -> np.ndarray:
    """``W_T^H H F_T``: the end-to-end matrix seen by the detector."""
    return np.asarray(sol.w_t).conj().T @ np.asarray(h) @ np.asarray(sol.f_t)


def lmmse_demodulate(y, h_hat, sigma2: float, rho: float = 1.0) -> np.ndarray:
    """``(H^H H + sigma2/rho I)^{-1} H^H y / sqrt(rho)`` for ``y = sqrt(rho) H s + n``."""
    h_hat = as_cmatrix(h_hat, "effective channel")
    y = np.asarray(y, dtype=np.complex128)
    squeeze = y.ndim == 1
    if squeeze:
        y = y[:, None]
    gram = h_hat.conj().T @ h_hat + (sigma2 / rho) * np.eye(h_hat.shape[1])
    s_hat = solve_hermitian(gram, h_hat.conj().T @ y) / np.sqrt(rho)
    return s_hat[:, 0] if squeeze else s_hat


def _normalize_groups(raw: np.ndarray, plan: StreamPlan) -> np.ndarray:
    w = np.zeros_like(raw, dtype=float)
    for group in plan.groups:
        idx = list(group)
        total = raw[idx].sum(axis=0)
        if np.any(total <= 0):
            raise ContractError(f"all slots of stream group {group} have zero weight")
        w[idx] = raw[idx] / total
    return w


def mrc_weights(h_hat, sigma2: float, plan: StreamPlan) -> MrcWeights:
    """Per-slot pre-detection SNR ``||row of H_hat||^2 / sigma2``, normalized per lobe."""
    if plan.mode != "mrc":
        raise ContractError("mrc_weights needs an mrc stream plan")
    h_hat = as_cmatrix(h_hat, "effective channel")
    snr = np.sum(np.abs(h_hat) ** 2, axis=1) / sigma2
    return MrcWeights(_normalize_groups(snr, plan), plan)


def mrc_weights_instantaneous(s_tilde, n_tilde, plan: StreamPlan) -> MrcWeights:
    """Literal per-use weights ``|s_tilde_ij|^2 / |n_tilde_ij|^2`` (needs the true signal; debug only)."""
    raw = np.abs(np.asarray(s_tilde)) ** 2 / np.maximum(np.abs(np.asarray(n_tilde)) ** 2, 1e-300)
    return MrcWeights(_normalize_groups(raw, plan), plan)


def mrc_combine(s_hat, weights: MrcWeights, plan: StreamPlan | None = None) -> np.ndarray:
    """Weighted sum of the copies in each group; one output per group."""
    plan = weights.plan if plan is None else plan
    s_hat = np.asarray(s_hat)
    w = weights.w if weights.w.ndim == s_hat.ndim else weights.w.reshape(weights.w.shape + (1,) * (s_hat.ndim - 1))
    return np.stack([np.sum(w[list(g)] * s_hat[list(g)], axis=0) for g in plan.groups])


def simulate_link(
    h,
    sol,
    budget: LinkBudget,
    n_vectors: int,
    rng: np.random.Generator,
    mode: str = "multiplex",
    *,
    literal_weights: bool = False,
) -> tuple[int, int]:
    """Send ``n_vectors`` random QPSK vectors and count hard-decision bit errors."""
    plan = StreamPlan.from_solution(sol, mode)
    n_s = plan.n_slots
    n_sym = plan.n_symbols
    bits = rng.integers(0, 2, size=2 * n_sym * n_vectors, dtype=np.int8)
    u = qpsk_modulate(bits).reshape(n_vectors, n_sym).T
    if mode == "mrc":
        s = replicate_for_mrc(u, plan)
    else:
        s = u / np.sqrt(n_s)
    h_hat = effective_gain(h, sol)
    y = transmit(h, sol, s, budget, rng)
    rho_eff = budget.rho / n_s
    u_hat = lmmse_demodulate(y, h_hat, budget.sigma_n2, rho_eff)
    if mode == "mrc":
        if literal_weights:
            s_tilde = np.sqrt(rho_eff) * (h_hat @ (s * np.sqrt(n_s)))
            n_tilde = y - s_tilde
            weights = mrc_weights_instantaneous(s_tilde, n_tilde, plan)
        else:
            weights = mrc_weights(h_hat, budget.sigma_n2, plan)
        u_hat = mrc_combine(u_hat, weights, plan)
    decided = qpsk_demodulate(u_hat.T.reshape(-1))
    return int(np.count_nonzero(decided != bits)), int(bits.size)


def mrc_simo_output_snr(
    h,
    sigma2: float,
    n_uses: int,
    rng: np.random.Generator,
    weights: Sequence[float] | None = None,
) -> tuple[float, float]:
    """Measured output SNR of a SIMO combiner and its standard error.

    Without ``weights`` the classical MRC combiner ``h^H / ||h||`` is used;
    otherwise the branches are co-phased and weighted by the given
    nonnegative real weights.
    """
    h = np.asarray(h, dtype=np.complex128).reshape(-1)
    if weights is None:
        w = h.conj() / np.linalg.norm(h)
    else:
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0):
            raise ContractError("weights must be nonnegative")
        w = weights * np.exp(-1j * np.angle(h))
    bits = rng.integers(0, 2, size=2 * n_uses, dtype=np.int8)
    s = qpsk_modulate(bits)
    noise = (rng.standard_normal((h.size, n_uses)) + 1j * rng.standard_normal((h.size, n_uses))) * np.sqrt(sigma2 / 2)
    y = h[:, None] * s[None, :] + noise
    out = w @ y
    gain = w @ h
    resid = out - gain * s
    noise_power = float(np.mean(np.abs(resid) ** 2))
    snr = abs(gain) ** 2 / noise_power
    return snr, snr / np.sqrt(n_uses)


@dataclass(frozen=True)
class BerTrialConfig:
    """One BER trial: channel layout, scheme, SNR and number of symbol vectors."""

    dims: "SystemDims"
    p: int
    q: object
    bits: int
    scheme: str
    snr_db: float
    n_vectors: int = 1000
    sigma_n2: float = 1.0


def ber_trial(config: BerTrialConfig, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one channel, design the scheme, and count bit errors over many vectors."""
    from .channel import default_lobe_layout, generate_channel
    from .schemes import design

    lobes = default_lobe_layout(config.p, config.q)
    ch = generate_channel(config.dims, lobes, rng)
    d = design(config.scheme, ch, config.bits)
    budget = LinkBudget.from_snr_db(config.snr_db, config.sigma_n2)
    return simulate_link(ch.h, d.solution, budget, config.n_vectors, rng, d.mode)
