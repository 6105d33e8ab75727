"""Spatial-lobe mmWave channel generation.

Paths are grouped into angular lobes; every path has its AOA and AOD inside
the same lobe. The narrowband channel is the scaled sum of rank-one path
contributions ``alpha * a_r(aoa) a_t(aod)^H`` over uniform linear arrays with
half-wavelength spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import ContractError
from .validation import check_positive_int

TWO_PI = 2.0 * np.pi
MAX_DEFAULT_LOBES = 5
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class SystemDims:
    """Antenna, RF-chain and stream counts of a point-to-point link.

    ``n_s <= n_rf`` is not enforced here; RF-chain sweeps deliberately visit
    cells with fewer chains than streams and the schemes that consume the
    chain count reject them (see :meth:`supports_streams`).
    """

    n_t: int
    n_r: int
    n_rf_t: int
    n_rf_r: int
    n_s: int

    def __post_init__(self):
        for name in ("n_t", "n_r", "n_rf_t", "n_rf_r", "n_s"):
            check_positive_int(getattr(self, name), name)
        if self.n_rf_t > self.n_t or self.n_rf_r > self.n_r:
            raise ContractError("RF chain count exceeds antenna count")
        if self.n_s > min(self.n_t, self.n_r):
            raise ContractError(f"n_s={self.n_s} exceeds min(n_t, n_r)")

    def supports_streams(self) -> bool:
        return self.n_s <= self.n_rf_t and self.n_s <= self.n_rf_r


@dataclass(frozen=True)
class UlaGeometry:
    num_elements: int
    spacing_over_lambda: float = 0.5

    def __post_init__(self):
        check_positive_int(self.num_elements, "num_elements")
        if self.spacing_over_lambda != 0.5:
            raise ContractError("only half-wavelength spacing is supported")


@dataclass(frozen=True)
class SpatialLobeSpec:
    index: int
    mean_angle: float
    angular_spread: float
    num_subpaths: int
    power_share: float

    def __post_init__(self):
        check_positive_int(self.index, "lobe index")
        check_positive_int(self.num_subpaths, "num_subpaths")
        if not 0 < self.angular_spread <= TWO_PI:
            raise ContractError(f"angular spread must lie in (0, 2pi], got {self.angular_spread}")
        if self.power_share < 0:
            raise ContractError("power_share must be nonnegative")

    @property
    def lower_edge(self) -> float:
        return float(np.mod(self.mean_angle - self.angular_spread / 2, TWO_PI))

    def contains(self, angle) -> np.ndarray:
        """Half-open circular membership ``[mean - spread/2, mean + spread/2)``."""
        offset = np.mod(np.asarray(angle, dtype=float) - self.lower_edge, TWO_PI)
        offset = np.where(offset > TWO_PI - _EDGE_TOL, 0.0, offset)
        if self.angular_spread >= TWO_PI:
            return np.ones_like(offset, dtype=bool)
        return offset < self.angular_spread - _EDGE_TOL


@dataclass(frozen=True)
class PathComponent:
    lobe_index: int
    aoa: float
    aod: float
    gain: complex


@dataclass(frozen=True)
class ChannelRealization:
    """One channel draw. ``alpha`` holds the path gains including the global scale."""

    dims: SystemDims
    lobes: tuple[SpatialLobeSpec, ...]
    paths: tuple[PathComponent, ...]
    h: np.ndarray
    a_t: np.ndarray
    a_r: np.ndarray
    alpha: np.ndarray
    seed: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def lobe_columns(self, lobe: int) -> np.ndarray:
        """Indices of the path columns that belong to ``lobe``."""
        cols = np.array([k for k, p in enumerate(self.paths) if p.lobe_index == lobe], dtype=int)
        if cols.size == 0:
            raise ContractError(f"lobe {lobe} has no paths")
        return cols

    @property
    def lobe_indices(self) -> list[int]:
        return [lobe.index for lobe in self.lobes]


def circular_distance(a, b) -> np.ndarray:
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def steering_matrix(num_elements: int, angles) -> np.ndarray:
    """Columns are ULA responses ``exp(j*pi*n*sin(angle)) / sqrt(N)``."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    n = np.arange(num_elements)[:, None]
    return np.exp(1j * np.pi * n * np.sin(angles)[None, :]) / np.sqrt(num_elements)


def array_response(geom: UlaGeometry, angle: float) -> np.ndarray:
    return steering_matrix(geom.num_elements, [angle])[:, 0]


def _q_list(p: int, q_per_lobe) -> list[int]:
    if np.isscalar(q_per_lobe):
        return [check_positive_int(q_per_lobe, "q")] * p
    qs = [check_positive_int(q, "q") for q in q_per_lobe]
    if len(qs) != p:
        raise ContractError(f"got {len(qs)} subpath counts for {p} lobes")
    return qs


def lobe_layout(mean_angles: Sequence[float], q_per_lobe, spread: float | None = None) -> list[SpatialLobeSpec]:
    """Lobes at arbitrary mean angles with equal power shares."""
    p = len(mean_angles)
    if p == 0:
        raise ContractError("at least one lobe is required")
    qs = _q_list(p, q_per_lobe)
    spread = np.pi / p if spread is None else spread
    return [
        SpatialLobeSpec(
            index=i + 1,
            mean_angle=float(np.mod(m, TWO_PI)),
            angular_spread=float(spread),
            num_subpaths=qs[i],
            power_share=1.0 / p,
        )
        for i, m in enumerate(mean_angles)
    ]


def default_lobe_layout(p: int, q_per_lobe, *, allow_many: bool = False) -> list[SpatialLobeSpec]:
    """``p`` lobes on the uniform grid ``2*pi*(i-1)/p`` with spread ``pi/p``."""
    if isinstance(p, bool) or int(p) != p or p < 1:
        raise ContractError(f"number of lobes must be a positive integer, got {p!r}")
    if p > MAX_DEFAULT_LOBES and not allow_many:
        raise ContractError(f"at most {MAX_DEFAULT_LOBES} lobes unless allow_many is set")
    return lobe_layout(TWO_PI * np.arange(p) / p, q_per_lobe)


def random_lobe_layout(p: int, q_per_lobe, rng: np.random.Generator, max_tries: int = 10_000) -> list[SpatialLobeSpec]:
    """Lobe means drawn uniformly on the circle, redrawn until the intervals are disjoint."""
    spread = np.pi / p
    for _ in range(max_tries):
        means = np.sort(rng.uniform(0.0, TWO_PI, size=p))
        gaps = np.diff(np.concatenate([means, means[:1] + TWO_PI]))
        if p == 1 or gaps.min() >= spread:
            return lobe_layout(means, q_per_lobe, spread)
    raise ContractError(f"could not place {p} disjoint lobes in {max_tries} draws")


def draw_paths(lobes: Sequence[SpatialLobeSpec], rng: np.random.Generator) -> list[PathComponent]:
    """Per lobe: uniform AOA and AOD inside the lobe interval, circular Gaussian gains.

    Gains have unit variance scaled by ``power_share * P``, i.e. exactly unit
    variance for the default equal shares.
    """
    paths = []
    n_lobes = len(lobes)
    for lobe in lobes:
        q = lobe.num_subpaths
        lo = lobe.mean_angle - lobe.angular_spread / 2
        aoa = np.mod(lo + lobe.angular_spread * rng.uniform(size=q), TWO_PI)
        aod = np.mod(lo + lobe.angular_spread * rng.uniform(size=q), TWO_PI)
        gains = (rng.standard_normal(q) + 1j * rng.standard_normal(q)) / np.sqrt(2.0)
        if lobe.power_share * n_lobes != 1.0:
            gains = gains * np.sqrt(lobe.power_share * n_lobes)
        paths.extend(
            PathComponent(lobe.index, float(aoa[k]), float(aod[k]), complex(gains[k])) for k in range(q)
        )
    return paths


def _expected_energy_ratio(lobes: Sequence[SpatialLobeSpec], paths: Sequence[PathComponent], gain_variance: float) -> float:
    """E||H||_F^2 / (N_t N_r) implied by lobe power shares and per-path gain variance."""
    p = len(lobes)
    share = {lobe.index: lobe.power_share for lobe in lobes}
    return sum(gain_variance * share[path.lobe_index] * p for path in paths) / len(paths)


def assemble_channel(
    dims: SystemDims,
    lobes: Sequence[SpatialLobeSpec],
    paths: Sequence[PathComponent],
    normalize: bool = False,
    *,
    gain_variance: float = 1.0,
    seed: int | None = None,
) -> ChannelRealization:
    """Sum the path contributions with the ``sqrt(N_t N_r / L)`` prefactor.

    ``gain_variance`` is the variance the path gains were drawn with; when
    ``normalize`` is set the gains are rescaled so that the ensemble mean of
    ``||H||_F^2`` equals ``N_t N_r``. With unit-variance gains and equal power
    shares the rescaling is the identity.
    """
    lobes = tuple(lobes)
    paths = tuple(paths)
    if not paths:
        raise ContractError("channel needs at least one path")
    by_index = {lobe.index: lobe for lobe in lobes}
    if len(by_index) != len(lobes):
        raise ContractError("duplicate lobe indices")
    for path in paths:
        lobe = by_index.get(path.lobe_index)
        if lobe is None:
            raise ContractError(f"path refers to unknown lobe {path.lobe_index}")
        half = lobe.angular_spread / 2 + _EDGE_TOL
        if circular_distance(path.aoa, lobe.mean_angle) > half or circular_distance(path.aod, lobe.mean_angle) > half:
            raise ContractError(f"path angles fall outside lobe {lobe.index}")
    n_paths = len(paths)
    scale = np.sqrt(dims.n_t * dims.n_r / n_paths)
    if normalize:
        scale /= np.sqrt(_expected_energy_ratio(lobes, paths, gain_variance))
    alpha = scale * np.array([p.gain for p in paths], dtype=np.complex128)
    a_t = steering_matrix(dims.n_t, [p.aod for p in paths])
    a_r = steering_matrix(dims.n_r, [p.aoa for p in paths])
    h = (a_r * alpha) @ a_t.conj().T
    return ChannelRealization(dims, lobes, paths, h, a_t, a_r, alpha, seed)


def sub_channel(ch: ChannelRealization, lobe: int) -> np.ndarray:
    """Channel built from the paths of one lobe, with the global scale."""
    if lobe not in ch.lobe_indices:
        raise ContractError(f"lobe {lobe} out of range {ch.lobe_indices}")
    cols = ch.lobe_columns(lobe)
    return (ch.a_r[:, cols] * ch.alpha[cols]) @ ch.a_t[:, cols].conj().T


def generate_channel(
    dims: SystemDims,
    lobes: Sequence[SpatialLobeSpec],
    rng: np.random.Generator,
    *,
    normalize: bool = True,
    seed: int | None = None,
) -> ChannelRealization:
    paths = draw_paths(lobes, rng)
    return assemble_channel(dims, lobes, paths, normalize=normalize, seed=seed)
