"""b-bit quantized beamsteering codebooks and their per-lobe partition."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import TWO_PI, SpatialLobeSpec, UlaGeometry, circular_distance, steering_matrix
from .exceptions import ConfigError, ContractError

HPBW_DEG = 102.0
MAX_BITS = 16


@dataclass(frozen=True)
class QuantizedCodebook:
    """``2**bits`` steering vectors generated from the angles ``2*pi*k/2**bits``.

    Because the array phase only depends on ``sin(angle)`` (mod 2), distinct
    generating angles can produce identical vectors; ``alias_keys`` assigns
    one integer per distinct vector so callers can spot them.
    """

    bits: int
    geom: UlaGeometry
    vectors: np.ndarray
    angles: np.ndarray
    alias_keys: np.ndarray
    lobe_partition: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.vectors.shape[1]

    @property
    def duplicate_count(self) -> int:
        """Number of columns that repeat an earlier column."""
        return self.size - np.unique(self.alias_keys).size

    def with_partition(self, lobes: Sequence[SpatialLobeSpec]) -> "QuantizedCodebook":
        return replace(self, lobe_partition=partition_by_lobes(self, lobes))

    def feasible_set(self, lobe: int) -> np.ndarray:
        try:
            return self.lobe_partition[lobe]
        except KeyError:
            raise ContractError(f"codebook has no partition entry for lobe {lobe}") from None


def _alias_keys(num_elements: int, angles: np.ndarray) -> np.ndarray:
    if num_elements == 1:
        return np.zeros(angles.size, dtype=np.int64)
    # exp(j*pi*n*x) is 2-periodic in x
    x = np.mod(np.sin(angles) + 1.0, 2.0)
    x = np.where(x > 2.0 - 1e-9, 0.0, x)
    return np.round(x * 1e9).astype(np.int64)


def build_codebook(geom: UlaGeometry, bits: int) -> QuantizedCodebook:
    if isinstance(bits, bool) or int(bits) != bits or not 1 <= bits <= MAX_BITS:
        raise ContractError(f"bits must be an integer in [1, {MAX_BITS}], got {bits!r}")
    bits = int(bits)
    angles = TWO_PI * np.arange(2**bits) / 2**bits
    vectors = steering_matrix(geom.num_elements, angles)
    return QuantizedCodebook(bits, geom, vectors, angles, _alias_keys(geom.num_elements, angles))


def _intervals_overlap(a: SpatialLobeSpec, b: SpatialLobeSpec) -> bool:
    if a.angular_spread + b.angular_spread > TWO_PI + 1e-9:
        return True
    gap = circular_distance(a.mean_angle, b.mean_angle)
    return gap < (a.angular_spread + b.angular_spread) / 2 - 1e-9


def partition_by_lobes(cb: QuantizedCodebook, lobes: Sequence[SpatialLobeSpec]) -> dict[int, np.ndarray]:
    """Map lobe index -> sorted codebook columns whose angle lies in the lobe.

    Columns between lobes are left out of every set.
    """
    lobes = list(lobes)
    for i, a in enumerate(lobes):
        for b in lobes[i + 1 :]:
            if _intervals_overlap(a, b):
                raise ConfigError(f"lobes {a.index} and {b.index} have overlapping angular intervals")
    return {lobe.index: np.flatnonzero(lobe.contains(cb.angles)) for lobe in lobes}


@dataclass(frozen=True)
class CoverageReport:
    beamwidth_deg: float
    lobe_coverage_deg: dict[int, float]
    mean_gap_deg: float
    separable: bool


def beam_coverage_check(lobes: Sequence[SpatialLobeSpec], geom: UlaGeometry, q=None) -> CoverageReport:
    """Half-power beam width bound per lobe against the gap between lobe means.

    ``q`` overrides the per-lobe subpath counts (scalar or one per lobe).
    """
    lobes = list(lobes)
    beamwidth = HPBW_DEG / geom.num_elements
    if q is None:
        qs = [lobe.num_subpaths for lobe in lobes]
    elif np.isscalar(q):
        qs = [int(q)] * len(lobes)
    else:
        qs = [int(v) for v in q]
    coverage = {lobe.index: qs[k] * beamwidth for k, lobe in enumerate(lobes)}
    means = np.sort([lobe.mean_angle for lobe in lobes])
    if len(means) > 1:
        gaps = np.diff(np.concatenate([means, means[:1] + TWO_PI]))
        gap_deg = float(np.degrees(gaps.min()))
    else:
        gap_deg = 360.0
    separable = all(gap_deg > c for c in coverage.values())
    return CoverageReport(beamwidth, coverage, gap_deg, separable)
