"""Name -> precoder design, shared by the link trials and the sweep harness."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .channel import ChannelRealization, UlaGeometry
from .codebook import QuantizedCodebook, build_codebook
from .exceptions import ConfigError
from .precoder import hyp_sld, omp_hybrid, svd_precoder

SCHEMES = ("svd", "omp", "hyp_sld", "hyp_sld_mrc")
# fixed per-scheme RNG sub-stream ids; 0 is the channel draw
STREAM_ID = {"svd": 1, "omp": 2, "hyp_sld": 3, "hyp_sld_mrc": 4}


@lru_cache(maxsize=64)
def _codebook(n: int, bits: int) -> QuantizedCodebook:
    return build_codebook(UlaGeometry(n), bits)


def partitioned_codebooks(ch: ChannelRealization, bits: int) -> tuple[QuantizedCodebook, QuantizedCodebook]:
    return (
        _codebook(ch.dims.n_t, bits).with_partition(ch.lobes),
        _codebook(ch.dims.n_r, bits).with_partition(ch.lobes),
    )


@dataclass(frozen=True)
class Design:
    solution: object
    mode: str


def design(scheme: str, ch: ChannelRealization, bits: int) -> Design:
    """Build the precoder/combiner pair for ``scheme`` on one channel draw."""
    dims = ch.dims
    if scheme == "svd":
        return Design(svd_precoder(ch.h, dims.n_s), "multiplex")
    if scheme == "omp":
        cb_t, cb_r = _codebook(dims.n_t, bits), _codebook(dims.n_r, bits)
        return Design(omp_hybrid(ch.h, dims.n_s, cb_t, cb_r, dims.n_rf_t, dims.n_rf_r), "multiplex")
    if scheme in ("hyp_sld", "hyp_sld_mrc"):
        cb_t, cb_r = partitioned_codebooks(ch, bits)
        sol = hyp_sld(ch, cb_t, cb_r, dims.n_s)
        return Design(sol, "mrc" if scheme == "hyp_sld_mrc" else "multiplex")
    raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
