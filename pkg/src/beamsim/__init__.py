"""Spatial-lobes-division hybrid precoding and diversity combining for mmWave MIMO links."""

from .channel import (
    ChannelRealization,
    PathComponent,
    SpatialLobeSpec,
    SystemDims,
    UlaGeometry,
    array_response,
    assemble_channel,
    default_lobe_layout,
    draw_paths,
    generate_channel,
    sub_channel,
)
from .estimators import HypSldPrecoder, OmpPrecoder, SvdPrecoder
from .exceptions import (
    ConfigError,
    ContractError,
    DecompositionError,
    InfeasibleCodebookError,
    SingularCombinerError,
)
from .harness import SweepConfig, SweepResult, emit_csv, load_config, read_csv, run_sweep
from .link import StreamPlan, lmmse_demodulate, mrc_combine, mrc_weights, qpsk_demodulate, qpsk_modulate, simulate_link
from .codebook import QuantizedCodebook, beam_coverage_check, build_codebook, partition_by_lobes
from .metrics import (
    LinkBudget,
    chordal_distance,
    euclidean_objective,
    flop_estimate,
    mutual_information,
    spectral_efficiency,
)
from .precoder import (
    FullDigitalSolution,
    HybridSolution,
    effective_channel,
    hyp_sld,
    normalize_power,
    omp_hybrid,
    omp_precoder,
    svd_precoder,
)

__version__ = "0.1.0"
