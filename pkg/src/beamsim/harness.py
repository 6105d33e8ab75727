"""Seeded Monte Carlo sweeps, flat key-value configs and CSV persistence.

A sweep has one cell per value of its sweep variable (a single cell when the
sweep variable is the SNR). Every trial of a cell draws one channel and
evaluates every scheme at every SNR grid point, so the schemes see the same
channels. Trial ``t`` of cell ``c`` draws its channel from
``SeedSequence([seed, c, t, 0])`` and scheme ``k`` draws its link noise from
``SeedSequence([seed, c, t, STREAM_ID[k]])``; results therefore do not depend
on the worker count or the execution order.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channel import SystemDims, default_lobe_layout, generate_channel, random_lobe_layout
from .exceptions import ConfigError, ContractError, InfeasibleCodebookError
from .link import simulate_link
from .metrics import LinkBudget, flop_estimate, spectral_efficiency
from .precoder import effective_channel
from .schemes import SCHEMES, STREAM_ID, design

log = logging.getLogger(__name__)

CSV_HEADER = ("config_hash", "sweep_var", "cell_value", "snr_db", "scheme", "metric", "mean", "stderr", "trials", "seed")
KINDS = ("se", "ber", "complexity")
SWEEP_VARS = ("snr", "p", "q", "n_rf", "n_antennas", "n_s")
METRICS = ("spectral_efficiency_bps_hz", "ber", "offdiag_energy", "flops_reduction")
WORKERS_ENV = "BEAMSIM_WORKERS"
# shared link-noise stream when schemes use common random numbers
_CRN_STREAM = 99


@dataclass(frozen=True)
class SweepConfig:
    """Everything that determines a sweep's numbers, plus where to write them.

    ``n_s=None`` means one stream per path (``sum(q)``). ``q`` is a scalar or
    one count per lobe. ``workers`` and ``out`` do not enter the config hash.
    """

    kind: str = "se"
    n_t: int = 64
    n_r: int = 32
    n_rf_t: int = 16
    n_rf_r: int = 8
    n_s: int | None = None
    p: int = 4
    q: int | tuple[int, ...] = 2
    bits: int = 7
    snr_db: tuple[float, ...] = (0.0,)
    sweep_var: str = "snr"
    values: tuple[float, ...] = ()
    schemes: tuple[str, ...] = ("svd", "omp", "hyp_sld")
    trials: int = 100
    seed: int = 0
    n_vectors: int = 1000
    lobe_means: str = "grid"
    common_random_numbers: bool = False
    common_channels: bool = False
    offdiag: bool = False
    out: str | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep_var must be one of {SWEEP_VARS}, got {self.sweep_var!r}")
        if not self.snr_db:
            raise ConfigError("snr grid is empty")
        if self.sweep_var != "snr" and not self.values:
            raise ConfigError(f"sweep over {self.sweep_var} needs values")
        if not self.schemes:
            raise ConfigError("no schemes selected")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ConfigError(f"unknown schemes {sorted(unknown)}; expected a subset of {SCHEMES}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.n_vectors < 1:
            raise ConfigError("n_vectors must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.lobe_means not in ("grid", "uniform"):
            raise ConfigError("lobe_means must be 'grid' or 'uniform'")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be at least 1")
        # fail early on a bad base geometry
        for value in self.cell_values():
            self.cell_setup(value)

    def cell_values(self) -> list[float | None]:
        return [None] if self.sweep_var == "snr" else list(self.values)

    def cell_setup(self, value) -> tuple[SystemDims | None, int, int | tuple[int, ...], str | None]:
        """Dims, P and Q for one cell; dims is None (with a reason) when the cell is invalid."""
        p, q = self.p, self.q
        n_t, n_r, n_rf_t, n_rf_r, n_s = self.n_t, self.n_r, self.n_rf_t, self.n_rf_r, self.n_s
        v = None if value is None else int(value)
        if value is not None and v != value:
            raise ConfigError(f"{self.sweep_var} values must be integers, got {value!r}")
        if self.sweep_var == "p":
            p = v
            if not np.isscalar(q):
                raise ConfigError("sweeping p needs a scalar q")
        elif self.sweep_var == "q":
            q = v
        elif self.sweep_var == "n_rf":
            n_rf_t = n_rf_r = v
        elif self.sweep_var == "n_antennas":
            n_t = n_r = v
        elif self.sweep_var == "n_s":
            n_s = v
        try:
            qs = [int(q)] * p if np.isscalar(q) else [int(x) for x in q]
            if len(qs) != p:
                raise ConfigError(f"got {len(qs)} subpath counts for {p} lobes")
            if n_s is None:
                n_s = sum(qs)
            dims = SystemDims(n_t, n_r, n_rf_t, n_rf_r, n_s)
        except ContractError as exc:
            return None, p, q, str(exc)
        return dims, p, q, None

    def config_hash(self) -> str:
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class SweepResult:
    config_hash: str
    sweep_var: str
    cell_value: float
    snr_db: float
    scheme: str
    metric: str
    mean: float
    stderr: float
    trials: int
    seed: int
    error: str | None = field(default=None, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def row(self) -> tuple:
        return tuple(getattr(self, k) for k in CSV_HEADER)


# --- config files ---------------------------------------------------------

def _floats(text: str) -> tuple[float, ...]:
    """``a,b,c`` or an inclusive range ``start:stop:step``."""
    text = text.strip()
    if ":" in text:
        parts = [float(x) for x in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"range must be start:stop:step with step > 0, got {text!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(start + k * step) for k in range(max(n, 0)))
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    out = []
    for x in _floats(text):
        if x != int(x):
            raise ConfigError(f"expected integers, got {text!r}")
        out.append(int(x))
    return tuple(out)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("auto", "none", "") else int(text)


def _q(text: str):
    vals = _ints(text)
    return vals[0] if len(vals) == 1 else vals


_PARSERS = {
    "kind": str.strip,
    "n_t": int,
    "n_r": int,
    "n_rf_t": int,
    "n_rf_r": int,
    "n_s": _optional_int,
    "p": int,
    "q": _q,
    "bits": int,
    "snr_db": _floats,
    "sweep_var": str.strip,
    "values": _floats,
    "schemes": lambda t: tuple(s.strip() for s in t.split(",") if s.strip()),
    "trials": int,
    "seed": int,
    "n_vectors": int,
    "lobe_means": str.strip,
    "common_random_numbers": _bool,
    "common_channels": _bool,
    "offdiag": _bool,
    "out": str.strip,
    "workers": _optional_int,
}


def parse_config_text(text: str, **overrides) -> SweepConfig:
    """Parse flat ``key = value`` lines (an optional ``[sweep]`` header is allowed).

    ``overrides`` that are not None replace file values.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not text.lstrip().startswith("["):
        text = "[sweep]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if parser.sections() != ["sweep"]:
        raise ConfigError(f"expected a single [sweep] section, got {parser.sections()}")
    kwargs = {}
    for key, raw in parser["sweep"].items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kwargs[key] = _PARSERS[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SweepConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, **overrides) -> SweepConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, **overrides)


def resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be at least 1")
        return n
    return 1


# --- trials ---------------------------------------------------------------

def _rng(seed: int, cell: int, trial: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, cell, trial, stream]))


def _lobes(cfg: SweepConfig, p, q, rng):
    if cfg.lobe_means == "uniform":
        return random_lobe_layout(p, q, rng)
    return default_lobe_layout(p, q, allow_many=True)


def run_trial(cfg: SweepConfig, cell: int, trial: int) -> dict:
    """One channel draw of one cell.

    Returns ``{scheme: {(metric, snr_db): value}}`` with a string in place of
    the dict for schemes that could not be designed.
    """
    dims, p, q, _ = cfg.cell_setup(cfg.cell_values()[cell])
    # common_channels reuses trial t's draw in every cell (same dims give the same H)
    ch_rng = _rng(cfg.seed, 0 if cfg.common_channels else cell, trial, 0)
    ch = generate_channel(dims, _lobes(cfg, p, q, ch_rng), ch_rng)
    out: dict = {}
    for scheme in cfg.schemes:
        try:
            d = design(scheme, ch, cfg.bits)
        except (InfeasibleCodebookError, ContractError, np.linalg.LinAlgError) as exc:
            out[scheme] = f"{type(exc).__name__}: {exc}"
            continue
        vals = {}
        if cfg.kind == "se":
            for snr in cfg.snr_db:
                vals[("spectral_efficiency_bps_hz", snr)] = spectral_efficiency(
                    ch.h, d.solution, LinkBudget.from_snr_db(snr)
                )
        else:
            stream = _CRN_STREAM if cfg.common_random_numbers else STREAM_ID[scheme]
            link_rng = _rng(cfg.seed, cell, trial, stream)
            for snr in cfg.snr_db:
                errors, bits = simulate_link(ch.h, d.solution, LinkBudget.from_snr_db(snr), cfg.n_vectors, link_rng, d.mode)
                vals[("ber", snr)] = errors / bits
        if cfg.offdiag and getattr(d.solution, "lobe_blocks", ()):
            sol = d.solution
            vals[("offdiag_energy", None)] = effective_channel(sol.w_rf, ch.h, sol.f_rf, sol.lobe_blocks)[2]
        out[scheme] = vals
    return out


def _run_trial_star(args):
    return run_trial(*args)


def _aggregate(cfg: SweepConfig, cell: int, trials: Sequence[dict]) -> list[SweepResult]:
    value = cfg.cell_values()[cell]
    h = cfg.config_hash()
    results = []
    for scheme in cfg.schemes:
        per_trial = [t[scheme] for t in trials]
        errors = [x for x in per_trial if isinstance(x, str)]
        metric = "ber" if cfg.kind == "ber" else "spectral_efficiency_bps_hz"
        if errors:
            for snr in cfg.snr_db:
                results.append(
                    SweepResult(h, cfg.sweep_var, _cell_value(value, snr), snr, scheme, metric,
                                float("nan"), float("nan"), cfg.trials, cfg.seed, errors[0])
                )
            continue
        for key in per_trial[0]:
            x = np.array([t[key] for t in per_trial], dtype=float)
            stderr = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
            name, snr = key
            snr = float("nan") if snr is None else snr
            results.append(
                SweepResult(h, cfg.sweep_var, _cell_value(value, snr), snr, scheme, name,
                            float(x.mean()), stderr, cfg.trials, cfg.seed)
            )
    return results


def _cell_value(value, snr) -> float:
    return float(snr) if value is None else float(value)


def _complexity_results(cfg: SweepConfig) -> list[SweepResult]:
    h = cfg.config_hash()
    results = []
    for value in cfg.cell_values():
        dims, p, q, reason = cfg.cell_setup(value)
        cv = float("nan") if value is None else float(value)
        if dims is None or not np.isscalar(q):
            reason = reason or "complexity estimate needs a scalar q"
            results.append(SweepResult(h, cfg.sweep_var, cv, float("nan"), "hyp_sld", "flops_reduction",
                                       float("nan"), float("nan"), 1, cfg.seed, reason))
            continue
        rep = flop_estimate("hyp_sld", dims, p, int(q), cfg.bits)
        results.append(SweepResult(h, cfg.sweep_var, cv, float("nan"), "hyp_sld", "flops_reduction",
                                   rep.reduction_vs_baseline, 0.0, 1, cfg.seed))
    return results


def run_sweep(cfg: SweepConfig, workers: int | None = None) -> list[SweepResult]:
    """Run every cell and trial and aggregate mean and standard error per row.

    Cells whose geometry is invalid or whose schemes cannot be designed are
    reported as failed rows (``error`` set, mean NaN); the sweep continues.
    """
    if cfg.kind == "complexity":
        return _complexity_results(cfg)
    n_workers = resolve_workers(workers if workers is not None else cfg.workers)
    cells = cfg.cell_values()
    runnable, results_by_cell = [], {}
    for c, value in enumerate(cells):
        dims, _, _, reason = cfg.cell_setup(value)
        if dims is None:
            results_by_cell[c] = _failed_cell(cfg, value, reason)
        else:
            runnable.append(c)
    jobs = [(cfg, c, t) for c in runnable for t in range(cfg.trials)]
    if n_workers == 1 or len(jobs) <= 1:
        outputs = [run_trial(*job) for job in jobs]
    else:
        chunk = max(1, len(jobs) // (4 * n_workers))
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            outputs = list(pool.map(_run_trial_star, jobs, chunksize=chunk))
    for k, c in enumerate(runnable):
        block = outputs[k * cfg.trials : (k + 1) * cfg.trials]
        results_by_cell[c] = _aggregate(cfg, c, block)
    results = [r for c in range(len(cells)) for r in results_by_cell[c]]
    for r in results:
        if r.failed:
            log.warning("cell %s=%s scheme %s failed: %s", r.sweep_var, r.cell_value, r.scheme, r.error)
    return results


def _failed_cell(cfg: SweepConfig, value, reason: str) -> list[SweepResult]:
    metric = "ber" if cfg.kind == "ber" else "spectral_efficiency_bps_hz"
    h = cfg.config_hash()
    return [
        SweepResult(h, cfg.sweep_var, _cell_value(value, snr), snr, scheme, metric,
                    float("nan"), float("nan"), cfg.trials, cfg.seed, reason)
        for scheme in cfg.schemes
        for snr in cfg.snr_db
    ]


# --- CSV ------------------------------------------------------------------

def emit_csv(results: Iterable[SweepResult], path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in results:
            writer.writerow([_fmt(v) for v in r.row()])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path) -> list[SweepResult]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ConfigError(f"unexpected CSV header {header}")
        out = []
        for row in reader:
            d = dict(zip(CSV_HEADER, row))
            out.append(
                SweepResult(
                    d["config_hash"], d["sweep_var"], float(d["cell_value"]), float(d["snr_db"]),
                    d["scheme"], d["metric"], float(d["mean"]), float(d["stderr"]),
                    int(d["trials"]), int(d["seed"]),
                )
            )
    return out


def with_overrides(cfg: SweepConfig, **overrides) -> SweepConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


# --- dumps ----------------------------------------------------------------

def write_channel_dump(ch, path) -> Path:
    """Sectioned text dump: ``[dims]`` key=value lines, then CSV blocks.

    ``[lobes]`` has index,mean_angle,angular_spread,num_subpaths,power_share;
    ``[paths]`` has lobe,aoa,aod,re,im; ``[h]`` has row,col,re,im.
    """
    path = Path(path)
    d = ch.dims
    lines = ["# beamsim channel dump v1", "[dims]"]
    lines += [f"{k}={getattr(d, k)}" for k in ("n_t", "n_r", "n_rf_t", "n_rf_r", "n_s")]
    lines += [f"seed={ch.seed if ch.seed is not None else ''}", "[lobes]", "index,mean_angle,angular_spread,num_subpaths,power_share"]
    lines += [f"{l.index},{_fmt(l.mean_angle)},{_fmt(l.angular_spread)},{l.num_subpaths},{_fmt(l.power_share)}" for l in ch.lobes]
    lines += ["[paths]", "lobe,aoa,aod,re,im"]
    lines += [f"{p.lobe_index},{_fmt(p.aoa)},{_fmt(p.aod)},{_fmt(p.gain.real)},{_fmt(p.gain.imag)}" for p in ch.paths]
    lines += ["[h]", "row,col,re,im"]
    for r in range(ch.h.shape[0]):
        for c in range(ch.h.shape[1]):
            z = ch.h[r, c]
            lines.append(f"{r},{c},{_fmt(z.real)},{_fmt(z.imag)}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_channel_dump(path) -> dict:
    """Parse a channel dump back into plain Python/numpy values."""
    sections: dict[str, list[str]] = {}
    current = None
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            current = line.strip("[]")
            sections[current] = []
        else:
            sections[current].append(line)
    dims = dict(kv.split("=", 1) for kv in sections["dims"])
    out = {"dims": {k: int(v) for k, v in dims.items() if k != "seed"}}
    out["seed"] = int(dims["seed"]) if dims.get("seed") else None
    out["lobes"] = [tuple(float(x) for x in row.split(",")) for row in sections["lobes"][1:]]
    out["paths"] = [tuple(float(x) for x in row.split(",")) for row in sections["paths"][1:]]
    h = np.zeros((out["dims"]["n_r"], out["dims"]["n_t"]), dtype=np.complex128)
    for row in sections["h"][1:]:
        r, c, re, im = row.split(",")
        h[int(r), int(c)] = float(re) + 1j * float(im)
    out["h"] = h
    return out


def write_codebook_dump(cb, path) -> Path:
    """CSV: column index, generating angle, then ``re_n,im_n`` per antenna."""
    path = Path(path)
    n = cb.vectors.shape[0]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "angle"] + [f"{part}_{k}" for k in range(n) for part in ("re", "im")])
        for j in range(cb.size):
            v = cb.vectors[:, j]
            entries = [x for z in v for x in (_fmt(z.real), _fmt(z.imag))]
            writer.writerow([j, _fmt(cb.angles[j])] + entries)
    return path
