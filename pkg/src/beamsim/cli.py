"""Command line entry point: sweeps, complexity, dumps and a quick self test.

Exit codes: 0 success, 1 configuration or usage error, 2 when every cell of
a sweep failed (or the self test failed).
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import harness
from .channel import SystemDims, UlaGeometry, default_lobe_layout, generate_channel
from .codebook import build_codebook
from .exceptions import ConfigError, ContractError
from .metrics import LinkBudget, flop_estimate, spectral_efficiency
from .schemes import design

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value sweep config")
    p.add_argument("--seed", type=int, help="master seed (nonnegative)")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${harness.WORKERS_ENV} or 1)")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout or the config's out)")
    p.add_argument("--trials", type=int, help="trials per cell")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beamsim", description="Spatial-lobes-division hybrid precoding simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, kind in (("se-sweep", "spectral efficiency"), ("ber-sweep", "bit error rate")):
        p = sub.add_parser(name, help=f"{kind} Monte Carlo sweep to CSV")
        _common(p)

    p = sub.add_parser("complexity", help="operation-count reduction of HYP-SLD against OMP")
    _common(p)
    p.add_argument("--nt", type=int, default=64)
    p.add_argument("--nr", type=int, default=32)
    p.add_argument("--nrf-t", type=int, default=16)
    p.add_argument("--nrf-r", type=int, default=8)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--b", type=int, default=7)
    p.add_argument("--ns", type=int, default=None, help="streams (default P*Q)")

    p = sub.add_parser("channel-dump", help="draw one channel and write it as structured text")
    _common(p)
    p.add_argument("--nt", type=int, default=64)
    p.add_argument("--nr", type=int, default=32)
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--q", type=int, default=2)

    p = sub.add_parser("codebook-dump", help="write a quantized codebook as CSV")
    _common(p)
    p.add_argument("--n", type=int, default=64, help="array elements")
    p.add_argument("--b", type=int, default=7, help="quantization bits")

    p = sub.add_parser("selftest", help="run a few invariant checks on one channel draw")
    _common(p)
    return parser


def _sweep(args, kind: str) -> int:
    overrides = dict(seed=args.seed, trials=args.trials, out=args.out, workers=args.workers)
    if args.config:
        cfg = harness.load_config(args.config, kind=kind, **overrides)
    else:
        cfg = harness.SweepConfig(kind=kind, **{k: v for k, v in overrides.items() if v is not None})
    results = harness.run_sweep(cfg)
    if kind == "complexity":
        for r in results:
            print(f"{r.sweep_var}={r.cell_value:g}: reduction vs omp {100 * r.mean:.4f}%")
    if cfg.out:
        harness.emit_csv(results, cfg.out)
        print(f"wrote {len(results)} rows to {cfg.out}")
    else:
        _csv_to_stdout(results)
    if results and all(r.failed for r in results):
        print("every cell failed", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def _csv_to_stdout(results) -> None:
    import csv

    writer = csv.writer(sys.stdout)
    writer.writerow(harness.CSV_HEADER)
    for r in results:
        writer.writerow([harness._fmt(v) for v in r.row()])


def _complexity(args) -> int:
    if args.config:
        return _sweep(args, "complexity")
    n_s = args.p * args.q if args.ns is None else args.ns
    dims = SystemDims(args.nt, args.nr, args.nrf_t, args.nrf_r, n_s)
    omp = flop_estimate("omp", dims, args.p, args.q, args.b)
    hyp = flop_estimate("hyp_sld", dims, args.p, args.q, args.b)
    for rep in (omp, hyp):
        phases = ", ".join(f"{k}={v:.0f}" for k, v in rep.phases.items())
        print(f"{rep.scheme}: total={rep.total:.0f} ({phases})")
    print(f"reduction vs omp: {100 * hyp.reduction_vs_baseline:.4f}%")
    if args.out:
        cfg = harness.SweepConfig(kind="complexity", n_t=args.nt, n_r=args.nr, n_rf_t=args.nrf_t, n_rf_r=args.nrf_r,
                                  n_s=n_s, p=args.p, q=args.q, bits=args.b, trials=1, seed=args.seed or 0)
        harness.emit_csv(harness.run_sweep(cfg), args.out)
    return EXIT_OK


def _channel_dump(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if seed < 0:
        raise ConfigError("seed must be nonnegative")
    dims = SystemDims(args.nt, args.nr, args.p * args.q, args.p * args.q, args.p * args.q)
    ch = generate_channel(dims, default_lobe_layout(args.p, args.q, allow_many=True), np.random.default_rng(seed), seed=seed)
    out = args.out or "channel.txt"
    harness.write_channel_dump(ch, out)
    print(f"wrote channel to {out}")
    return EXIT_OK


def _codebook_dump(args) -> int:
    cb = build_codebook(UlaGeometry(args.n), args.b)
    out = args.out or "codebook.csv"
    harness.write_codebook_dump(cb, out)
    print(f"wrote {cb.size} codewords ({cb.duplicate_count} aliases) to {out}")
    return EXIT_OK


def _selftest(args) -> int:
    rng = np.random.default_rng(0 if args.seed is None else args.seed)
    dims = SystemDims(64, 32, 16, 8, 8)
    ch = generate_channel(dims, default_lobe_layout(4, 2), rng)
    budget = LinkBudget.from_snr_db(0.0)
    ok = True
    for scheme in ("svd", "omp", "hyp_sld"):
        sol = design(scheme, ch, 7).solution
        power = np.linalg.norm(sol.f_t) ** 2
        w = sol.w_t
        ortho = np.abs(w.conj().T @ w - np.eye(w.shape[1])).max()
        se = spectral_efficiency(ch.h, sol, budget)
        good = abs(power - dims.n_s) < 1e-9 and ortho < 1e-6 and np.isfinite(se)
        ok &= good
        print(f"{scheme:8s} power={power:.12f} |W^H W - I|={ortho:.1e} se={se:.3f} {'ok' if good else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ALL_FAILED


_COMMANDS = {
    "se-sweep": lambda a: _sweep(a, "se"),
    "ber-sweep": lambda a: _sweep(a, "ber"),
    "complexity": _complexity,
    "channel-dump": _channel_dump,
    "codebook-dump": _codebook_dump,
    "selftest": _selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ContractError) as exc:
        parser.print_usage(sys.stderr)
        print(f"beamsim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
