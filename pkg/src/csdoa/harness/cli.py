"""``csdoa`` command line.

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
numerical failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from ..errors import CsdoaError, DegenerateError
from ..rootmusic import VARIANTS
from . import experiments as ex
from .config import ConfigError, load_config, preset, serialize_config
from .output import line_chart_svg, root_scatter_svg, write_csv, write_text

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
LEMMA_TOLERANCE = 0.05


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csdoa", description="CS beamformer root-MUSIC experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "example1": "per-trial DOA estimates and root constellations",
        "rmse-sweep": "RMSE against SNR for both estimators",
        "deviation-sweep": "subspace deviation against SNR and snapshot count",
        "lemma-check": "Monte Carlo check of the second-order moment lemmas",
        "timing": "eigendecomposition and pipeline timing",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
        p.add_argument("--variant", choices=VARIANTS + ("both",), help="estimator(s) to run")
        p.add_argument("--fix-phi", action="store_true",
                       help="use one measurement matrix for every trial")
    return parser


def _resolve_config(args):
    config = preset(args.command)
    if args.config is not None:
        config = load_config(args.config, base=config)
    updates = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
        updates["master_seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.variant is not None:
        updates["variants"] = VARIANTS if args.variant == "both" else (args.variant,)
    if args.fix_phi:
        updates["fix_phi"] = True
    return replace(config, **updates) if updates else config


def _stem(command: str) -> str:
    return command.replace("-", "_")


def _write_common(out: Path, command: str, config, elapsed) -> None:
    write_text(out / f"{_stem(command)}_config.ini", serialize_config(config))
    write_text(out / f"{_stem(command)}_timing.json", json.dumps(elapsed, indent=2) + "\n")


def _print_rows(result) -> None:
    for r in sorted(result.rows, key=lambda r: (r.variant, r.snapshots, r.snr_db)):
        print(f"{r.variant:8s} snr={r.snr_db:6.1f} dB  T={r.snapshots:<6d} "
              f"rmse={r.rmse_deg:.4g} deg  failures={r.failures}/{r.trials}  "
              f"xi={r.mean_xi_empirical:.3g}  xi_quad={r.mean_xi_quadratic:.3g}  "
              f"E[xi]={r.xi_expected:.3g}")


def _cmd_example1(config, out):
    res = ex.run_example1(config)
    v = config.variants
    write_csv(out / "example1_estimates.csv", res.estimate_columns(v), res.estimate_rows(v))
    write_csv(out / "example1_roots.csv", res.ROOT_COLUMNS, res.root_rows(v))
    write_csv(out / "example1_summary.csv", ex.SWEEP_COLUMNS, res.sweep.csv_rows())
    groups = {}
    for variant in v:
        for t in res.trials:
            est = t[variant].estimate
            if est is not None:
                groups.setdefault(f"{variant} roots", []).extend(est.all_roots)
                groups.setdefault(f"{variant} selected", []).extend(est.selected_roots)
    write_text(out / "example1_roots.svg", root_scatter_svg(groups, "Root constellation"))
    _print_rows(res.sweep)
    return res.sweep.elapsed()


def _sweep_series(result, value):
    series = {}
    for r in sorted(result.rows, key=lambda r: (r.variant, r.snapshots, r.snr_db)):
        xs, ys = series.setdefault(f"{r.variant} T={r.snapshots}", ([], []))
        xs.append(r.snr_db)
        ys.append(value(r))
    return series


def _cmd_rmse_sweep(config, out):
    res = ex.run_rmse_sweep(config)
    write_csv(out / "rmse_sweep.csv", ex.SWEEP_COLUMNS, res.csv_rows())
    write_text(out / "rmse-sweep_rmse.svg", line_chart_svg(
        _sweep_series(res, lambda r: r.rmse_deg), "RMSE vs SNR", "SNR (dB)",
        "RMSE (deg)", log_y=True))
    _print_rows(res)
    return res.elapsed()


def _cmd_deviation_sweep(config, out):
    res = ex.run_deviation_sweep(config)
    write_csv(out / "deviation_sweep.csv", ex.SWEEP_COLUMNS, res.csv_rows())
    write_text(out / "deviation-sweep_xi.svg", line_chart_svg(
        _sweep_series(res, lambda r: r.mean_xi_empirical), "Subspace deviation vs SNR",
        "SNR (dB)", "mean deviation", log_y=True))
    write_text(out / "deviation-sweep_expected.svg", line_chart_svg(
        _sweep_series(res, lambda r: r.xi_expected), "Expected deviation vs SNR",
        "SNR (dB)", "E[deviation]", log_y=True))
    _print_rows(res)
    return res.elapsed()


def _cmd_lemma_check(config, out):
    start = time.perf_counter()
    res = ex.run_lemma_check(config)
    write_csv(out / "lemma_check.csv", res.COLUMNS, res.csv_rows())
    print(f"lemma 2a relative error: {res.error_2a:.4%}  (trials={res.trials})")
    print(f"lemma 2b relative error: {res.error_2b:.4%}  (trials={res.trials})")
    ok = res.error_2a < LEMMA_TOLERANCE and res.error_2b < LEMMA_TOLERANCE
    return {"lemma_check_s": time.perf_counter() - start}, ok


def _cmd_timing(config, out):
    rep = ex.run_timing(config)
    write_csv(out / "timing.csv", rep.COLUMNS, rep.csv_rows())
    print(f"eigendecomposition N={rep.N}: {rep.eig_full_seconds * 1e6:.1f} us, "
          f"m={rep.m}: {rep.eig_compressed_seconds * 1e6:.1f} us, "
          f"speedup {rep.eig_speedup:.1f}x")
    for v, s in sorted(rep.pipeline_seconds.items()):
        print(f"pipeline {v}: {s * 1e3:.3f} ms, rooting degree {rep.rooting_degree[v]}")
    return rep.measurements()


_COMMANDS = {
    "example1": _cmd_example1,
    "rmse-sweep": _cmd_rmse_sweep,
    "deviation-sweep": _cmd_deviation_sweep,
    "lemma-check": _cmd_lemma_check,
    "timing": _cmd_timing,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _resolve_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        result = _COMMANDS[args.command](config, args.out)
    except DegenerateError as exc:
        print(f"csdoa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CsdoaError, ValueError) as exc:
        print(f"csdoa: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    ok = True
    if isinstance(result, tuple):
        result, ok = result
    _write_common(args.out, args.command, config, result)
    return EXIT_OK if ok else EXIT_NUMERICAL


def main() -> None:
    sys.exit(cli_main())
