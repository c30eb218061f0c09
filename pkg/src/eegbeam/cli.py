"""Command-line entry point: ``eegbeam simulate | localize | bench``.

Exit codes: 0 success, 2 invalid parameters or usage, 3 bad input data or
unreadable files, 4 numerical failure that the inverse fallback could not
repair.
``EEGBEAM_THREADS`` sets the number of grid-scan threads (default 1).
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import io, pipeline
from .errors import DataError, NumericalError, ParameterError
from .report import RunReport
from .simkit import load_scene, simulate_eeg

EXIT_PARAM, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def _ridge(text: str):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"ridge must be a number or 'auto', got {text!r}")
    return value


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("EEGBEAM_THREADS", "1")))
    except ValueError:
        return 1


def cmd_simulate(args) -> int:
    config = load_scene(args.scene)
    leadfield = config.leadfield()
    eeg = simulate_eeg(leadfield, config.scene)
    prefix = Path(args.out_prefix)
    eeg_path, lf_path = prefix.with_name(prefix.name + ".eegb"), prefix.with_name(prefix.name + ".lfb")
    io.write_eeg(eeg_path, eeg)
    io.write_leadfield(lf_path, leadfield)
    print(f"wrote {eeg_path} ({eeg.k} channels x {eeg.n_samples} samples) and "
          f"{lf_path} ({len(leadfield)} points); {len(config.scene.positions)} source(s), "
          f"noise_sigma={config.scene.noise_sigma:g}, seed={config.scene.seed}")
    return 0


def _emit(report: RunReport, out, csv_path=None) -> None:
    if out:
        report.write(out)
    else:
        print(report.to_json())
    if csv_path:
        report.write_csv(csv_path)


def cmd_localize(args) -> int:
    eeg = io.read_eeg(args.eeg)
    leadfield = io.read_leadfield(args.leadfield)
    result = pipeline.localize(eeg, leadfield, args.mode, args.ns, args.cy, args.ridge,
                               args.refresh or None, workers=_threads())
    _emit(result.report, args.out, args.csv)
    m = result.report.metrics
    for mode in ("accelerated", "traditional"):
        if f"{mode}_top_point" in m:
            print(f"{mode}: top point {m[f'{mode}_top_point']} at {m[f'{mode}_top_position']}",
                  file=sys.stderr)
    if "recon_error" in m:
        print(f"orientation error mean {m['orientation_error_mean']:.3g}, "
              f"recon error {m['recon_error']:.3g}", file=sys.stderr)
    return 0


def cmd_bench(args) -> int:
    report = pipeline.bench(args.k, args.ns, args.cy, args.grid_points, args.slides, args.seed)
    _emit(report, args.out)
    up = report.flops["update"]
    rec = report.flops["reconstruction"]
    print(f"reconstruction multiply-adds scalar/vector = {rec['ratio_exact']}", file=sys.stderr)
    if up:
        print(f"update multiply-adds recursive/recompute = {up['ratio']:.4f}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eegbeam", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize EEG and lead field from a scene file",
                       allow_abbrev=False)
    p.add_argument("scene", help="scene JSON file")
    p.add_argument("out_prefix", help="writes OUT_PREFIX.eegb and OUT_PREFIX.lfb")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("localize", help="scan a source grid with the streaming beamformer",
                       allow_abbrev=False)
    p.add_argument("eeg", help="EEGB file (or CSV, one channel per row)")
    p.add_argument("leadfield", help="LFB1 lead field file")
    p.add_argument("--mode", choices=pipeline.MODES, default="both")
    p.add_argument("--ns", type=int, default=None, help="window length (default 4k)")
    p.add_argument("--cy", type=int, default=1, help="samples per update block (default 1)")
    p.add_argument("--ridge", type=_ridge, default=0.0,
                   help="diagonal loading added to the covariance, or 'auto' (default 0)")
    p.add_argument("--refresh", type=int, default=4096,
                   help="recompute the inverse directly every N updates, 0 = never (default 4096)")
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.add_argument("--csv", help="also write a per-point CSV table")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("bench", help="count multiply-adds of recursive vs batch updates",
                       allow_abbrev=False)
    p.add_argument("--k", type=int, default=32, help="channels (default 32)")
    p.add_argument("--ns", type=int, default=None, help="window length (default 4k)")
    p.add_argument("--cy", type=int, default=1, help="samples per update block (default 1)")
    p.add_argument("--grid-points", type=int, default=64, help="grid points (default 64)")
    p.add_argument("--slides", type=int, default=64, help="number of slides (default 64)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"eegbeam: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (DataError, OSError) as exc:
        print(f"eegbeam: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"eegbeam: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
