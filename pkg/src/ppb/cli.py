"""Command-line entry point: ``ppb {simulate,analyze,theory,reproduce,convert}``."""

import argparse
import sys
from pathlib import Path

from . import __version__, io as pio, theory
from .errors import exit_code_for
from .reproduce import FIGURES, reproduce
from .scenario import bundled_scenario_path, bundled_scenarios, load_scenario, run_scenario


def _scenario_arg(value):
    p = Path(value)
    if p.exists() or value not in bundled_scenarios():
        return p
    return bundled_scenario_path(value)


def _common(p, analysis=False):
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    p.add_argument("--full", action="store_true", help="long acquisition times (full_duration_s)")
    if analysis:
        p.add_argument("--resolution-ps", type=int, default=None, help="raw histogram bin (ps)")
        p.add_argument("--window-ns", type=float, default=None,
                       help="coincidence and herald window (ns)")
        p.add_argument("--rebin-ps", type=int, default=None, help="analysis bin width (ps)")


def build_parser():
    parser = argparse.ArgumentParser(prog="ppb", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ppb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write detected event streams for a scenario")
    p.add_argument("scenario", help="scenario file or bundled scenario name")
    _common(p)

    p = sub.add_parser("analyze", help="simulate (or load) and analyze a scenario")
    p.add_argument("scenario", help="scenario file or bundled scenario name")
    _common(p, analysis=True)

    p = sub.add_parser("theory", help="Doppler-averaged biphoton waveform table")
    p.add_argument("--temperature-K", type=float, default=325.15)
    p.add_argument("--velocity-points", type=int, default=256)
    p.add_argument("--out-dir", type=Path, default=Path("."))

    p = sub.add_parser("reproduce", help="run a figure's sweep and tabulate published values")
    p.add_argument("figure", choices=FIGURES)
    _common(p)

    p = sub.add_parser("convert", help="convert event files between binary and CSV")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path, nargs="?", default=None)
    p.add_argument("--to", choices=("csv", "binary"), default=None,
                   help="target format (default: the other one)")
    return parser


def _print_outputs(manifest, out_dir):
    for name in manifest.outputs:
        print(out_dir / name)
    print(f"runtime {manifest.runtime_s:.2f} s")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            sc = load_scenario(_scenario_arg(args.scenario))
            m = run_scenario(sc, args.out_dir, seed=args.seed, full=args.full, analyze=False,
                             write_events=True)
            _print_outputs(m, args.out_dir)
        elif args.command == "analyze":
            sc = load_scenario(_scenario_arg(args.scenario))
            m = run_scenario(sc, args.out_dir, seed=args.seed, full=args.full,
                             resolution_ps=args.resolution_ps, window_ns=args.window_ns,
                             rebin_ps=args.rebin_ps)
            _print_outputs(m, args.out_dir)
            print(pio.summary_text(m.summary), end="")
        elif args.command == "theory":
            params = theory.AtomicParams(temperature=args.temperature_K)
            wf = theory.doppler_averaged_g2(theory.default_tau_grid(), params, args.velocity_points)
            args.out_dir.mkdir(parents=True, exist_ok=True)
            path = args.out_dir / "theory_waveform.csv"
            theory.write_waveform_csv(wf, path)
            print(path)
            print(pio.summary_text({"theory": {
                "temperature_K": params.temperature,
                "doppler_width_MHz": params.doppler_width() / 1e6,
                "density_fwhm_ns": theory.fwhm(wf) * 1e9,
                "lifetime_ns": 1e9 / params.gamma_e,
            }}), end="")
        elif args.command == "reproduce":
            m, rows = reproduce(args.figure, args.out_dir, seed=args.seed, full=args.full)
            _print_outputs(m, args.out_dir)
            print(pio.table_csv_text(["quantity", "measured", "measured_sigma", "published",
                                      "published_sigma"], rows), end="")
        elif args.command == "convert":
            direction = {"csv": "to-csv", "binary": "to-binary", None: None}[args.to]
            print(pio.convert(args.input, args.output, direction))
    except Exception as exc:  # mapped to documented exit codes
        code = exit_code_for(exc)
        if code == 1:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
