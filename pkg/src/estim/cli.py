"""Command-line front end.

    estim run <preset> [--scale smoke|small|paper] [--seed N] [--out DIR]
                       [--set key=value]... [--bounds-rule basic|literal]
                       [--replicates I] [--no-samples] [--verbose]
    estim metrics <dir>
    estim plotdata <dir> [--no-figures]

Exit codes: 0 success, 2 config error, 3 runtime error, 4 finished but at
least one replicate hit the iteration cap without converging.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .errors import ConfigError, EstimError
from .fileio import format_value
from .presets import PRESETS, SCALES, apply_overrides, preset_config
from .report import emit_plotdata, render_figures
from .runner import load_run, recompute_metrics, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_NOT_CONVERGED = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="estim",
        description="Simulation-based black-box parameter estimation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment preset")
    run_p.add_argument("preset", help=f"one of {', '.join(PRESETS)}")
    run_p.add_argument("--scale", default="small", help=f"one of {', '.join(SCALES)}")
    run_p.add_argument("--seed", type=int, default=1, help="master seed")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="KEY=VALUE", help="override a config leaf (dotted path)",
    )
    run_p.add_argument(
        "--bounds-rule", choices=["basic", "literal"], default=None,
        help="bound-update rule (sequential presets)",
    )
    run_p.add_argument("--replicates", type=int, default=None)
    run_p.add_argument(
        "--no-samples", action="store_true",
        help="skip raw training/bootstrap sample dumps",
    )
    run_p.add_argument("--verbose", action="store_true")

    met_p = sub.add_parser("metrics", help="recompute and print the metric table")
    met_p.add_argument("run_dir")

    plot_p = sub.add_parser("plotdata", help="emit plot CSVs and render figures")
    plot_p.add_argument("run_dir")
    plot_p.add_argument("--no-figures", action="store_true")
    return parser


def _cmd_run(args) -> int:
    cfg = preset_config(args.preset, scale=args.scale, seed=args.seed)
    if args.replicates is not None:
        cfg["replicates"] = int(args.replicates)
    if args.no_samples:
        cfg["dump_samples"] = False
    if args.bounds_rule is not None and cfg["mode"] == "sequential":
        cfg["sequential"]["bounds_rule"] = (
            "basic-bootstrap" if args.bounds_rule == "basic" else "paper-literal"
        )
    cfg = apply_overrides(cfg, args.overrides)
    out_dir = args.out or f"runs/{cfg['preset']}-{cfg['scale']}-seed{cfg['seed']}"
    if args.verbose:
        print(f"running {cfg['preset']} ({cfg['scale']}, seed {cfg['seed']}) -> {out_dir}")
    bundle = run_experiment(cfg, out_dir)
    if args.verbose:
        print(f"wrote {out_dir}: {len(bundle['estimate_rows'])} estimate rows")
    if not bundle["converged_all"]:
        print(
            "warning: at least one replicate hit the iteration cap (NotConverged)",
            file=sys.stderr,
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _cmd_metrics(args) -> int:
    rows = recompute_metrics(args.run_dir)
    _, _, (met_cols, met_rows) = load_run(args.run_dir)
    print(",".join(met_cols))
    for row in rows:
        print(",".join(format_value(v) for v in row))
    stored = [",".join(r) for r in met_rows]
    fresh = [",".join(format_value(v) for v in row) for row in rows]
    if stored != fresh:
        print("mismatch: stored metrics.csv differs from recomputation", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_plotdata(args) -> int:
    written = emit_plotdata(args.run_dir)
    if not args.no_figures:
        written += render_figures(args.run_dir)
    for path in written:
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "metrics":
            return _cmd_metrics(args)
        return _cmd_plotdata(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (EstimError, OSError, ValueError, KeyError) as err:
        traceback.print_exc()
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
