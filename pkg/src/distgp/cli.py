"""Command-line interface.

Subcommands:

* ``synth``    -- run a synthetic scenario, write detail.csv / summary.csv
* ``flight``   -- run the airline-delay comparison, write flight_summary.csv
* ``plot``     -- emit plot-data CSVs and rendered PNG figures for one
                  replication
* ``selftest`` -- run the built-in invariant suite

Every run writes ``config.resolved`` (the fully resolved configuration)
next to its outputs, and ``synth``/``plot`` can render matplotlib
figures alongside the delimited files.
"""

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from . import harness, metrics
from .data import read_schema
from .errors import DistGPError
from .harness import ExperimentConfig, resolve_config
from .selftest import run_selftest


def _add_common_flags(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--methods", help="comma list from BM,M1,M2,M3,M4")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--kernel", choices=["matern", "se", "ibm"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--ell", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--scale-mode", dest="scale_mode", choices=["fixed", "mmle", "hier"])
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--threads", type=int)
    p.add_argument("--max-bm-n", dest="max_bm_n", type=int)


def _overrides(args):
    keys = [f.name for f in fields(ExperimentConfig)]
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _resolve(args, scenario=None):
    file_values = harness.read_config_file(args.config) if args.config else None
    return resolve_config(
        scenario=scenario or getattr(args, "scenario", None),
        file_values=file_values,
        overrides=_overrides(args),
    )


def _prepare_out(cfg, notes=()):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_resolved_config(cfg, out / "config.resolved", notes=notes)
    return out


def _emit_figures(cfg, out):
    """Plot data + rendered figures for replication 0 of the scenario."""
    from . import plotting

    tf = cfg.true_function()
    grid = metrics.uniform_grid(cfg.grid_size)
    data = harness.replication_data(cfg, 0, tf)
    posteriors = harness.replication_posteriors(cfg, data, 0)
    paths = {}
    for name in cfg.methods:
        entry = posteriors.get(name)
        if entry is None:
            continue
        csv_path = out / f"plotdata_{name}.csv"
        harness.emit_plot_data(entry[0], tf, grid, csv_path)
        plotting.render_figure(csv_path, out / f"figure_{name}.png", title=name)
        paths[name] = csv_path
    if len(paths) > 1:
        plotting.render_panel(paths, out / "figure_panel.png", title=cfg.scenario)
    return paths


def cmd_synth(args):
    cfg = _resolve(args)
    notes = ["aggregated variance rule: sum_k w_k(x)^2 sigma_k^2(x)"]
    out = _prepare_out(cfg, notes=notes)
    report = harness.run_experiment(cfg)
    report.write_detail(out / "detail.csv")
    report.write_summary(out / "summary.csv")
    for name, rep, reason in getattr(report, "skips", []):
        print(f"skipped {name} rep {rep}: {reason}")
    for fail in report.failures:
        print(f"FAILED {fail['method']} rep {fail['rep']} "
              f"(seed {fail['seed']}): {fail['error']}", file=sys.stderr)
    for row in report.summary():
        print(
            f"{row['method']:>3}  L2 {row['l2_mean']:.3f} ({row['l2_sd']:.3f})  "
            f"radius {row['radius_mean']:.3f}  coverage {row['coverage']:.2f}  "
            f"time {row['time_mean']:.2f}s"
        )
    if cfg.figures:
        _emit_figures(cfg, out)
    return 3 if report.failure_fraction > 0.10 else 0


def cmd_flight(args):
    cfg = _resolve(args, scenario="Flight")
    out = _prepare_out(cfg)
    schema = read_schema(args.schema) if args.schema else None
    rows, ingest = harness.run_flight(cfg, args.data, schema=schema)
    harness.write_flight_report(rows, out / "flight_summary.csv")
    print(f"parsed {ingest.rows_parsed} rows ({ingest.rows_dropped} dropped)")
    for row in rows:
        print(f"{row['method']:>3}  RMSE {row['rmse']:.2f}  "
              f"time {row['fit_seconds']:.1f}s")
    return 0


def cmd_plot(args):
    cfg = _resolve(args)
    out = _prepare_out(cfg)
    paths = _emit_figures(cfg, out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_selftest(args):
    return 1 if run_selftest() else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="distgp",
        description="Distributed Gaussian-process regression experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="run a synthetic scenario")
    p_synth.add_argument(
        "--scenario",
        choices=sorted(harness.SCENARIOS),
        help="named scenario supplying kernel/scale-mode/truth defaults",
    )
    _add_common_flags(p_synth)
    p_synth.add_argument("--figures", action="store_const", const=True, default=None,
                         help="also render PNG figures for replication 0")
    p_synth.set_defaults(func=cmd_synth)

    p_flight = sub.add_parser("flight", help="airline-delay comparison")
    p_flight.add_argument("--data", required=True, help="airline CSV path")
    p_flight.add_argument("--schema", help="column-mapping key=value file")
    p_flight.add_argument("--train-size", dest="train_size", type=int)
    p_flight.add_argument("--test-size", dest="test_size", type=int)
    _add_common_flags(p_flight)
    p_flight.set_defaults(func=cmd_flight)

    p_plot = sub.add_parser("plot", help="emit plot data and figures")
    p_plot.add_argument(
        "--scenario", choices=sorted(harness.SCENARIOS),
    )
    _add_common_flags(p_plot)
    p_plot.set_defaults(func=cmd_plot)

    p_self = sub.add_parser("selftest", help="run the invariant suite")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DistGPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
