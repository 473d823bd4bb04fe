"""Command line interface.

Subcommands:

* ``hetcoint simulate --grid grid.toml --out table.csv [--jobs N] [--seed S]``
  runs a Monte Carlo grid and writes a rejection-rate table.
* ``hetcoint test --data file.csv --regressand e --regressor y ...``
  runs the cointegration test battery on one data file.
* ``hetcoint profile --data file.csv --regressand e --regressor y ...``
  writes the empirical variance profile of the regression residuals.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .application import (
    ekc_model,
    ekc_pipeline,
    emit_profile,
    ingest_csv,
    variance_profile,
)
from .estimate import fit_model
from .mc import GridSpec, TestConfig, emit_table, run_grid


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetcoint",
        description="Residual-based cointegration tests under variance breaks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo rejection-rate grid")
    sim.add_argument("--grid", required=True, help="TOML grid description")
    sim.add_argument("--out", required=True, help="output table path")
    sim.add_argument("--jobs", type=int, default=1, help="worker processes")
    sim.add_argument("--seed", type=int, default=None, help="override master seed")
    sim.add_argument(
        "--format", choices=("csv", "json", "text"), default=None,
        help="output format (default: by file extension, csv otherwise)",
    )
    sim.add_argument(
        "--checkpoint", default=None,
        help="checkpoint file (default: <out>.checkpoint.jsonl)",
    )
    sim.add_argument("--quiet", action="store_true", help="suppress per-cell progress")

    tst = sub.add_parser("test", help="test one dataset for cointegration")
    _add_data_args(tst)
    tst.add_argument("--method", choices=("bootstrap", "all"), default="all",
                     help="'bootstrap' skips the leads-and-lags and subresidual runs")
    tst.add_argument("--B", type=int, default=2000, help="bootstrap replications")
    tst.add_argument("--K", type=int, default=1, help="leads-and-lags order")
    tst.add_argument("--alpha", type=float, default=0.05)
    tst.add_argument("--block", default="auto",
                     help="subresidual block length ('auto' = minimum volatility rule)")
    tst.add_argument("--seed", type=int, default=0)
    tst.add_argument("--out", default=None, help="write the JSON report here (default: stdout)")

    prof = sub.add_parser("profile", help="emit the empirical variance profile")
    _add_data_args(prof)
    prof.add_argument("--points", type=int, default=512, help="profile grid points")
    prof.add_argument("--out", default=None, help="output CSV (default: stdout)")
    return parser


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV with a 'year' column")
    p.add_argument("--regressand", required=True, help="column regressed on the other")
    p.add_argument("--regressor", required=True, help="column entering as a cubic")
    p.add_argument("--label-column", default=None, help="column holding group labels")
    p.add_argument("--label", default=None, help="select one group")
    p.add_argument("--year-column", default="year")
    p.add_argument("--log", action="store_true", help="log-transform both series")
    p.add_argument("--model", choices=("cubic",), default="cubic")
    p.add_argument("--trend", action="store_true", default=True,
                   help="include a linear trend (default on)")
    p.add_argument("--swap", action="store_true",
                   help="swap the regression orientation")


def _load_series(args):
    data = ingest_csv(
        args.data,
        value_columns=[args.regressand, args.regressor],
        label_column=args.label_column,
        label=args.label,
        year_column=args.year_column,
        log_transform=args.log,
    )
    return data, data.series[args.regressand], data.series[args.regressor]


def _cmd_simulate(args) -> int:
    grid = GridSpec.from_toml(args.grid)
    if args.seed is not None:
        grid = dataclasses.replace(grid, master_seed=args.seed)
    fmt = args.format
    if fmt is None:
        ext = Path(args.out).suffix.lower().lstrip(".")
        fmt = ext if ext in ("csv", "json", "text") else "csv"
    checkpoint = args.checkpoint or (args.out + ".checkpoint.jsonl")
    table = run_grid(grid, jobs=args.jobs, checkpoint=checkpoint, progress=not args.quiet)
    Path(args.out).write_text(emit_table(table, fmt))
    if not args.quiet:
        print(f"wrote {len(table.cells)} cells to {args.out}")
    return 0


def _cmd_test(args) -> int:
    data, e, y = _load_series(args)
    cfg = TestConfig(B=args.B, alpha=args.alpha, lrv="bartlett", K=args.K, block=args.block)
    report = ekc_pipeline(
        e, y, cfg, seed=args.seed, label=data.label, swap_orientation=args.swap
    )
    if args.method == "bootstrap":
        for k in ("p_bootstrap_leads_lags", "p_subresidual", "subresidual_block"):
            report.pop(k, None)
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote report to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_profile(args) -> int:
    data, e, y = _load_series(args)
    regressand, regressor = (y, e) if args.swap else (e, y)
    spec = ekc_model()
    tidx = np.arange(1, regressand.size + 1)
    fit = fit_model(spec, regressor, regressand, estimator="auto", t=tidx)
    prof = variance_profile(fit.residuals, args.points)
    text = emit_profile(prof, "csv")
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote profile to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "simulate":
        return _cmd_simulate(args)
    if args.command == "test":
        return _cmd_test(args)
    if args.command == "profile":
        return _cmd_profile(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
