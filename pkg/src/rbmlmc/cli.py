"""Command line front end for the experiment harness.

Subcommands: ``levels`` (per-level bias/variance table), ``rmse``
(accuracy sweep of the adaptive estimator), ``fit`` (cost curve fit from
a sweep's CSV), and ``selftest`` (the exact invariant suite).  Output is
CSV by default or a JSON report with ``--format json``; files are
deterministic given the flags and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict

from .harness import (
    LEVELS_HEADER,
    RMSE_HEADER,
    ExperimentConfig,
    fit_cost_curve,
    parse_eps_grid,
    run_levels,
    run_rmse,
    write_report_json,
    write_rows_csv,
)
from .mlmc import NonConvergenceError
from .schemes import DRIVER_KINDS, SCHEME_KINDS, NumericalFailure
from .selftest import run_selftest

__all__ = ["cli_main", "main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbmlmc",
        description="Multilevel Monte Carlo for SDEs with random-number or random-bit drivers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--model", required=True, choices=("gbm", "ou", "cir"))
        p.add_argument("--scheme", default="auto", choices=("auto",) + SCHEME_KINDS)
        p.add_argument("--driver", default="classic", choices=DRIVER_KINDS)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--format", default="csv", choices=("csv", "json"))

    levels = sub.add_parser("levels", help="per-level bias/variance table")
    common(levels)
    levels.add_argument("--lmin", type=int, default=1)
    levels.add_argument("--lmax", type=int, required=True)
    levels.add_argument("--reps", type=int, default=20000, help="samples per level")
    levels.add_argument(
        "--fixed-l",
        type=int,
        default=None,
        help="fixed maximal level for the bit-iid/bit-bern drivers "
        "(default: lmax)",
    )

    rmse = sub.add_parser("rmse", help="accuracy sweep of the adaptive estimator")
    common(rmse)
    rmse.add_argument(
        "--eps",
        required=True,
        help="accuracy grid 'start:stop:count[log|lin]' or a single value",
    )
    rmse.add_argument("--reps", type=int, default=2000, help="repetitions per point")
    rmse.add_argument("--n-warm", type=int, default=1000)
    rmse.add_argument("--n-new", type=int, default=32)
    rmse.add_argument("--l-max", type=int, default=20)

    fit = sub.add_parser("fit", help="fit cost ~ kappa * rmse^-2 (ln 1/rmse)^gamma")
    fit.add_argument("--in", dest="infile", required=True, help="CSV from 'rmse'")
    fit.add_argument(
        "--cost",
        default="auto",
        choices=("auto", "bits", "numbers"),
        help="which cost column to fit (auto: whichever is nonzero)",
    )
    fit.add_argument("--out", default=None)
    fit.add_argument("--format", default="json", choices=("csv", "json"))

    sub.add_parser("selftest", help="run the exact invariant suite")
    return parser


def _emit(args, header, rows, config, started) -> None:
    wall = time.time() - started
    if args.format == "json":
        if args.out:
            write_report_json(args.out, config, rows, wall)
        else:
            json.dump(
                {"config": asdict(config), "rows": rows, "total_wall_seconds": wall},
                sys.stdout,
                indent=2,
            )
            sys.stdout.write("\n")
        return
    if args.out:
        write_rows_csv(args.out, header, rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else str(v) for v in (row[k] for k in header)])


def _cmd_levels(args) -> int:
    started = time.time()
    config = ExperimentConfig(
        model=args.model,
        scheme=args.scheme,
        driver=args.driver,
        levels=tuple(range(args.lmin, args.lmax + 1)),
        repetitions=args.reps,
        seed=args.seed,
        fixed_max_level=args.fixed_l,
    )
    rows = run_levels(config)
    _emit(args, LEVELS_HEADER, rows, config, started)
    return 0


def _cmd_rmse(args) -> int:
    started = time.time()
    config = ExperimentConfig(
        model=args.model,
        scheme=args.scheme,
        driver=args.driver,
        eps_grid=parse_eps_grid(args.eps),
        repetitions=args.reps,
        seed=args.seed,
        n_warm=args.n_warm,
        n_new=args.n_new,
        l_max=args.l_max,
    )
    rows = run_rmse(config)
    _emit(args, RMSE_HEADER, rows, config, started)
    return 0


def _cmd_fit(args) -> int:
    with open(args.infile, newline="") as handle:
        rows = list(csv.DictReader(handle))
    if not rows:
        print("fit: input file has no data rows", file=sys.stderr)
        return 1
    cost_key = args.cost
    if cost_key == "auto":
        bits = sum(float(r["cost_bits"]) for r in rows)
        cost_key = "bits" if bits > 0 else "numbers"
    points = [(float(r["rmse"]), float(r[f"cost_{cost_key}"])) for r in rows]
    fit = fit_cost_curve(points)
    payload = {"cost": cost_key, **asdict(fit)}
    if args.format == "csv":
        text_rows = [payload]
        header = ("cost", "kappa", "gamma", "residual")
        if args.out:
            write_rows_csv(args.out, header, text_rows)
        else:
            writer = csv.writer(sys.stdout)
            writer.writerow(header)
            writer.writerow([str(payload[k]) for k in header])
    else:
        text = json.dumps(payload, indent=2) + "\n"
        if args.out:
            with open(args.out, "w") as handle:
                handle.write(text)
        else:
            sys.stdout.write(text)
    return 0


def _cmd_selftest() -> int:
    results = run_selftest()
    failed = 0
    for result in results:
        status = "PASS" if result.ok else "FAIL"
        print(f"[{status}] {result.name}: {result.detail}")
        failed += 0 if result.ok else 1
    if failed:
        print(f"selftest: {failed} of {len(results)} checks failed", file=sys.stderr)
        return 1
    return 0


def cli_main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "levels":
            return _cmd_levels(args)
        if args.command == "rmse":
            return _cmd_rmse(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "selftest":
            return _cmd_selftest()
    except (NumericalFailure, NonConvergenceError, ValueError) as exc:
        print(f"rbmlmc: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


def main() -> None:
    sys.exit(cli_main())
