"""Command-line front end.

Subcommands: simulate | fit | forecast | diagnose | mc.  Every randomized
command takes an explicit --seed (omitting it is an error, to keep runs
reproducible).  Exit codes: 0 success, 2 usage, 3 data validation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .diagnostics import diagnose
from .errors import DataValidationError, NumericalError
from .estimation import fit
from .forecasting import forecast
from .model_io import (
    forecast_summary_dict,
    load_design,
    load_model,
    read_csv,
    save_json,
    write_csv,
    write_forecast_paths_csv,
)
from .montecarlo import run_mc
from .simulation import RngSpec, simulate_varta

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    model = load_model(args.config)
    data = simulate_varta(model, args.n, RngSpec(seed=args.seed))
    write_csv(data, args.out)
    print(f"wrote {data.n} x {data.p} series to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_csv(args.data)
    families = args.families.split(",")
    if len(families) == 1:
        families = families * data.p
    result = fit(data, args.k, families)
    print(result.format_table())
    if args.out:
        save_json(result.to_dict(), args.out)
        print(f"wrote fit result to {args.out}")
    if not result.converged:
        print("warning: optimizer did not converge", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_forecast(args) -> int:
    if args.horizon < 1:
        raise UsageError("--horizon must be >= 1")
    if args.paths < 1:
        raise UsageError("--paths must be >= 1")
    model = load_model(args.model)
    data = read_csv(args.data)
    fr = forecast(model, data, args.horizon, args.paths, RngSpec(seed=args.seed))
    out = Path(args.out)
    paths_file = out.with_suffix(".paths.csv")
    summary_file = out.with_suffix(".summary.json")
    write_forecast_paths_csv(fr, paths_file)
    save_json(forecast_summary_dict(fr), summary_file)
    print(f"wrote {fr.n_paths} paths x {fr.horizon} horizons to {paths_file}")
    print(f"wrote summary to {summary_file}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    model = load_model(args.model)
    data = read_csv(args.data)
    report = diagnose(model, data)
    print(report.format_text())
    if args.out:
        save_json(report.to_dict(), args.out)
        print(f"wrote report to {args.out}")
    return EXIT_OK


def cmd_mc(args) -> int:
    design = load_design(args.design)
    report = run_mc(design, n_jobs=args.jobs)
    print(report.format_text())
    if args.out:
        save_json(report.to_dict(), args.out)
        print(f"wrote report to {args.out}")
    return EXIT_OK


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varta",
        description="Latent Gaussian VAR with arbitrary continuous marginals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate a series from a model")
    p_sim.add_argument("--config", required=True, help="model JSON")
    p_sim.add_argument("--n", type=int, required=True, help="series length")
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out", required=True, help="output CSV")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="maximum likelihood fit")
    p_fit.add_argument("--data", required=True, help="input CSV")
    p_fit.add_argument("--k", type=int, default=1, help="autoregressive order")
    p_fit.add_argument(
        "--families", required=True,
        help="comma-separated marginal families (weibull|gaussian|empirical); "
             "a single value applies to all columns",
    )
    p_fit.add_argument("--out", help="output JSON for the fit result")
    p_fit.set_defaults(func=cmd_fit)

    p_fc = sub.add_parser("forecast", help="simulation-based forecasts")
    p_fc.add_argument("--model", required=True, help="model or fit-result JSON")
    p_fc.add_argument("--data", required=True, help="input CSV")
    p_fc.add_argument("--horizon", type=int, required=True)
    p_fc.add_argument("--paths", type=int, default=1000)
    p_fc.add_argument("--seed", type=int, required=True)
    p_fc.add_argument("--out", required=True,
                      help="output stem; writes <out>.paths.csv and "
                           "<out>.summary.json")
    p_fc.set_defaults(func=cmd_forecast)

    p_diag = sub.add_parser("diagnose", help="residual diagnostics")
    p_diag.add_argument("--model", required=True, help="model or fit-result JSON")
    p_diag.add_argument("--data", required=True, help="input CSV")
    p_diag.add_argument("--out", help="output JSON")
    p_diag.set_defaults(func=cmd_diagnose)

    p_mc = sub.add_parser("mc", help="coverage/RMSE replication study")
    p_mc.add_argument("--design", required=True, help="design JSON")
    p_mc.add_argument("--out", help="output JSON")
    p_mc.add_argument("--jobs", type=int, default=1, help="worker processes")
    p_mc.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
