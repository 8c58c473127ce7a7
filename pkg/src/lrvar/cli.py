"""Command-line interface.

Subcommands: ``simulate`` runs a simulation grid from a config file,
``fit`` fits one estimator to one dataset, ``rank-path`` emits a
slope-calibration path, ``forecast`` runs a forecasting task, and ``report``
re-aggregates an existing per-replication CSV. Exit codes: 0 success,
2 configuration error, 3 data error, 4 every replication failed.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .exceptions import (
    ConfigError,
    ContractionViolation,
    DataError,
    NoRankJump,
    NumericalFailure,
    SampleTooSmall,
)
from .experiments import (
    aggregate_records,
    build_estimator,
    emit_reports,
    estimator_name,
    grid_from_dict,
    load_replications_csv,
    load_series_csv,
    run_forecast_task,
    run_simulation_grid,
    task_from_dict,
    write_forecast_report,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ALL_FAILED = 4


def _load_json_file(path, what):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _estimator_config(arg):
    if arg is None:
        return {"kind": "rank-penalized", "penalty": "slope-heuristic"}
    text = arg.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"inline estimator config: invalid JSON: {exc}") from exc
    return _load_json_file(arg, "estimator config")


def _cmd_simulate(args):
    grid = grid_from_dict(_load_json_file(args.config, "grid config"))
    progress = None
    if not args.quiet:
        def progress(done, total):
            print(f"replication {done}/{total}", file=sys.stderr)
    reports = run_simulation_grid(grid, n_jobs=args.jobs, progress=progress)
    paths = emit_reports(reports, args.out, grid=grid)
    for report in reports:
        lam = f"{float(report.lam):g}"
        print(
            f"r0={report.r0} n={report.n} lambda={lam} estimator={report.estimator} "
            f"mean_excess={report.mean:.6g} failures={report.failures}/{len(report.records)}"
        )
    for path in paths:
        print(f"wrote {path}")
    if all(rep.failures == len(rep.records) for rep in reports):
        print("every replication failed", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def _cmd_fit(args):
    # Real-data subcommands center by default; set "center": false to opt out.
    config = dict(_estimator_config(args.estimator))
    config.setdefault("center", True)
    names, _, values = load_series_csv(args.data)
    est = build_estimator(config)
    start = time.perf_counter()
    est.fit(values)
    wall_ms = (time.perf_counter() - start) * 1000.0
    doc = est.fit_result(wall_ms=wall_ms).to_dict(include_matrix=not args.no_matrix)
    doc["name"] = estimator_name(config)
    doc["columns"] = names
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_rank_path(args):
    config = dict(_estimator_config(args.estimator))
    config.setdefault("center", True)
    if config.get("kind") not in ("rank-penalized", "nuclear"):
        raise ConfigError("rank-path needs a rank-penalized or nuclear estimator")
    if config.get("kind") == "rank-penalized":
        config.setdefault("penalty", "slope-heuristic")
        if config["penalty"] != "slope-heuristic":
            raise ConfigError("rank-path needs the slope-heuristic penalty")
    _, _, values = load_series_csv(args.data)
    est = build_estimator(config)
    est.fit(values)
    est.rank_path_.to_csv(args.out)
    print(f"wrote {args.out}")
    print(
        f"c_star={est.c_star_!r} working_constant={est.constant_!r} "
        f"selected_rank={est.rank_}"
    )
    return EXIT_OK


def _cmd_forecast(args):
    doc = _load_json_file(args.config, "forecast config")
    if args.iterated:
        doc = dict(doc, mode="iterated")
    task = task_from_dict(doc)
    report = run_forecast_task(task)
    paths = write_forecast_report(report, args.out)
    for name in sorted(report["mse"]):
        per_target = " ".join(
            f"{target}={report['mse'][name][target]:.6g}" for target in report["targets"]
        )
        print(f"estimator={name} {per_target}")
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_report(args):
    records = load_replications_csv(args.replications)
    reports = aggregate_records(records)
    paths = emit_reports(reports, args.out)
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lrvar",
        description="Low-rank vector autoregression: simulation, estimation, forecasting.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a simulation grid from a JSON config")
    p.add_argument("--config", required=True, help="grid config JSON path")
    p.add_argument("--out", required=True, help="output directory for reports")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit one estimator to one dataset")
    p.add_argument("--data", required=True, help="series CSV path")
    p.add_argument(
        "--estimator",
        help="estimator config: JSON file path or inline JSON (default: slope-penalized)",
    )
    p.add_argument("--out", default="-", help="output JSON path, - for stdout")
    p.add_argument("--no-matrix", action="store_true", help="omit the fitted matrix")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("rank-path", help="emit a slope-calibration rank path CSV")
    p.add_argument("--data", required=True, help="series CSV path")
    p.add_argument("--estimator", help="estimator config (rank-penalized or nuclear)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_rank_path)

    p = sub.add_parser("forecast", help="run a forecasting task from a JSON config")
    p.add_argument("--config", required=True, help="task config JSON path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--iterated", action="store_true", help="chain multi-step predictions")
    p.set_defaults(func=_cmd_forecast)

    p = sub.add_parser("report", help="re-aggregate an existing replications.csv")
    p.add_argument("--replications", required=True, help="replications.csv path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, SampleTooSmall, ContractionViolation, NoRankJump, NumericalFailure) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
