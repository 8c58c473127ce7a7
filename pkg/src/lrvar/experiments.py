"""Simulation-grid and forecasting harnesses with deterministic seeding.

The grid harness replays the simulation protocol: for every cell
(true rank, trajectory length, singular-value law) and replication it draws a
transition matrix, a training trajectory and an independent fresh trajectory,
fits every configured estimator on the same training data, and scores the
excess one-step risk on the fresh trajectory. Seeds derive deterministically
from (seed_base, cell, replication), so identical configurations produce
identical reports.
"""

import csv
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimators import (
    ConstantTrend,
    DiagonalPlusLowRankVAR,
    FixedRankVAR,
    FullRankVAR,
    IndependentAR1,
    NuclearNormVAR,
    RankPenalizedVAR,
)
from .exceptions import ConfigError, DataError
from .process import NOISE_FAMILIES, NoiseSpec, TransitionSpec, generate_transition, simulate
from .risk import PenaltyConstants, excess_risk

__all__ = [
    "SimulationGrid",
    "ReplicationRecord",
    "CellReport",
    "ForecastTask",
    "build_estimator",
    "grid_from_dict",
    "task_from_dict",
    "run_simulation_grid",
    "emit_reports",
    "load_series_csv",
    "run_forecast_task",
    "REPLICATION_COLUMNS",
]

REPLICATION_COLUMNS = (
    "r0",
    "n",
    "lambda",
    "estimator",
    "replication",
    "seed",
    "excess_risk",
    "selected_rank",
    "wall_ms",
)

AGGREGATE_COLUMNS = (
    "r0",
    "n",
    "lambda",
    "estimator",
    "replications",
    "failures",
    "mean",
    "std",
    "q05",
    "q25",
    "q50",
    "q75",
    "q95",
)


# ---------------------------------------------------------------------------
# configuration types


@dataclass(frozen=True)
class SimulationGrid:
    """Declarative description of a simulation study."""

    m_dim: int
    ranks: tuple
    lengths: tuple
    lambdas: tuple
    replications: int
    seed_base: int
    estimators: tuple
    spectral_bound: float = 1.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    loss: str = "squared-euclidean"

    def __post_init__(self):
        if self.m_dim < 1:
            raise ConfigError("m_dim must be at least 1")
        if not self.ranks or any(not 1 <= int(r) <= self.m_dim for r in self.ranks):
            raise ConfigError("every rank must lie in [1, m_dim]")
        if not self.lengths or any(int(n) < 2 for n in self.lengths):
            raise ConfigError("every trajectory length must be at least 2")
        if not self.lambdas or any(float(v) <= 0 for v in self.lambdas):
            raise ConfigError("every lambda must be positive")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        names = [spec.get("name", spec.get("kind")) for spec in self.estimators]
        if len(set(names)) != len(names):
            raise ConfigError(f"estimator names must be unique, got {names}")
        for spec in self.estimators:
            _check_estimator_config(spec)


@dataclass(frozen=True)
class ReplicationRecord:
    """One estimator's outcome on one replication of one cell."""

    r0: int
    n: int
    lam: float
    estimator: str
    replication: int
    seed: int
    excess_risk: float
    selected_rank: int
    wall_ms: float
    converged: bool
    failure: str | None = None

    @property
    def failed(self):
        return self.failure is not None

    def csv_row(self):
        shown = float("nan") if self.failed else self.excess_risk
        return [
            str(self.r0),
            str(self.n),
            repr(float(self.lam)),
            self.estimator,
            str(self.replication),
            str(self.seed),
            repr(float(shown)),
            str(self.selected_rank),
            repr(float(self.wall_ms)),
        ]


@dataclass(frozen=True)
class CellReport:
    """Aggregate over the replications of one (cell, estimator) pair."""

    r0: int
    n: int
    lam: float
    estimator: str
    records: tuple
    mean: float
    std: float
    quantiles: tuple
    failures: int

    @classmethod
    def from_records(cls, records):
        head = records[0]
        values = [r.excess_risk for r in records if not r.failed]
        failures = sum(1 for r in records if r.failed)
        if values:
            arr = np.asarray(values, dtype=float)
            mean = float(arr.mean())
            std = float(arr.std(ddof=1)) if arr.size > 1 else float("nan")
            qs = tuple(float(q) for q in np.quantile(arr, [0.05, 0.25, 0.5, 0.75, 0.95]))
        else:
            mean = std = float("nan")
            qs = (float("nan"),) * 5
        return cls(
            r0=head.r0,
            n=head.n,
            lam=head.lam,
            estimator=head.estimator,
            records=tuple(records),
            mean=mean,
            std=std,
            quantiles=qs,
            failures=failures,
        )

    def csv_row(self):
        return [
            str(self.r0),
            str(self.n),
            repr(float(self.lam)),
            self.estimator,
            str(len(self.records)),
            str(self.failures),
            repr(float(self.mean)),
            repr(float(self.std)),
            *[repr(float(q)) for q in self.quantiles],
        ]

    def to_dict(self):
        return {
            "r0": self.r0,
            "n": self.n,
            "lambda": float(self.lam),
            "estimator": self.estimator,
            "replications": len(self.records),
            "failures": self.failures,
            "mean": float(self.mean),
            "std": float(self.std),
            "quantiles": {
                "q05": self.quantiles[0],
                "q25": self.quantiles[1],
                "q50": self.quantiles[2],
                "q75": self.quantiles[3],
                "q95": self.quantiles[4],
            },
            "excess_risks": [float(r.excess_risk) for r in self.records],
            "selected_ranks": [int(r.selected_rank) for r in self.records],
            "converged": [bool(r.converged) for r in self.records],
            "failure_messages": [r.failure for r in self.records if r.failed],
        }


@dataclass(frozen=True)
class ForecastTask:
    """Declarative description of a real-data forecasting exercise."""

    dataset: str
    target_columns: tuple
    train_end: object
    horizon: int | None
    estimators: tuple
    mode: str = "rolling"

    def __post_init__(self):
        if not self.target_columns:
            raise ConfigError("target_columns must not be empty")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon must be at least 1")
        if self.mode not in ("rolling", "iterated"):
            raise ConfigError(f"mode must be 'rolling' or 'iterated', got {self.mode!r}")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        names = [spec.get("name", spec.get("kind")) for spec in self.estimators]
        if len(set(names)) != len(names):
            raise ConfigError(f"estimator names must be unique, got {names}")
        for spec in self.estimators:
            _check_estimator_config(spec)


# ---------------------------------------------------------------------------
# estimator construction from declarative configs

_COMMON_KEYS = {"name", "kind"}
_OPTIMIZER_KEYS = {"rho", "loss", "center", "tol", "max_iter", "random_state"}
_KIND_KEYS = {
    "full-rank": _OPTIMIZER_KEYS,
    "fixed-rank": _OPTIMIZER_KEYS | {"rank", "n_restarts"},
    "rank-penalized": _OPTIMIZER_KEYS
    | {"penalty", "constant", "constants", "candidate_ranks", "n_restarts", "grid_points"},
    "nuclear": _OPTIMIZER_KEYS | {"constant", "grid_points"},
    "d-plus-a": {"inner", "loss", "center"},
    "independent-ar1": {"center"},
    "constant-trend": {"center"},
}
_INNER_KINDS = ("full-rank", "fixed-rank", "rank-penalized", "nuclear")


def _check_estimator_config(config, inner=False):
    if not isinstance(config, dict):
        raise ConfigError(f"estimator config must be a mapping, got {type(config).__name__}")
    kind = config.get("kind")
    if kind not in _KIND_KEYS:
        raise ConfigError(
            f"unknown estimator kind {kind!r}; expected one of {sorted(_KIND_KEYS)}"
        )
    if inner and kind not in _INNER_KINDS:
        raise ConfigError(f"d-plus-a inner estimator cannot be {kind!r}")
    allowed = _COMMON_KEYS | _KIND_KEYS[kind]
    unknown = set(config) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} for estimator kind {kind!r}")
    if kind == "fixed-rank" and "rank" not in config:
        raise ConfigError("fixed-rank estimator needs a 'rank'")
    if kind == "d-plus-a" and "inner" in config:
        _check_estimator_config(config["inner"], inner=True)
    if "constants" in config and config["constants"] is not None:
        _penalty_constants(config["constants"])


def _penalty_constants(doc):
    if isinstance(doc, PenaltyConstants):
        return doc
    if not isinstance(doc, dict):
        raise ConfigError("penalty constants must be a mapping with keys c, d, rho")
    unknown = set(doc) - {"c", "d", "rho"}
    if unknown:
        raise ConfigError(f"unknown penalty-constant keys {sorted(unknown)}")
    return PenaltyConstants(**{k: float(v) for k, v in doc.items()})


def _resolve_rank(value, true_rank):
    if value == "r0":
        if true_rank is None:
            raise ConfigError("rank 'r0' is only meaningful inside a simulation grid")
        return int(true_rank)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"rank must be an integer or 'r0', got {value!r}")
    if int(value) != value:
        raise ConfigError(f"rank must be an integer, got {value!r}")
    return int(value)


def build_estimator(config, true_rank=None, random_state=None):
    """Instantiate an estimator from a declarative config mapping.

    ``true_rank`` resolves the ``"r0"`` rank sentinel inside simulation grids;
    ``random_state`` (when given) overrides any seed in the config, which is
    how the grid harness injects its per-replication streams.
    """
    _check_estimator_config(config)
    kind = config["kind"]
    opts = {k: v for k, v in config.items() if k not in ("name", "kind")}
    if random_state is not None and kind not in ("d-plus-a", "independent-ar1", "constant-trend"):
        opts["random_state"] = random_state
    if kind == "full-rank":
        return FullRankVAR(**opts)
    if kind == "fixed-rank":
        opts["rank"] = _resolve_rank(opts["rank"], true_rank)
        return FixedRankVAR(**opts)
    if kind == "rank-penalized":
        if opts.get("constants") is not None:
            opts["constants"] = _penalty_constants(opts["constants"])
        return RankPenalizedVAR(**opts)
    if kind == "nuclear":
        return NuclearNormVAR(**opts)
    if kind == "d-plus-a":
        inner_cfg = opts.pop("inner", None)
        if inner_cfg is not None:
            opts["inner"] = build_estimator(inner_cfg, true_rank=true_rank, random_state=random_state)
        elif random_state is not None:
            opts["inner"] = RankPenalizedVAR(random_state=random_state)
        return DiagonalPlusLowRankVAR(**opts)
    if kind == "independent-ar1":
        return IndependentAR1(**opts)
    return ConstantTrend(**opts)


def estimator_name(config):
    return config.get("name", config["kind"])


# ---------------------------------------------------------------------------
# config documents


def _strict_keys(doc, required, optional, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a mapping")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"{where}: missing required keys {sorted(missing)}")
    unknown = set(doc) - required - optional
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _noise_from_dict(doc):
    _strict_keys(doc, set(), {"family", "sigma", "bound"}, "noise")
    try:
        spec = NoiseSpec(**doc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if spec.family not in NOISE_FAMILIES:
        raise ConfigError(f"unknown noise family {spec.family!r}")
    return spec


def grid_from_dict(doc):
    """Build a :class:`SimulationGrid` from a JSON-compatible mapping."""
    _strict_keys(
        doc,
        {"m_dim", "ranks", "lengths", "lambdas", "replications", "seed_base", "estimators"},
        {"spectral_bound", "noise", "loss"},
        "simulation grid",
    )
    noise = _noise_from_dict(doc.get("noise", {}))
    try:
        return SimulationGrid(
            m_dim=int(doc["m_dim"]),
            ranks=tuple(int(r) for r in doc["ranks"]),
            lengths=tuple(int(n) for n in doc["lengths"]),
            lambdas=tuple(float(v) for v in doc["lambdas"]),
            replications=int(doc["replications"]),
            seed_base=int(doc["seed_base"]),
            estimators=tuple(doc["estimators"]),
            spectral_bound=float(doc.get("spectral_bound", 1.0)),
            noise=noise,
            loss=doc.get("loss", "squared-euclidean"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid simulation grid: {exc}") from exc


def task_from_dict(doc):
    """Build a :class:`ForecastTask` from a JSON-compatible mapping."""
    _strict_keys(
        doc,
        {"dataset", "target_columns", "train_end", "estimators"},
        {"horizon", "mode"},
        "forecast task",
    )
    horizon = doc.get("horizon")
    return ForecastTask(
        dataset=str(doc["dataset"]),
        target_columns=tuple(str(c) for c in doc["target_columns"]),
        train_end=doc["train_end"],
        horizon=None if horizon is None else int(horizon),
        estimators=tuple(doc["estimators"]),
        mode=doc.get("mode", "rolling"),
    )


# ---------------------------------------------------------------------------
# simulation grid execution


def _lambda_bits(lam):
    return int(np.float64(lam).view(np.uint64))


def _replication_seeds(grid, r0, n, lam, rep):
    root = np.random.SeedSequence(
        (grid.seed_base, int(r0), int(n), _lambda_bits(lam), int(rep))
    )
    fingerprint = int(root.generate_state(1, np.uint64)[0])
    return root.spawn(4), fingerprint


def _run_replication(grid, r0, n, lam, rep):
    """Fit every configured estimator on one simulated replication."""
    (a_seq, train_seq, fresh_seq, fit_seq), fingerprint = _replication_seeds(
        grid, r0, n, lam, rep
    )
    spec = TransitionSpec(
        dimension=grid.m_dim,
        true_rank=r0,
        singular_law=lam,
        spectral_bound=grid.spectral_bound,
    )
    a = generate_transition(spec, np.random.default_rng(a_seq))
    train = simulate(a, grid.noise, n, np.random.default_rng(train_seq))
    fresh = simulate(a, grid.noise, n, np.random.default_rng(fresh_seq))
    fit_streams = fit_seq.spawn(len(grid.estimators))
    records = []
    for config, stream in zip(grid.estimators, fit_streams):
        name = estimator_name(config)
        start = time.perf_counter()
        try:
            est = build_estimator(
                config, true_rank=r0, random_state=np.random.default_rng(stream)
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est.fit(train)
            wall_ms = (time.perf_counter() - start) * 1000.0
            excess = excess_risk(est.coef_, a, fresh, grid.loss)
            failure = None if est.converged_ else "not-converged"
            records.append(
                ReplicationRecord(
                    r0=r0,
                    n=n,
                    lam=lam,
                    estimator=name,
                    replication=rep,
                    seed=fingerprint,
                    excess_risk=excess,
                    selected_rank=int(est.rank_),
                    wall_ms=wall_ms,
                    converged=bool(est.converged_),
                    failure=failure,
                )
            )
        except ConfigError:
            raise
        except Exception as exc:  # recorded, not fatal, per the harness contract
            wall_ms = (time.perf_counter() - start) * 1000.0
            records.append(
                ReplicationRecord(
                    r0=r0,
                    n=n,
                    lam=lam,
                    estimator=name,
                    replication=rep,
                    seed=fingerprint,
                    excess_risk=float("nan"),
                    selected_rank=-1,
                    wall_ms=wall_ms,
                    converged=False,
                    failure=f"{type(exc).__name__}: {exc}",
                )
            )
    return records


def run_simulation_grid(grid, n_jobs=1, progress=None):
    """Run every (cell, replication) of the grid and aggregate per cell.

    Returns a list of :class:`CellReport`, one per (r0, n, lambda, estimator)
    in declared order. ``n_jobs > 1`` fans replications out to a process
    pool; results are reduced in deterministic declared order either way.
    ``progress`` may be a callable taking (done, total).
    """
    work = [
        (r0, n, lam, rep)
        for r0 in grid.ranks
        for n in grid.lengths
        for lam in grid.lambdas
        for rep in range(grid.replications)
    ]
    results = {}
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for key, records in zip(
                work, pool.map(_run_replication, *zip(*[(grid,) + w for w in work]))
            ):
                results[key] = records
                if progress:
                    progress(len(results), len(work))
    else:
        for key in work:
            results[key] = _run_replication(grid, *key)
            if progress:
                progress(len(results), len(work))
    reports = []
    for r0 in grid.ranks:
        for n in grid.lengths:
            for lam in grid.lambdas:
                per_estimator = {estimator_name(c): [] for c in grid.estimators}
                for rep in range(grid.replications):
                    for record in results[(r0, n, lam, rep)]:
                        per_estimator[record.estimator].append(record)
                for name in per_estimator:
                    reports.append(CellReport.from_records(per_estimator[name]))
    return reports


# ---------------------------------------------------------------------------
# report emission


def _format_lambda(lam):
    return f"{float(lam):g}"


def emit_reports(reports, out_dir, grid=None):
    """Write replications.csv, aggregate.csv, dispersion CSVs and report.json.

    Timing lives only in replications.csv; the other files are byte-identical
    across repeated runs of the same configuration.
    """
    out_dir = _ensure_dir(out_dir)
    paths = []
    paths.append(_write_csv(
        out_dir / "replications.csv",
        REPLICATION_COLUMNS,
        [rec.csv_row() for rep in reports for rec in rep.records],
    ))
    paths.append(_write_csv(
        out_dir / "aggregate.csv", AGGREGATE_COLUMNS, [rep.csv_row() for rep in reports]
    ))
    cells = sorted({(r.n, r.lam) for r in reports}, key=lambda c: (c[0], c[1]))
    for n, lam in cells:
        rows = [
            [rec.estimator, str(rec.r0), str(rec.replication), repr(float(rec.excess_risk))]
            for rep in reports
            if rep.n == n and rep.lam == lam
            for rec in rep.records
            if not rec.failed
        ]
        paths.append(_write_csv(
            out_dir / f"dispersion_n{n}_lambda{_format_lambda(lam)}.csv",
            ("estimator", "r0", "replication", "excess_risk"),
            rows,
        ))
    doc = {"cells": [rep.to_dict() for rep in reports]}
    if grid is not None:
        doc["grid"] = _grid_echo(grid)
    path = out_dir / "report.json"
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    paths.append(path)
    return paths


def _grid_echo(grid):
    return {
        "m_dim": grid.m_dim,
        "ranks": list(grid.ranks),
        "lengths": list(grid.lengths),
        "lambdas": [float(v) for v in grid.lambdas],
        "replications": grid.replications,
        "seed_base": grid.seed_base,
        "estimators": list(grid.estimators),
        "spectral_bound": float(grid.spectral_bound),
        "noise": {
            "family": grid.noise.family,
            "sigma": float(grid.noise.sigma),
            "bound": float(grid.noise.bound),
        },
        "loss": grid.loss if isinstance(grid.loss, str) else repr(grid.loss),
    }


def _ensure_dir(out_dir):
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out_dir}: {exc}") from exc
    return out_dir


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return path


def load_replications_csv(path):
    """Read a replications.csv back into :class:`ReplicationRecord` rows."""
    records = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != REPLICATION_COLUMNS:
                raise DataError(
                    f"{path}: expected header {','.join(REPLICATION_COLUMNS)}"
                )
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(REPLICATION_COLUMNS):
                    raise DataError(f"{path}:{lineno}: expected {len(REPLICATION_COLUMNS)} fields")
                try:
                    excess = float(row[6])
                    records.append(
                        ReplicationRecord(
                            r0=int(row[0]),
                            n=int(row[1]),
                            lam=float(row[2]),
                            estimator=row[3],
                            replication=int(row[4]),
                            seed=int(row[5]),
                            excess_risk=excess,
                            selected_rank=int(row[7]),
                            wall_ms=float(row[8]),
                            converged=not math.isnan(excess),
                            failure=None if not math.isnan(excess) else "recorded-failure",
                        )
                    )
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return records


def aggregate_records(records):
    """Group replication records into CellReports.

    Cells keep their first-appearance order from the record stream, so
    re-aggregating a replications.csv reproduces the original aggregate files
    byte for byte.
    """
    groups = {}
    for rec in records:
        groups.setdefault((rec.r0, rec.n, rec.lam, rec.estimator), []).append(rec)
    reports = []
    for rows in groups.values():
        reports.append(CellReport.from_records(sorted(rows, key=lambda r: r.replication)))
    return reports


# ---------------------------------------------------------------------------
# real-data forecasting


def load_series_csv(path):
    """Read a multivariate series CSV: header of names, rows oldest first.

    An optional leading ``date`` (or ``t``) column is returned separately.
    Rows with missing (empty) cells are dropped with a warning carrying the
    count; non-numeric cells raise :class:`DataError` with the line number.
    Returns ``(names, dates, values)`` where dates is None when absent.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header:
                raise DataError(f"{path}: empty file, expected a header row")
            header = [h.strip() for h in header]
            has_dates = header and header[0].lower() in ("date", "t")
            names = header[1:] if has_dates else header
            if not names:
                raise DataError(f"{path}: no series columns in header")
            dates = [] if has_dates else None
            rows = []
            dropped = 0
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise DataError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                cells = row[1:] if has_dates else row
                if any(c.strip() == "" for c in cells):
                    dropped += 1
                    continue
                try:
                    values = [float(c) for c in cells]
                except ValueError:
                    bad = next(c for c in cells if not _is_float(c))
                    raise DataError(f"{path}:{lineno}: non-numeric cell {bad!r}") from None
                rows.append(values)
                if has_dates:
                    dates.append(row[0])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if dropped:
        warnings.warn(
            f"{path}: dropped {dropped} row(s) with missing values",
            RuntimeWarning,
            stacklevel=2,
        )
    if not rows:
        raise DataError(f"{path}: no complete data rows")
    return names, dates, np.asarray(rows, dtype=float)


def _is_float(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _resolve_train_end(train_end, dates, n_rows, path):
    if isinstance(train_end, bool):
        raise ConfigError("train_end must be an integer row count or a date string")
    if isinstance(train_end, (int, float)) and int(train_end) == train_end:
        idx = int(train_end)
        if idx < 0:
            idx += n_rows
        if not 2 <= idx < n_rows:
            raise ConfigError(
                f"train_end row {train_end} leaves no valid train/test split of {n_rows} rows"
            )
        return idx
    if isinstance(train_end, str):
        if dates is None:
            raise ConfigError(f"train_end {train_end!r} is a date but {path} has no date column")
        try:
            # Training includes the named date.
            return dates.index(train_end) + 1
        except ValueError:
            raise ConfigError(f"train_end date {train_end!r} not found in {path}") from None
    raise ConfigError(f"train_end must be an integer or date string, got {train_end!r}")


def run_forecast_task(task):
    """Fit every estimator on the training window and score test predictions.

    Estimators are fitted on the mean-centered training window (the harness
    passes ``center=True`` regardless of config). ``rolling`` mode predicts
    each test step from the previous observed value; ``iterated`` mode chains
    predictions from the last training row. MSEs are reported per target in
    original units.
    """
    names, dates, values = load_series_csv(task.dataset)
    targets = list(task.target_columns)
    missing = [t for t in targets if t not in names]
    if missing:
        raise ConfigError(f"target columns {missing} not in dataset columns {names}")
    t_end = _resolve_train_end(task.train_end, dates, values.shape[0], task.dataset)
    available = values.shape[0] - t_end
    horizon = available if task.horizon is None else task.horizon
    if horizon > available:
        raise ConfigError(
            f"horizon {horizon} exceeds the {available} rows after the training window"
        )
    train = values[:t_end]
    target_idx = [names.index(t) for t in targets]
    estimators = {}
    predictions = {}
    for config in task.estimators:
        name = estimator_name(config)
        est = build_estimator(config)
        est.set_params(center=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            est.fit(train)
        estimators[name] = est
        if task.mode == "rolling":
            # Each test step is predicted from the observed previous row.
            sources = values[t_end - 1 : t_end + horizon - 1]
            predictions[name] = est.predict(sources)
        else:
            preds = np.empty((horizon, values.shape[1]))
            state = values[t_end - 1]
            for h in range(horizon):
                state = est.predict(state[None, :])[0]
                preds[h] = state
            predictions[name] = preds
    actual = values[t_end : t_end + horizon]
    mse = {
        name: {
            t: float(np.mean((predictions[name][:, j] - actual[:, j]) ** 2))
            for t, j in zip(targets, target_idx)
        }
        for name in predictions
    }
    return {
        "dataset": task.dataset,
        "mode": task.mode,
        "train_rows": int(t_end),
        "horizon": int(horizon),
        "targets": targets,
        "mse": mse,
        "selected_ranks": {name: int(est.rank_) for name, est in estimators.items()},
        "dates": None if dates is None else dates[t_end : t_end + horizon],
        "predictions": {name: predictions[name][:, target_idx].tolist() for name in predictions},
        "actuals": actual[:, target_idx].tolist(),
    }


def write_forecast_report(report, out_dir):
    """Write forecast_report.json and predictions.csv under out_dir."""
    out_dir = _ensure_dir(out_dir)
    json_path = out_dir / "forecast_report.json"
    try:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise DataError(f"cannot write {json_path}: {exc}") from exc
    rows = []
    dates = report["dates"]
    for name in sorted(report["predictions"]):
        preds = report["predictions"][name]
        for h, row in enumerate(preds):
            for j, target in enumerate(report["targets"]):
                rows.append(
                    [
                        name,
                        str(h),
                        "" if dates is None else dates[h],
                        target,
                        repr(float(row[j])),
                        repr(float(report["actuals"][h][j])),
                    ]
                )
    csv_path = _write_csv(
        out_dir / "predictions.csv",
        ("estimator", "step", "date", "target", "prediction", "actual"),
        rows,
    )
    return [json_path, csv_path]
