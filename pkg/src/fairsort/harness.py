"""Experiment harness and command line entry point.

An experiment is described by a flat JSON config (every key can be
overridden by a CLI flag), names one list model and one scenario, and
sweeps the requested K values.  Offline serves each user once; online
replays a shuffled trace of ``rounds`` requests per user.  Results land in
the output directory as a ``summary.csv`` plus per-cell NDCG files, ledger
snapshots and, for online runs, per-step time series.

All randomness flows from the single run seed through named substreams
(one per user or request, one for trace shuffling), so identical configs
reproduce output files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, metrics
from .catalog import Catalog, PreferenceMatrix, RankedList, generate_synthetic, load_dataset
from .exposure import ExposureLedger, FairnessNotion, total_exposure
from .quality import ndcg
from .reranker import OnlineState, RunConfig, fairsort_offline, fairsort_online_step

MODELS = ("fairsort", "top_k", "mixed_k", "all_random", "min_exposure")
SCENARIOS = ("offline", "online")

# substream tags keep per-request draws, trace shuffling and service-order
# shuffling independent under one run seed
_TRACE_STREAM = 1_000_003
_ORDER_STREAM = 1_000_033

SUMMARY_COLUMNS = [
    "model", "scenario", "K", "notion", "threshold", "lambda_max", "gap",
    "ratio", "seed", "dcf", "dpf_uf", "dpf_qf", "total_quality",
    "avg_quality", "uir",
    *[f"hist_{i}" for i in range(9)],
    "uir_mu_source",
]


class ConfigError(ValueError):
    """Raised when an experiment config is malformed."""


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully resolved experiment description."""

    model: str = "fairsort"
    scenario: str = "offline"
    k_values: tuple[int, ...] = (10,)
    notion: FairnessNotion = FairnessNotion.UNIFORM
    threshold: float = 0.9
    lambda_max: float = 16.0
    gap: float = 2.0**-7
    ratio: float = 1.0
    seed: int = 0
    rounds: int = 10
    out_dir: Path = Path("out")
    dataset: str = "synthetic"
    users: int = 50
    items: int = 100
    providers: int = 5
    skew: float = 1.0
    data_seed: int = 0
    matrix_path: Path | None = None
    provider_map_path: Path | None = None
    service_order: str = "ascending"
    exposure_update: str = "replace"

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ConfigError("k must list positive integers")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.dataset not in ("synthetic", "files"):
            raise ConfigError("dataset must be 'synthetic' or 'files'")
        if self.dataset == "files" and (
            self.matrix_path is None or self.provider_map_path is None
        ):
            raise ConfigError("dataset=files needs matrix and provider_map paths")
        if self.service_order not in ("ascending", "shuffled"):
            raise ConfigError("service_order must be 'ascending' or 'shuffled'")
        if self.exposure_update not in ("replace", "accumulate"):
            raise ConfigError("exposure_update must be 'replace' or 'accumulate'")
        # surface bad hyperparameters at spec construction time
        RunConfig(
            k=self.k_values[0],
            notion=self.notion,
            threshold=self.threshold,
            lambda_max=self.lambda_max,
            gap=self.gap,
            ratio=self.ratio,
        )

    def run_config(self, k: int) -> RunConfig:
        return RunConfig(
            k=k,
            notion=self.notion,
            threshold=self.threshold,
            lambda_max=self.lambda_max,
            gap=self.gap,
            ratio=self.ratio,
        )


_CONFIG_KEYS = {
    "model": str,
    "scenario": str,
    "k": None,
    "notion": str,
    "threshold": float,
    "lambda_max": float,
    "gap": float,
    "ratio": float,
    "seed": int,
    "rounds": int,
    "out": str,
    "dataset": str,
    "users": int,
    "items": int,
    "providers": int,
    "skew": float,
    "data_seed": int,
    "matrix": str,
    "provider_map": str,
    "service_order": str,
    "exposure_update": str,
}


def _parse_k(value) -> tuple[int, ...]:
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p.strip()]
        try:
            return tuple(int(p) for p in parts)
        except ValueError:
            raise ConfigError(f"cannot parse k list from {value!r}") from None
    if isinstance(value, int):
        return (value,)
    try:
        return tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot parse k list from {value!r}") from None


def build_spec(config: dict, overrides: dict | None = None) -> ExperimentSpec:
    """Merge a flat config mapping with CLI overrides into a spec."""
    merged = dict(config)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    unknown = set(merged) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    kwargs: dict = {}
    for key, value in merged.items():
        caster = _CONFIG_KEYS[key]
        try:
            if key == "k":
                kwargs["k_values"] = _parse_k(value)
            elif key == "notion":
                kwargs["notion"] = FairnessNotion.parse(str(value))
            elif key == "out":
                kwargs["out_dir"] = Path(value)
            elif key == "matrix":
                kwargs["matrix_path"] = Path(value)
            elif key == "provider_map":
                kwargs["provider_map_path"] = Path(value)
            else:
                kwargs[key] = caster(value)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {value!r}") from None
    return ExperimentSpec(**kwargs)


def _load(spec: ExperimentSpec) -> tuple[PreferenceMatrix, Catalog]:
    if spec.dataset == "files":
        return load_dataset(spec.matrix_path, spec.provider_map_path)
    return generate_synthetic(
        spec.users, spec.items, spec.providers, spec.skew, spec.data_seed
    )


@dataclass
class CellResult:
    """One (model, scenario, K) run: raw lists plus derived numbers."""

    model: str
    scenario: str
    k: int
    lists: tuple[RankedList, ...]
    ledger: ExposureLedger
    request_ndcgs: tuple[float, ...]
    per_user_ndcg: dict[int, float]
    timeseries: list[dict] = field(default_factory=list)

    def report(self, catalog: Catalog) -> metrics.MetricsReport:
        if self.scenario == "online":
            dcf_val = metrics.dcf(list(self.per_user_ndcg.values()))
        else:
            dcf_val = metrics.dcf(self.request_ndcgs)
        count = len(self.request_ndcgs)
        total = float(sum(self.request_ndcgs))
        return metrics.MetricsReport(
            dcf=dcf_val,
            dpf_uf=metrics.dpf(self.ledger, catalog, FairnessNotion.UNIFORM),
            dpf_qf=metrics.dpf(self.ledger, catalog, FairnessNotion.QUALITY_WEIGHTED),
            total_quality=total,
            avg_quality=total / count,
            histogram=metrics.ndcg_histogram(self.request_ndcgs),
        )


def _serve_baseline(
    model: str,
    matrix: PreferenceMatrix,
    user: int,
    k: int,
    seed,
    tracker: baselines.ItemExposureTracker | None,
    catalog: Catalog,
) -> RankedList:
    if model == "top_k":
        return baselines.top_k(matrix, user, k)
    if model == "mixed_k":
        return baselines.mixed_k(matrix, user, k, seed)
    if model == "all_random":
        return baselines.all_random(matrix, user, k, seed)
    if model == "min_exposure":
        return baselines.min_exposure(tracker, catalog, matrix, user, k)
    raise ConfigError(f"unknown model {model!r}")


def run_cell_offline(
    spec: ExperimentSpec, model: str, k: int, matrix: PreferenceMatrix, catalog: Catalog
) -> CellResult:
    """Serve every user once under one model and collect the ledger."""
    m = matrix.n_users
    config = spec.run_config(k)
    if model == "fairsort":
        order = None
        if spec.service_order == "shuffled":
            rng = np.random.default_rng((spec.seed, _ORDER_STREAM))
            order = rng.permutation(m).tolist()
        lists, ledger, quality_report = fairsort_offline(
            matrix,
            catalog,
            config,
            order=order,
            exposure_update=spec.exposure_update,
        )
        per_user = {u: quality_report.per_user[u] for u in range(m)}
        ordered = tuple(lists[u] for u in range(m))
    else:
        ledger = ExposureLedger.create(total_exposure(m, k), catalog, spec.notion)
        tracker = baselines.ItemExposureTracker.fresh(matrix.n_items)
        served: list[RankedList] = []
        per_user = {}
        for user in range(m):
            rlist = _serve_baseline(
                model, matrix, user, k, (spec.seed, user), tracker, catalog
            )
            ledger.apply(rlist, k)
            per_user[user] = ndcg(matrix, user, rlist, k)
            served.append(rlist)
        ordered = tuple(served)
    request_ndcgs = tuple(per_user[u] for u in range(m))
    return CellResult(
        model=model,
        scenario="offline",
        k=k,
        lists=ordered,
        ledger=ledger,
        request_ndcgs=request_ndcgs,
        per_user_ndcg=per_user,
    )


def make_trace(n_users: int, rounds: int, seed: int) -> list[int]:
    """``rounds`` requests per user, shuffled once into one global order."""
    trace = np.repeat(np.arange(n_users), rounds)
    rng = np.random.default_rng((seed, _TRACE_STREAM))
    rng.shuffle(trace)
    return trace.tolist()


def run_cell_online(
    spec: ExperimentSpec, model: str, k: int, matrix: PreferenceMatrix, catalog: Catalog
) -> CellResult:
    """Replay a request trace, recording running metrics after every step."""
    m = matrix.n_users
    config = spec.run_config(k)
    trace = make_trace(m, spec.rounds, spec.seed)

    state = OnlineState.fresh(catalog, spec.notion) if model == "fairsort" else None
    ledger = (
        state.ledger
        if state is not None
        else ExposureLedger.create(0.0, catalog, spec.notion)
    )
    tracker = baselines.ItemExposureTracker.fresh(matrix.n_items)

    user_total = np.zeros(m)
    user_count = np.zeros(m)
    served: list[RankedList] = []
    request_ndcgs: list[float] = []
    timeseries: list[dict] = []
    running_total = 0.0

    for step, user in enumerate(trace, start=1):
        if model == "fairsort":
            rlist, state = fairsort_online_step(
                state, matrix, catalog, user, config,
                exposure_update=spec.exposure_update,
            )
            value = state.ndcg_log[-1][1]
        else:
            ledger.set_budget(total_exposure(step, k))
            rlist = _serve_baseline(
                model, matrix, user, k, (spec.seed, step), tracker, catalog
            )
            ledger.apply(rlist, k)
            value = ndcg(matrix, user, rlist, k)
        served.append(rlist)
        request_ndcgs.append(value)
        running_total += value
        user_total[user] += value
        user_count[user] += 1

        averages = np.where(user_count > 0, user_total / np.maximum(user_count, 1), 0.0)
        timeseries.append(
            {
                "step": step,
                "user": user,
                "ndcg": value,
                "running_dcf": float(np.var(averages)),
                "running_dpf": metrics.dpf(ledger, catalog, spec.notion),
                "running_avg_quality": running_total / step,
            }
        )

    per_user = {
        u: (user_total[u] / user_count[u] if user_count[u] else 0.0) for u in range(m)
    }
    return CellResult(
        model=model,
        scenario="online",
        k=k,
        lists=tuple(served),
        ledger=ledger,
        request_ndcgs=tuple(request_ndcgs),
        per_user_ndcg=per_user,
        timeseries=timeseries,
    )


@dataclass(frozen=True)
class SummaryRow:
    """One summary.csv line before UIR calibration."""

    model: str
    scenario: str
    k: int
    notion: FairnessNotion
    threshold: float
    lambda_max: float
    gap: float
    ratio: float
    seed: int
    report: metrics.MetricsReport
    uir_mu_source: str = "pending"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit_report(
    rows: list[SummaryRow],
    path: Path,
    *,
    spec: ExperimentSpec | None = None,
    data: tuple[PreferenceMatrix, Catalog] | None = None,
) -> Path:
    """Write summary rows as CSV, calibrating the UIR column.

    UIR needs two reference numbers per (scenario, K): the min-exposure
    model's DCF and the top-K model's DPF under the row's notion.  Reference
    rows already present are used as is; missing ones are executed on the
    fly when ``spec`` and ``data`` are given, and the provenance column says
    which happened.
    """
    calibrators: dict[tuple[str, int, str], metrics.MetricsReport] = {}
    for row in rows:
        if row.model in ("top_k", "min_exposure"):
            calibrators[(row.scenario, row.k, row.model)] = row.report

    def calibrator(scenario: str, k: int, model: str) -> tuple[metrics.MetricsReport, bool]:
        key = (scenario, k, model)
        if key in calibrators:
            return calibrators[key], False
        if spec is None or data is None:
            raise ConfigError(
                f"cannot calibrate UIR: no {model} run for scenario={scenario}, K={k}"
            )
        matrix, catalog = data
        if scenario == "offline":
            cell = run_cell_offline(spec, model, k, matrix, catalog)
        else:
            cell = run_cell_online(spec, model, k, matrix, catalog)
        calibrators[key] = cell.report(catalog)
        return calibrators[key], True

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            mu1_report, ran1 = calibrator(row.scenario, row.k, "min_exposure")
            mu2_report, ran2 = calibrator(row.scenario, row.k, "top_k")
            mu1 = mu1_report.dcf
            mu2 = (
                mu2_report.dpf_uf
                if row.notion is FairnessNotion.UNIFORM
                else mu2_report.dpf_qf
            )
            dpf_val = (
                row.report.dpf_uf
                if row.notion is FairnessNotion.UNIFORM
                else row.report.dpf_qf
            )
            if mu1 > 0 and mu2 > 0 and row.report.avg_quality > 0:
                uir_val = metrics.uir(
                    row.report.dcf, dpf_val, mu1, mu2, row.report.avg_quality
                )
                source = "auto" if (ran1 or ran2) else "provided"
            else:
                uir_val = None
                source = "degenerate"
            writer.writerow(
                [
                    row.model,
                    row.scenario,
                    str(row.k),
                    row.notion.value,
                    _fmt(row.threshold),
                    _fmt(row.lambda_max),
                    _fmt(row.gap),
                    _fmt(row.ratio),
                    str(row.seed),
                    _fmt(row.report.dcf),
                    _fmt(row.report.dpf_uf),
                    _fmt(row.report.dpf_qf),
                    _fmt(row.report.total_quality),
                    _fmt(row.report.avg_quality),
                    _fmt(uir_val),
                    *[str(c) for c in row.report.histogram],
                    source,
                ]
            )
    return path


def _write_ndcg_file(path: Path, per_user: dict[int, float]) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for user in sorted(per_user):
            fh.write(f"{user}\t{_fmt(per_user[user])}\n")
    return path


def _write_ledger_file(path: Path, ledger: ExposureLedger) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        for line in ledger.snapshot_lines():
            fh.write(line + "\n")
    return path


def _write_timeseries(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["step", "user", "ndcg", "running_dcf", "running_dpf", "running_avg_quality"]
        )
        for row in rows:
            writer.writerow(
                [
                    str(row["step"]),
                    str(row["user"]),
                    _fmt(row["ndcg"]),
                    _fmt(row["running_dcf"]),
                    _fmt(row["running_dpf"]),
                    _fmt(row["running_avg_quality"]),
                ]
            )
    return path


def run_offline(spec: ExperimentSpec) -> list[Path]:
    """Run the offline scenario for every requested K; return written files."""
    matrix, catalog = _load(spec)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[SummaryRow] = []
    written: list[Path] = []
    for k in spec.k_values:
        cell = run_cell_offline(spec, spec.model, k, matrix, catalog)
        rows.append(_summary_row(spec, k, cell.report(catalog)))
        stem = f"{spec.model}_offline_K{k}"
        written.append(
            _write_ndcg_file(spec.out_dir / f"ndcg_users_{stem}.tsv", cell.per_user_ndcg)
        )
        written.append(_write_ledger_file(spec.out_dir / f"ledger_{stem}.tsv", cell.ledger))
    written.append(
        emit_report(rows, spec.out_dir / "summary.csv", spec=spec, data=(matrix, catalog))
    )
    return written


def run_online(spec: ExperimentSpec) -> list[Path]:
    """Run the online scenario for every requested K; return written files."""
    matrix, catalog = _load(spec)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[SummaryRow] = []
    written: list[Path] = []
    for k in spec.k_values:
        cell = run_cell_online(spec, spec.model, k, matrix, catalog)
        rows.append(_summary_row(spec, k, cell.report(catalog)))
        stem = f"{spec.model}_online_K{k}"
        written.append(
            _write_timeseries(spec.out_dir / f"timeseries_{spec.model}_K{k}.csv", cell.timeseries)
        )
        written.append(_write_ledger_file(spec.out_dir / f"ledger_{stem}.tsv", cell.ledger))
    written.append(
        emit_report(rows, spec.out_dir / "summary.csv", spec=spec, data=(matrix, catalog))
    )
    return written


def _summary_row(spec: ExperimentSpec, k: int, report: metrics.MetricsReport) -> SummaryRow:
    return SummaryRow(
        model=spec.model,
        scenario=spec.scenario,
        k=k,
        notion=spec.notion,
        threshold=spec.threshold,
        lambda_max=spec.lambda_max,
        gap=spec.gap,
        ratio=spec.ratio,
        seed=spec.seed,
        report=report,
    )


def run_experiment(spec: ExperimentSpec) -> list[Path]:
    if spec.scenario == "online":
        return run_online(spec)
    return run_offline(spec)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairsort",
        description="Provider-fair re-ranking experiments over recommendation lists.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute one experiment spec")
    run.add_argument("--config", required=True, help="path to a flat JSON config")
    run.add_argument("--model", choices=MODELS)
    run.add_argument("--scenario", choices=SCENARIOS)
    run.add_argument("--k", help="comma-separated list depths, e.g. 5,10,20")
    run.add_argument("--threshold", type=float)
    run.add_argument("--lambda-max", dest="lambda_max", type=float)
    run.add_argument("--gap", type=float)
    run.add_argument("--ratio", type=float)
    run.add_argument("--notion", choices=[n.value for n in FairnessNotion])
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ConfigError("config must be a flat JSON object")
        overrides = {
            key: getattr(args, key)
            for key in (
                "model", "scenario", "k", "threshold", "lambda_max",
                "gap", "ratio", "notion", "seed", "out",
            )
        }
        spec = build_spec(config, overrides)
        written = run_experiment(spec)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
