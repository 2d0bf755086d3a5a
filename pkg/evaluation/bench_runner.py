#!/usr/bin/env python3
"""
Recognition Benchmark

Runs the selected recognizers over every test problem of one or more
datasets and aggregates per (domain, observability level):

- Time: mean seconds per recognition call (I/O and model loading excluded)
- Accuracy: % of problems whose hidden goal is among the returned goals,
  plus the strict variant (hidden goal returned alone)
- Spread: mean number of returned goals

Deterministic columns go to bench_summary.csv and bench_detail.csv, timings
to bench_timings.csv, so reruns on unchanged inputs give identical summaries.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, MutableMapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from modeling.goal_prediction_service import GoalPredictionService, predict_record
from modeling.state_codec import decode
from modeling.train_lstm import LstmModel
from planning.search_planner import DEFAULT_NODE_LIMIT, MODES, SearchConfig
from recognition.landmark_recognizer import recognize_pom
from recognition.recognition_problem import RecognitionProblem, RecognitionResult
from recognition.rg_recognizer import recognize_rg
from tracegen.dataset_pipeline import Dataset, DatasetInvariantError, DatasetRecord, check_dataset
from tracegen.domain_builder import build_domain
from utils import settings
from utils.settings import OBSERVABILITY_LEVELS, ensure_dir

logger = logging.getLogger(__name__)

RECOGNIZERS = ("pom_gc", "pom_uniq", "rg", "lstm")
OUTPUT_FORMATS = ("csv", "table", "json")
SUMMARY_FILE = "bench_summary.csv"
TIMINGS_FILE = "bench_timings.csv"
DETAIL_FILE = "bench_detail.csv"
UNKNOWN_FILE = "unknown_goals.csv"


class BenchConfigError(ValueError):
    def __init__(self, message: str, value: Any = None):
        self.value = value
        super().__init__(message)


@dataclass(frozen=True)
class BenchConfig:
    recognizers: Tuple[str, ...] = RECOGNIZERS
    thetas: Tuple[float, ...] = (0, 10)
    levels: Tuple[int, ...] = OBSERVABILITY_LEVELS
    domains: Tuple[str, ...] = ()
    rg_planner: str = "optimal_astar"
    node_limit: int = DEFAULT_NODE_LIMIT
    out_dir: Path = settings.RESULTS_DIR
    output_format: str = "table"
    seed: Optional[int] = None  # picks lstm_<domain>_s<seed>.joblib when no checkpoint is given
    n_jobs: int = field(default=settings.N_JOBS, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "recognizers", tuple(self.recognizers))
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        object.__setattr__(self, "levels", tuple(int(lv) for lv in self.levels))
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if not self.recognizers:
            raise BenchConfigError("at least one recognizer is required", self.recognizers)
        unknown = [r for r in self.recognizers if r not in RECOGNIZERS]
        if unknown:
            raise BenchConfigError(f"unknown recognizer(s) {unknown}, choose from {RECOGNIZERS}", unknown)
        if len(set(self.recognizers)) != len(self.recognizers):
            raise BenchConfigError(f"recognizers listed twice: {list(self.recognizers)}", self.recognizers)
        if not self.thetas or any(not 0 <= t <= 100 for t in self.thetas):
            raise BenchConfigError(f"thetas must be non-empty values in [0, 100], got {list(self.thetas)}",
                                   self.thetas)
        bad = [lv for lv in self.levels if lv not in OBSERVABILITY_LEVELS]
        if bad or not self.levels:
            raise BenchConfigError(f"levels must be a non-empty subset of {OBSERVABILITY_LEVELS}, got {bad}", bad)
        if self.rg_planner not in MODES:
            raise BenchConfigError(f"rg planner must be one of {MODES}, got {self.rg_planner!r}", self.rg_planner)
        if self.output_format not in OUTPUT_FORMATS:
            raise BenchConfigError(f"format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}",
                                   self.output_format)
        if self.seed is not None and self.seed < 0:
            raise BenchConfigError(f"seed must be non-negative, got {self.seed}", self.seed)

    def recognizer_keys(self) -> List[str]:
        """Result column keys: landmark recognizers once per theta (pom_gc_t0, ...)."""
        keys = []
        for name in self.recognizers:
            if name.startswith("pom_"):
                keys += [f"{name}_t{theta:g}" for theta in self.thetas]
            else:
                keys.append(name)
        return keys

    def search_config(self) -> SearchConfig:
        if self.rg_planner == "optimal_bfs":
            return SearchConfig.breadth_first(node_limit=self.node_limit)
        if self.rg_planner == "satisficing_gbfs":
            return SearchConfig.satisficing(node_limit=self.node_limit)
        return SearchConfig(node_limit=self.node_limit)


def problem_from_record(record: DatasetRecord) -> RecognitionProblem:
    """The ground recognition problem behind a test record."""
    template = build_domain(record.domain)
    task = template.task.with_init(decode(record.domain, record.trace_states[0]))
    candidates = [template.goal_facts(decode(record.domain, c)) for c in record.candidates]
    return RecognitionProblem.from_names(
        task, [task.describe(goal) for goal in candidates], record.observed_actions(),
        hidden_goal=record.candidates.index(record.goal_code),
        problem_id=record.problem_id, level=record.level,
    )


def _detail_row(record: DatasetRecord, key: str, result: RecognitionResult) -> Dict[str, Any]:
    hidden = record.candidates.index(record.goal_code)
    return {
        "domain": record.domain,
        "problem_id": record.problem_id,
        "level": record.level,
        "n_candidates": len(record.candidates),
        "n_observations": len(record.kept_indices),
        "plan_length": len(record.trace_actions),
        "recognizer": key,
        "hidden": hidden,
        "returned": ";".join(str(i) for i in result.returned),
        "spread": result.spread,
        "correct": result.contains(hidden),
        "strict": result.is_strict_hit(hidden),
        "flags": ";".join(f"{i}:{flag}" for i, flag in sorted(result.flags.items())),
        "time": result.elapsed,
    }


class BenchRunner:
    """Run every selected recognizer on every test problem of the given datasets."""

    def __init__(self, config: BenchConfig, datasets: Sequence[Dataset],
                 models: Optional[Mapping[str, LstmModel]] = None):
        self.config = config
        self.datasets = [d for d in datasets if not config.domains or d.domain in config.domains]
        self.models = dict(models or {})
        self.search = config.search_config()
        # optimal costs per domain, shared across problems and levels
        self.rg_cache: Dict[str, MutableMapping] = {}
        if not self.datasets:
            raise BenchConfigError("no dataset matches the selected domains", config.domains)
        if "lstm" in config.recognizers:
            missing = sorted({d.domain for d in self.datasets} - set(self.models))
            if missing:
                raise BenchConfigError(f"lstm selected but no checkpoint for {', '.join(missing)}", missing)

    def log_config(self) -> None:
        cfg = self.config
        logger.info(f"⚙️ Bench config: recognizers={cfg.recognizer_keys()} levels={list(cfg.levels)} "
                    f"rg_planner={cfg.rg_planner} node_limit={cfg.node_limit} seed={cfg.seed} jobs={cfg.n_jobs}")

    def records(self, dataset: Dataset) -> List[DatasetRecord]:
        return [r for r in dataset.split("test") if r.level in self.config.levels]

    def run_record(self, record: DatasetRecord) -> List[Dict[str, Any]]:
        """Detail rows of one (problem, level): one per recognizer key."""
        cfg = self.config
        problem = problem_from_record(record)
        rows = []
        for name in cfg.recognizers:
            if name.startswith("pom_"):
                for theta in cfg.thetas:
                    result = recognize_pom(problem, name[len("pom_"):], theta)
                    rows.append(_detail_row(record, f"{name}_t{theta:g}", result))
            elif name == "rg":
                cache = self.rg_cache.setdefault(record.domain, {})
                rows.append(_detail_row(record, name, recognize_rg(problem, self.search, cache)))
            else:
                prediction = predict_record(self.models[record.domain], record)
                rows.append(_detail_row(record, name, prediction.result))
        return rows

    def _safe_run(self, record: DatasetRecord) -> Tuple[List[Dict[str, Any]], Optional[str]]:
        try:
            return self.run_record(record), None
        except (ValueError, RuntimeError) as e:
            logger.error(f"❌ {record.problem_id} (level {record.level}): {e}")
            return [], f"{record.problem_id}@{record.level}: {e}"

    def run(self) -> "BenchResult":
        self.log_config()
        rows: List[Dict[str, Any]] = []
        failures: List[str] = []
        for dataset in self.datasets:
            records = self.records(dataset)
            logger.info(f"🚀 Benchmarking {dataset.domain}: {len(records)} problem instances")
            progress = tqdm(records, desc=f"{dataset.domain} bench", disable=not settings.SHOW_PROGRESS)
            outcomes = Parallel(n_jobs=self.config.n_jobs, prefer="threads")(
                delayed(self._safe_run)(record) for record in progress
            )
            for record_rows, error in outcomes:
                rows += record_rows
                if error:
                    failures.append(error)
        detail = pd.DataFrame(rows, columns=DETAIL_COLUMNS + ["time"])
        logger.info(f"✅ Bench finished: {len(detail)} recognitions, {len(failures)} failures")
        return BenchResult(self.config, detail, failures)


DETAIL_COLUMNS = ["domain", "problem_id", "level", "n_candidates", "n_observations", "plan_length",
                  "recognizer", "hidden", "returned", "spread", "correct", "strict", "flags"]
SUMMARY_COLUMNS = ["domain", "n_candidates", "level", "problems", "mean_observations", "recognizer",
                   "accuracy", "strict_accuracy", "spread"]
TIMING_COLUMNS = ["domain", "level", "recognizer", "mean_time", "max_time"]


def _percent(series: pd.Series) -> float:
    return float(np.clip(round(100.0 * series.mean(), 4), 0.0, 100.0))


def summarize(detail: pd.DataFrame, keys: Sequence[str]) -> pd.DataFrame:
    """One row per (domain, level, recognizer); recognizers in `keys` order."""
    if detail.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    rows = []
    for (domain, level), group in detail.groupby(["domain", "level"], sort=True):
        for key in keys:
            sub = group[group["recognizer"] == key]
            if sub.empty:
                continue
            rows.append({
                "domain": domain,
                "n_candidates": round(float(sub["n_candidates"].mean()), 4),
                "level": int(level),
                "problems": len(sub),
                "mean_observations": round(float(sub["n_observations"].mean()), 4),
                "recognizer": key,
                "accuracy": _percent(sub["correct"]),
                "strict_accuracy": _percent(sub["strict"]),
                "spread": round(float(sub["spread"].mean()), 4),
            })
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def timing_summary(detail: pd.DataFrame, keys: Sequence[str]) -> pd.DataFrame:
    if detail.empty:
        return pd.DataFrame(columns=TIMING_COLUMNS)
    grouped = detail.groupby(["domain", "level", "recognizer"], sort=False)["time"].agg(["mean", "max"])
    frame = grouped.reset_index().rename(columns={"mean": "mean_time", "max": "max_time"})
    order = {k: i for i, k in enumerate(keys)}
    frame["_order"] = frame["recognizer"].map(order)
    frame = frame.sort_values(["domain", "level", "_order"]).drop(columns="_order")
    return frame[TIMING_COLUMNS].reset_index(drop=True)


def check_theta_nesting(summary: pd.DataFrame, thetas: Sequence[float]) -> List[str]:
    """Rows where a larger theta lowered accuracy or spread."""
    violations = []
    ordered = sorted(thetas)
    for (domain, level), group in summary.groupby(["domain", "level"], sort=True):
        by_key = group.set_index("recognizer")
        for name in ("pom_gc", "pom_uniq"):
            keys = [f"{name}_t{t:g}" for t in ordered if f"{name}_t{t:g}" in by_key.index]
            for low, high in zip(keys, keys[1:]):
                for column in ("accuracy", "spread"):
                    if by_key.at[high, column] < by_key.at[low, column]:
                        violations.append(f"{domain} level {level}: {column} of {high} "
                                          f"below {low}")
    return violations


@dataclass
class BenchResult:
    config: BenchConfig
    detail: pd.DataFrame
    failures: List[str] = field(default_factory=list)

    @property
    def keys(self) -> List[str]:
        return self.config.recognizer_keys()

    def summary(self) -> pd.DataFrame:
        return summarize(self.detail, self.keys)

    def timings(self) -> pd.DataFrame:
        return timing_summary(self.detail, self.keys)

    def table(self) -> pd.DataFrame:
        """Wide layout: one row per (domain, level), Time / Accuracy / Spread per recognizer."""
        summary = self.summary()
        timings = self.timings()
        merged = summary.merge(timings, on=["domain", "level", "recognizer"], how="left")
        rows = []
        for (domain, level), group in merged.groupby(["domain", "level"], sort=True):
            row = {"domain": domain, "|G|": group["n_candidates"].iloc[0], "level": level,
                   "|O|": group["mean_observations"].iloc[0]}
            by_key = group.set_index("recognizer")
            for key in self.keys:
                if key not in by_key.index:
                    continue
                row[f"{key} time"] = round(float(by_key.at[key, "mean_time"]), 4)
                row[f"{key} acc"] = by_key.at[key, "accuracy"]
                row[f"{key} spread"] = by_key.at[key, "spread"]
            rows.append(row)
        return pd.DataFrame(rows)


def write_outputs(result: BenchResult, out_dir: Optional[Path] = None) -> List[Path]:
    out_dir = ensure_dir(Path(out_dir or result.config.out_dir))
    paths = [out_dir / SUMMARY_FILE, out_dir / TIMINGS_FILE, out_dir / DETAIL_FILE]
    result.summary().to_csv(paths[0], index=False, lineterminator="\n")
    result.timings().to_csv(paths[1], index=False, lineterminator="\n")
    result.detail[DETAIL_COLUMNS].to_csv(paths[2], index=False, lineterminator="\n")
    for path in paths:
        logger.info(f"💾 Saved {path}")
    return paths


def render(result: BenchResult, fmt: str = "table") -> str:
    if fmt == "csv":
        return result.summary().to_csv(index=False, lineterminator="\n")
    if fmt == "json":
        payload = {
            "summary": result.summary().to_dict(orient="records"),
            "timings": result.timings().to_dict(orient="records"),
            "failures": result.failures,
        }
        return json.dumps(payload, indent=2, default=float)
    table = result.table()
    if table.empty:
        return "No problems were benchmarked."
    return table.to_string(index=False)


def print_bench_summary(result: BenchResult, fmt: str = "table") -> None:
    if fmt != "table":
        print(render(result, fmt))
        return
    print(f"\n📊 GOAL RECOGNITION BENCHMARK")
    print("=" * 100)
    print(render(result, fmt))
    if result.failures:
        print(f"\n❌ {len(result.failures)} problem(s) failed:")
        for failure in result.failures:
            print(f"   - {failure}")


# === Unknown goals ===

def unknown_goal_report(dataset: Dataset, model: LstmModel) -> pd.DataFrame:
    """
    Reconstruction accuracy, exact-prediction rate and candidate hit rate of
    the LSTM on the unknown-goal split, per domain.

    Raises:
        DatasetInvariantError: the split is missing, or one of its goals
            also occurs in the training records
    """
    if not dataset.split("unknown_goal_test"):
        raise DatasetInvariantError([f"{dataset.domain}: dataset has no unknown_goal_test split"])
    leaks = [v for v in check_dataset(dataset) if v.startswith("unknown goal")]
    if leaks:
        raise DatasetInvariantError(leaks)
    service = GoalPredictionService()
    service.model = model
    frame = service.predict_split(dataset, "unknown_goal_test")
    return pd.DataFrame([{
        "domain": dataset.domain,
        "problems": frame["problem_id"].nunique(),
        "records": len(frame),
        "reconstruction_accuracy": round(100.0 * float(frame["reconstruction"].mean()), 4),
        "exact_predictions": _percent(frame["exact"]),
        "candidate_hits": _percent(frame["correct"]),
    }])


def print_unknown_report(report: pd.DataFrame) -> None:
    print(f"\n🧠 LSTM WITH UNKNOWN GOALS")
    print("=" * 80)
    print(report.to_string(index=False))
