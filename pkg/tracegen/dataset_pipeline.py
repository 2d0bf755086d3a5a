#!/usr/bin/env python3
"""
Dataset Pipeline

Builds a goal-recognition corpus for one benchmark domain:

1. draw the held-out (unknown) goals, then the known goal pool
2. plan training traces from random initial states to every pool goal
3. build test problems (hidden goal from the pool) and unknown-goal problems
4. sample observations per level and split training traces into
   train / validation groups
5. persist JSON Lines records plus a manifest, then re-check invariants

Identical configs give byte-identical files.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from sklearn.model_selection import train_test_split
from tqdm import tqdm

from modeling.state_codec import InvalidCodeError, decode, encode, format_code, parse_code
from planning.search_planner import DEFAULT_NODE_LIMIT, MODES, SearchConfig, SearchLimitExceeded
from planning.strips_task import State, apply
from tracegen.domain_builder import DomainTemplate, build_domain
from tracegen.observation_sampler import (
    ROUNDING_RULES,
    is_subsequence,
    observation_count,
    observation_rng,
    sample_indices,
)
from tracegen.trace_generator import PlanTrace, generate_trace
from utils import settings
from utils.settings import DOMAIN_KINDS, OBSERVABILITY_LEVELS, ensure_dir

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SPLITS = ("train", "validation", "test", "unknown_goal_test")
TRAINING_SPLITS = ("train", "validation")
PROBLEM_SPLITS = ("test", "unknown_goal_test")
TRAIN_LEVELS = (100, 70, 50, 30, 10)
RECORD_FIELDS = ("domain", "problem_id", "split", "trace_id", "goal_code", "candidates",
                 "trace_states", "trace_actions", "level", "kept_indices")
DEFAULT_CANDIDATES = {"hanoi34": 4, "eight_puzzle": 6, "lights_out4": 6}
DEFAULT_GOAL_POOL = {"hanoi34": 64, "eight_puzzle": 40, "lights_out4": 40}
# hanoi34 trains on all 64 goals; unknown goals there must be asked for
DEFAULT_TRACES_PER_GOAL = {"hanoi34": 25, "eight_puzzle": 3, "lights_out4": 3}
DEFAULT_UNKNOWN_GOALS = {"hanoi34": 0, "eight_puzzle": 6, "lights_out4": 6}
# unknown goals lie this many moves (BFS depth) from the anchor; walk-based when absent
DEFAULT_UNKNOWN_DEPTH = {"eight_puzzle": (14, 16)}


class InsufficientGoalsError(ValueError):
    def __init__(self, domain: str, needed: int, available: int, what: str = "goals"):
        self.domain = domain
        self.needed = needed
        self.available = available
        super().__init__(f"{domain}: need {needed} distinct {what}, found only {available}")


class DatasetFormatError(ValueError):
    def __init__(self, path: Union[str, Path], line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class DatasetInvariantError(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        shown = "; ".join(self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"{len(self.violations)} dataset invariant violation(s): {shown}{more}")


@dataclass(frozen=True)
class DatasetConfig:
    domain: str = "hanoi34"
    n_problems: int = 6
    n_candidates: Optional[int] = None
    levels: Tuple[int, ...] = OBSERVABILITY_LEVELS
    train_levels: Tuple[int, ...] = TRAIN_LEVELS
    seed: int = 0
    traces_per_goal: Optional[int] = None
    n_train_goals: Optional[int] = None
    n_unknown_goals: Optional[int] = None
    unknown_depth: Optional[Tuple[int, int]] = None
    validation_fraction: float = 0.1
    planner: str = "optimal_astar"
    rounding: str = "round"
    goal_walk: Tuple[int, int] = (3, 8)
    init_walk: Tuple[int, int] = (0, 2)
    node_limit: int = DEFAULT_NODE_LIMIT
    n_jobs: int = field(default=settings.N_JOBS, compare=False)

    def __post_init__(self):
        for name in ("levels", "train_levels", "goal_walk", "init_walk"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        if self.domain not in DOMAIN_KINDS:
            raise ValueError(f"domain must be one of {DOMAIN_KINDS}, got {self.domain!r}")
        if self.n_problems < 1:
            raise ValueError(f"n_problems must be at least 1, got {self.n_problems}")
        if self.n_candidates is not None and self.n_candidates < 1:
            raise ValueError(f"n_candidates must be at least 1, got {self.n_candidates}")
        bad = [lv for lv in self.levels + self.train_levels if lv not in OBSERVABILITY_LEVELS]
        if bad or not self.levels or not self.train_levels:
            raise ValueError(f"levels must be non-empty subsets of {OBSERVABILITY_LEVELS}, got {bad}")
        if self.traces_per_goal is not None and self.traces_per_goal < 1:
            raise ValueError(f"traces_per_goal must be at least 1, got {self.traces_per_goal}")
        if self.n_unknown_goals is not None and self.n_unknown_goals < 0:
            raise ValueError(f"n_unknown_goals must be non-negative, got {self.n_unknown_goals}")
        if self.unknown_depth is not None:
            object.__setattr__(self, "unknown_depth", tuple(int(v) for v in self.unknown_depth))
            if len(self.unknown_depth) != 2 or not 0 <= self.unknown_depth[0] <= self.unknown_depth[1]:
                raise ValueError(f"unknown_depth must be (low, high) with 0 <= low <= high, "
                                 f"got {self.unknown_depth}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(f"validation_fraction must be in (0, 1), got {self.validation_fraction}")
        if self.planner not in MODES:
            raise ValueError(f"planner must be one of {MODES}, got {self.planner!r}")
        if self.rounding not in ROUNDING_RULES:
            raise ValueError(f"rounding must be one of {ROUNDING_RULES}, got {self.rounding!r}")
        for name in ("goal_walk", "init_walk"):
            low, high = getattr(self, name)
            if not 0 <= low <= high:
                raise ValueError(f"{name} must be (low, high) with 0 <= low <= high")

    @property
    def candidate_count(self) -> int:
        return self.n_candidates or DEFAULT_CANDIDATES[self.domain]

    @property
    def goal_pool_size(self) -> int:
        return self.n_train_goals or DEFAULT_GOAL_POOL[self.domain]

    @property
    def trace_count(self) -> int:
        return self.traces_per_goal or DEFAULT_TRACES_PER_GOAL[self.domain]

    @property
    def unknown_goal_count(self) -> int:
        if self.n_unknown_goals is None:
            return DEFAULT_UNKNOWN_GOALS[self.domain]
        return self.n_unknown_goals

    @property
    def unknown_goal_depth(self) -> Optional[Tuple[int, int]]:
        return self.unknown_depth or DEFAULT_UNKNOWN_DEPTH.get(self.domain)

    def search_config(self) -> SearchConfig:
        if self.planner == "satisficing_gbfs":
            return SearchConfig.satisficing(node_limit=self.node_limit)
        if self.planner == "optimal_bfs":
            return SearchConfig.breadth_first(node_limit=self.node_limit)
        return SearchConfig(node_limit=self.node_limit)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("n_jobs")
        data.update(traces_per_goal=self.trace_count, n_unknown_goals=self.unknown_goal_count,
                    unknown_depth=self.unknown_goal_depth)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in data.items()}


@dataclass(frozen=True)
class DatasetRecord:
    domain: str
    problem_id: str
    split: str
    trace_id: int
    goal_code: int
    candidates: Tuple[int, ...]
    trace_states: Tuple[int, ...]
    trace_actions: Tuple[str, ...]
    level: int
    kept_indices: Tuple[int, ...]

    @property
    def trace_key(self) -> Tuple[Tuple[int, ...], Tuple[str, ...]]:
        return self.trace_states, self.trace_actions

    def observed_actions(self) -> List[str]:
        return [self.trace_actions[i] for i in self.kept_indices]

    def observed_states(self, include_initial: bool = False) -> List[int]:
        """Codes of the states reached by the kept actions, optionally led by the initial state."""
        kept = [self.trace_states[i + 1] for i in self.kept_indices]
        return [self.trace_states[0]] + kept if include_initial else kept

    def to_json(self) -> Dict[str, Any]:
        return {
            "domain": self.domain,
            "problem_id": self.problem_id,
            "split": self.split,
            "trace_id": self.trace_id,
            "goal_code": format_code(self.goal_code),
            "candidates": [format_code(c) for c in self.candidates],
            "trace_states": [format_code(c) for c in self.trace_states],
            "trace_actions": list(self.trace_actions),
            "level": self.level,
            "kept_indices": list(self.kept_indices),
        }

    @classmethod
    def from_json(cls, data: Any, path: Union[str, Path] = "<memory>", line: int = 0) -> "DatasetRecord":
        if not isinstance(data, dict):
            raise DatasetFormatError(path, line, "record is not a JSON object")
        missing = [k for k in RECORD_FIELDS if k not in data]
        if missing:
            raise DatasetFormatError(path, line, f"missing field(s) {', '.join(missing)}")
        if data["domain"] not in DOMAIN_KINDS:
            raise DatasetFormatError(path, line, f"unknown domain {data['domain']!r}")
        if data["split"] not in SPLITS:
            raise DatasetFormatError(path, line, f"unknown split {data['split']!r}")
        if data["level"] not in OBSERVABILITY_LEVELS:
            raise DatasetFormatError(path, line, f"level {data['level']!r} is not an observability level")
        try:
            return cls(
                domain=data["domain"],
                problem_id=str(data["problem_id"]),
                split=data["split"],
                trace_id=int(data["trace_id"]),
                goal_code=parse_code(data["goal_code"]),
                candidates=tuple(parse_code(c) for c in data["candidates"]),
                trace_states=tuple(parse_code(c) for c in data["trace_states"]),
                trace_actions=tuple(str(a) for a in data["trace_actions"]),
                level=int(data["level"]),
                kept_indices=tuple(int(i) for i in data["kept_indices"]),
            )
        except (InvalidCodeError, TypeError, ValueError) as e:
            raise DatasetFormatError(path, line, str(e)) from None


@dataclass
class Dataset:
    domain: str
    records: List[DatasetRecord]
    manifest: Dict[str, Any] = field(default_factory=dict)

    def split(self, *names: str) -> List[DatasetRecord]:
        return [r for r in self.records if r.split in names]

    def goal_codes(self, *names: str) -> set:
        return {r.goal_code for r in self.split(*names)}

    def traces(self, *names: str) -> Dict[int, DatasetRecord]:
        """One record per trace id (its first one), in file order."""
        seen: Dict[int, DatasetRecord] = {}
        for r in self.split(*names):
            seen.setdefault(r.trace_id, r)
        return seen

    def problems(self, split: str) -> Dict[str, List[DatasetRecord]]:
        grouped: Dict[str, List[DatasetRecord]] = {}
        for r in self.split(split):
            grouped.setdefault(r.problem_id, []).append(r)
        return grouped


class DatasetPipeline:
    def __init__(self, config: DatasetConfig):
        self.config = config
        self.template: DomainTemplate = build_domain(config.domain)
        self.search = config.search_config()
        # derived tasks inherit the relaxation once it exists on the template task
        _ = self.template.task.relaxation

    # --- goals and initial states ---

    def _draw_goals(self, rng: np.random.Generator) -> Tuple[List[State], List[State]]:
        cfg = self.config
        n_unknown, depth = cfg.unknown_goal_count, cfg.unknown_goal_depth
        if depth is not None:
            unknown = self.template.sample_distant_states(rng, n_unknown, depth)
        else:
            unknown = self.template.sample_goal_states(rng, n_unknown, cfg.goal_walk)
        if len(unknown) < n_unknown:
            raise InsufficientGoalsError(cfg.domain, n_unknown, len(unknown), "unknown goals")
        held_out = {self.template.goal_facts(s) for s in unknown}
        pool = self.template.sample_goal_states(rng, cfg.goal_pool_size, cfg.goal_walk, exclude=held_out)
        needed = max(cfg.candidate_count, 2)
        if len(pool) < needed:
            raise InsufficientGoalsError(cfg.domain, needed, len(pool))
        if len(pool) < cfg.goal_pool_size and cfg.n_train_goals:
            logger.warning(f"⚠️ Only {len(pool)} of {cfg.n_train_goals} requested training goals found")
        return unknown, pool

    def _draw_init(self, rng: np.random.Generator, goal: State) -> State:
        goal_facts = self.template.goal_facts(goal)
        for _ in range(20):
            init = self.template.sample_init(rng, self.config.init_walk)
            if not init.satisfies(goal_facts):
                return init
        return self.template.anchor

    def _draw_candidates(self, rng: np.random.Generator, goal: State, pool: List[State]) -> List[State]:
        k = self.config.candidate_count
        others = [g for g in pool if g != goal]
        if len(others) < k - 1:
            raise InsufficientGoalsError(self.config.domain, k, len(others) + 1, "candidate goals")
        picks = [others[int(i)] for i in rng.choice(len(others), size=k - 1, replace=False)]
        candidates = [goal] + picks
        return [candidates[int(i)] for i in rng.permutation(k)]

    # --- traces ---

    def _trace_job(self, init: State, goal: State, seed: int) -> Optional[PlanTrace]:
        task = self.template.task.with_init(init)
        try:
            return generate_trace(task, self.template.goal_facts(goal), self.search, seed=seed)
        except SearchLimitExceeded as e:
            logger.error(f"❌ Trace skipped: {e}")
            return None

    def _solve_all(self, jobs: List[Tuple[State, State, int]], desc: str) -> List[Optional[PlanTrace]]:
        progress = tqdm(jobs, desc=desc, disable=not settings.SHOW_PROGRESS)
        return Parallel(n_jobs=self.config.n_jobs, prefer="threads")(
            delayed(self._trace_job)(init, goal, seed) for init, goal, seed in progress
        )

    def _codes(self, trace: PlanTrace) -> Tuple[int, ...]:
        return tuple(encode(self.config.domain, s) for s in trace.states)

    def _records(self, trace: PlanTrace, trace_id: int, problem_id: str, split: str,
                 candidates: Sequence[int], levels: Iterable[int]) -> List[DatasetRecord]:
        cfg = self.config
        states = self._codes(trace)
        goal_code = encode(cfg.domain, trace.final_state)
        records = []
        for level in levels:
            rng = observation_rng(cfg.seed, trace_id, level)
            records.append(DatasetRecord(
                domain=cfg.domain,
                problem_id=problem_id,
                split=split,
                trace_id=trace_id,
                goal_code=goal_code,
                candidates=tuple(candidates),
                trace_states=states,
                trace_actions=tuple(trace.action_names),
                level=level,
                kept_indices=sample_indices(len(trace), level, rng, cfg.rounding),
            ))
        return records

    # --- assembly ---

    def log_config(self) -> None:
        cfg = self.config
        logger.info(f"⚙️ Dataset config: domain={cfg.domain} seed={cfg.seed} problems={cfg.n_problems} "
                    f"candidates={cfg.candidate_count} goal_pool={cfg.goal_pool_size} "
                    f"unknown_goals={cfg.unknown_goal_count} unknown_depth={cfg.unknown_goal_depth} "
                    f"traces_per_goal={cfg.trace_count}")
        logger.info(f"⚙️ Trace planner={cfg.planner} rounding={cfg.rounding} "
                    f"train_levels={list(cfg.train_levels)} validation_fraction={cfg.validation_fraction}")

    def build(self) -> Dataset:
        cfg = self.config
        domain = cfg.domain
        rng = np.random.default_rng(cfg.seed)
        self.log_config()
        unknown, pool = self._draw_goals(rng)

        # every random draw happens here, in a fixed order, before any planning
        jobs = []
        for goal in pool:
            for _ in range(cfg.trace_count):
                jobs.append((self._draw_init(rng, goal), goal, cfg.seed + len(jobs)))
        problem_specs = []
        for j in range(cfg.n_problems):
            goal = pool[int(rng.integers(len(pool)))]
            problem_specs.append(("test", f"{domain}-p{j:02d}", goal, self._draw_candidates(rng, goal, pool)))
        for j, goal in enumerate(unknown):
            problem_specs.append(("unknown_goal_test", f"{domain}-u{j:02d}", goal,
                                  self._draw_candidates(rng, goal, pool)))

        logger.info(f"🚀 Planning {len(jobs)} training traces for {domain} ({len(pool)} goals)")
        train_traces: List[PlanTrace] = []
        train_keys = set()
        for trace in self._solve_all(jobs, f"{domain} traces"):
            if trace is None or len(trace) == 0:
                continue
            key = (trace.states, tuple(trace.action_names))
            if key not in train_keys:
                train_keys.add(key)
                train_traces.append(trace)
        if len({t.goal for t in train_traces}) < 2:
            raise InsufficientGoalsError(domain, 2, len({t.goal for t in train_traces}), "training goals")

        trace_ids = list(range(len(train_traces)))
        _, validation_ids = train_test_split(trace_ids, test_size=cfg.validation_fraction,
                                             random_state=cfg.seed)
        validation_ids = set(validation_ids)
        records: List[DatasetRecord] = []
        for trace_id, trace in enumerate(train_traces):
            split = "validation" if trace_id in validation_ids else "train"
            records += self._records(trace, trace_id, f"{domain}-t{trace_id:04d}", split, (),
                                     cfg.train_levels)

        next_id = len(train_traces)
        for split, problem_id, goal, candidates in problem_specs:
            trace = None
            for attempt in range(20):
                init = self._draw_init(rng, goal)
                trace = self._trace_job(init, goal, cfg.seed + next_id + attempt)
                if trace is not None and len(trace) and (trace.states, tuple(trace.action_names)) not in train_keys:
                    break
                trace = None
            if trace is None:
                logger.warning(f"⚠️ {problem_id}: no trace distinct from the training traces, skipped")
                continue
            codes = [encode(domain, g) for g in candidates]
            records += self._records(trace, next_id, problem_id, split, codes, cfg.levels)
            next_id += 1

        dataset = Dataset(domain, records)
        dataset.manifest = build_manifest(dataset, cfg)
        logger.info(f"✅ Built {len(records)} records from {next_id} traces")
        return dataset

    def run(self, out_dir: Optional[Path] = None) -> Dict[str, Any]:
        """Build, check and save; failures are reported in the returned dict."""
        results: Dict[str, Any] = {'domain': self.config.domain, 'dataset': None,
                                   'files_created': [], 'success': False, 'error': None}
        try:
            dataset = self.build()
            ensure_valid(dataset)
            results['files_created'] = list(save_dataset(dataset, out_dir or settings.DATASETS_DIR))
            results['dataset'] = dataset
            results['success'] = True
        except (InsufficientGoalsError, DatasetInvariantError, OSError) as e:
            logger.error(f"❌ Dataset build failed: {e}")
            results['error'] = e
        return results

    def print_pipeline_summary(self, results: Dict[str, Any]) -> None:
        if results['dataset'] is None:
            print(f"\n❌ DATASET BUILD FAILED - {results['domain']}: {results['error']}")
            return
        print_dataset_summary(results['dataset'])
        print(f"\n💾 Files created: {len(results['files_created'])}")
        for path in results['files_created']:
            print(f"   - {Path(path).name}")


# === Manifest and persistence ===

def build_manifest(dataset: Dataset, cfg: Optional[DatasetConfig] = None) -> Dict[str, Any]:
    counts = {}
    for split in SPLITS:
        traces = dataset.traces(split)
        lengths = [len(r.trace_actions) for r in traces.values()]
        counts[split] = {
            "records": len(dataset.split(split)),
            "traces": len(traces),
            "goals": len(dataset.goal_codes(split)),
            "mean_plan_length": round(float(np.mean(lengths)), 4) if lengths else 0.0,
        }
    manifest: Dict[str, Any] = {"format_version": FORMAT_VERSION, "domain": dataset.domain}
    if cfg is not None:
        manifest["seed"] = cfg.seed
        manifest["n_candidates"] = cfg.candidate_count
        manifest["config"] = cfg.to_dict()
    manifest["counts"] = counts
    return manifest


def manifest_path(records_path: Union[str, Path]) -> Path:
    path = Path(records_path)
    return path.with_name(path.name[:-len(".jsonl")] + ".manifest.json"
                          if path.name.endswith(".jsonl") else path.name + ".manifest.json")


def save_dataset(dataset: Dataset, out_dir: Union[str, Path], name: Optional[str] = None) -> Tuple[Path, Path]:
    out_dir = ensure_dir(Path(out_dir))
    name = name or f"{dataset.domain}_s{dataset.manifest.get('seed', 0)}"
    records_path = out_dir / f"{name}.jsonl"
    with open(records_path, "w", encoding="utf-8", newline="\n") as fh:
        for record in dataset.records:
            fh.write(json.dumps(record.to_json(), separators=(",", ":")) + "\n")
    digest = hashlib.sha256(records_path.read_bytes()).hexdigest()
    dataset.manifest["files"] = {"records": records_path.name, "sha256": digest}
    meta_path = manifest_path(records_path)
    meta_path.write_text(json.dumps(dataset.manifest, indent=2) + "\n", encoding="utf-8")
    logger.info(f"💾 Saved {len(dataset.records)} records to {records_path}")
    return records_path, meta_path


def load_dataset(path: Union[str, Path]) -> Dataset:
    """
    Read a JSON Lines dataset (and its manifest, when present).

    Raises:
        FileNotFoundError: no such file
        DatasetFormatError: a line is not a well-formed record (names the line)
    """
    path = Path(path)
    if path.is_dir():
        found = sorted(path.glob("*.jsonl"))
        if len(found) != 1:
            raise FileNotFoundError(f"expected one .jsonl dataset in {path}, found {len(found)}")
        path = found[0]
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(path, line_no, f"not valid JSON ({e.msg})") from None
            records.append(DatasetRecord.from_json(data, path, line_no))
    if not records:
        raise DatasetFormatError(path, 0, "dataset is empty")
    domains = {r.domain for r in records}
    if len(domains) > 1:
        raise DatasetFormatError(path, 0, f"mixed domains {sorted(domains)}")
    meta = manifest_path(path)
    manifest = json.loads(meta.read_text(encoding="utf-8")) if meta.exists() else {}
    return Dataset(records[0].domain, records, manifest)


# === Invariants ===

def _replay(template: DomainTemplate, record: DatasetRecord) -> str:
    """Empty string if the record's trace replays to its goal, else the reason."""
    kind = record.domain
    task = template.task
    try:
        states = [decode(kind, c) for c in record.trace_states]
        goal = template.goal_facts(decode(kind, record.goal_code))
    except InvalidCodeError as e:
        return str(e)
    if len(states) != len(record.trace_actions) + 1:
        return f"{len(states)} states for {len(record.trace_actions)} actions"
    for i, name in enumerate(record.trace_actions):
        action = task.action_index.get(name)
        if action is None:
            return f"step {i}: unknown action {name}"
        if not action.pre <= states[i].true_facts:
            return f"step {i}: {name} not applicable"
        if apply(states[i], action) != states[i + 1]:
            return f"step {i}: recorded state differs from the result of {name}"
    if not states[-1].satisfies(goal):
        return "trace does not reach its goal"
    return ""


def check_dataset(dataset: Dataset, rounding: Optional[str] = None) -> List[str]:
    """
    Re-validate a dataset: trace replay, the subsequence property of kept
    indices, hidden-goal membership in the candidates and split hygiene.
    Returns the list of violations (empty when the dataset is sound).
    """
    template = build_domain(dataset.domain)
    rounding = rounding or dataset.manifest.get("config", {}).get("rounding", "round")
    violations = []
    replayed: Dict[Tuple, str] = {}
    for r in dataset.records:
        where = f"{r.problem_id} ({r.split}, level {r.level})"
        key = (r.trace_key, r.goal_code)
        if key not in replayed:
            replayed[key] = _replay(template, r)
        if replayed[key]:
            violations.append(f"{where}: {replayed[key]}")
        n = len(r.trace_actions)
        if not is_subsequence(r.kept_indices, n):
            violations.append(f"{where}: kept indices {list(r.kept_indices)} are not a subsequence of {n} actions")
        elif len(r.kept_indices) != observation_count(n, r.level, rounding):
            violations.append(f"{where}: {len(r.kept_indices)} observations kept, "
                              f"expected {observation_count(n, r.level, rounding)}")
        if r.split in PROBLEM_SPLITS and r.candidates.count(r.goal_code) != 1:
            violations.append(f"{where}: hidden goal appears {r.candidates.count(r.goal_code)} times "
                              f"among the candidates")

    train_goals = dataset.goal_codes(*TRAINING_SPLITS)
    for code in sorted(dataset.goal_codes("unknown_goal_test") & train_goals):
        violations.append(f"unknown goal {format_code(code)} also appears in training records")
    train_keys = {r.trace_key for r in dataset.split(*TRAINING_SPLITS)}
    for r in dataset.traces("test").values():
        if r.trace_key in train_keys:
            violations.append(f"{r.problem_id}: test trace equals a training trace")
    return violations


def ensure_valid(dataset: Dataset, rounding: Optional[str] = None) -> Dataset:
    violations = check_dataset(dataset, rounding)
    if violations:
        raise DatasetInvariantError(violations)
    return dataset


def print_dataset_summary(dataset: Dataset) -> None:
    print(f"\n🚀 DATASET SUMMARY - {dataset.domain}")
    print("=" * 80)
    for split in SPLITS:
        counts = dataset.manifest.get("counts", {}).get(split) or build_manifest(dataset)["counts"][split]
        print(f"📦 {split:18} records: {counts['records']:5}  traces: {counts['traces']:4}  "
              f"goals: {counts['goals']:3}  mean plan length: {counts['mean_plan_length']:.2f}")
    problems = dataset.problems("test")
    if problems:
        print(f"\n📊 SAMPLE TEST PROBLEMS:")
        print("-" * 80)
        for problem_id, records in list(problems.items())[:5]:
            r = records[0]
            print(f"{problem_id:18} | goal {format_code(r.goal_code)} | "
                  f"{len(r.candidates)} candidates | plan length {len(r.trace_actions)}")
