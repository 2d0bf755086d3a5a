#!/usr/bin/env python3
"""
Oracle Verification Suites

Independent cross-checks run before trusting benchmark numbers:

- planner: A* (h_max) plan length equals BFS plan length, plans validate
- landmarks: every extracted landmark survives the achiever-removal test
- gradients: backward() against central differences on small random LSTMs
- codec: state/code round trips and collision checks

Each check yields an OracleCheck; any failure makes the suite fail.
"""

import logging
from typing import Any, Callable, Dict, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from modeling.lstm_model import random_gradient_check
from modeling.state_codec import decode, encode, pack
from planning.search_planner import SearchConfig, SearchLimitExceeded, solve, validate
from planning.strips_task import GroundTask, load_task
from recognition.landmark_recognizer import extract_landmarks, removal_oracle
from tracegen.domain_builder import build_domain
from utils.settings import domain_files

logger = logging.getLogger(__name__)

SUITES = ("planner", "landmarks", "gradients", "codec")
GRADIENT_TOLERANCE = 1e-4
HANOI_FAR_PEG_COST = 5


class OracleCheck(NamedTuple):
    suite: str
    name: str
    passed: bool
    detail: str = ""
    value: float = 0.0


def _fixture(name: str) -> GroundTask:
    return load_task(*domain_files(name))


def small_tasks(seed: int = 0) -> List[Tuple[str, GroundTask]]:
    """Chain, fork, the hanoi fixture and a few random hanoi / 8-puzzle / lights-out instances."""
    rng = np.random.default_rng(seed)
    tasks = [("chain", _fixture("chain")), ("fork", _fixture("fork"))]
    hanoi = build_domain("hanoi34")
    tasks.append(("hanoi34 far peg", hanoi.task))
    for k, goal in enumerate(hanoi.sample_goal_states(rng, 8)):
        task = hanoi.task.with_init(hanoi.sample_init(rng)).with_goal(hanoi.goal_facts(goal))
        tasks.append((f"hanoi34 #{k}", task))
    for kind, n, walk in (("eight_puzzle", 3, (3, 8)), ("lights_out4", 3, (1, 3))):
        template = build_domain(kind)
        for k, goal in enumerate(template.sample_goal_states(rng, n, walk)):
            tasks.append((f"{kind} #{k}", template.task.with_goal(template.goal_facts(goal))))
    return tasks


def planner_suite(seed: int = 0) -> List[OracleCheck]:
    checks = []
    astar, bfs = SearchConfig(), SearchConfig.breadth_first()
    for name, task in small_tasks(seed):
        try:
            plan, reference = solve(task, astar), solve(task, bfs)
        except SearchLimitExceeded as e:
            checks.append(OracleCheck("planner", name, False, str(e)))
            continue
        if plan is None or reference is None:
            ok = plan is None and reference is None
            checks.append(OracleCheck("planner", name, ok, "both unsolvable" if ok else
                                      f"astar={plan is not None} bfs={reference is not None}"))
            continue
        problems = []
        if len(plan) != len(reference):
            problems.append(f"astar cost {len(plan)} != bfs cost {len(reference)}")
        for label, p in (("astar", plan), ("bfs", reference)):
            outcome = validate(task, p)
            if not outcome.valid:
                problems.append(f"{label} plan invalid: {outcome.reason}")
        if name == "hanoi34 far peg" and len(plan) != HANOI_FAR_PEG_COST:
            problems.append(f"far-peg cost {len(plan)}, expected {HANOI_FAR_PEG_COST}")
        checks.append(OracleCheck("planner", name, not problems, "; ".join(problems) or f"cost {len(plan)}"))
    return checks


def landmark_suite(seed: int = 0) -> List[OracleCheck]:
    """Removal oracle on the tasks small enough for exhaustive search."""
    checks = []
    for name, task in small_tasks(seed):
        if not name.startswith(("chain", "fork", "hanoi34")):
            continue
        lms = extract_landmarks(task, task.goal)
        problems = []
        if lms.solvable and not task.goal <= lms.landmarks:
            problems.append("goal facts missing from the landmark set")
        for fact in sorted(lms.landmarks):
            if not removal_oracle(task, task.goal, fact):
                problems.append(f"{task.facts[fact]} is not a landmark")
        checks.append(OracleCheck("landmarks", name, not problems,
                                  "; ".join(problems) or f"{len(lms)} landmarks sound"))
    return checks


def gradient_suite(n_seeds: int = 20, tolerance: float = GRADIENT_TOLERANCE, seed: int = 0) -> List[OracleCheck]:
    """Finite-difference check of n_seeds random small models, seeds seed .. seed + n_seeds - 1."""
    checks = []
    worst = 0.0
    for model_seed in range(seed, seed + n_seeds):
        seq_len = 2 + model_seed % 4
        err = random_gradient_check(model_seed, seq_len=seq_len)
        worst = max(worst, err)
        checks.append(OracleCheck("gradients", f"seed {model_seed}", err < tolerance,
                                  f"max relative error {err:.2e}", err))
    logger.info(f"📊 Gradient check: max relative error {worst:.2e} over {n_seeds} models")
    return checks


def _round_trips(kind: str, assignments: Iterable[Sequence[int]]) -> Tuple[int, List[str]]:
    template = build_domain(kind)
    failures = []
    codes = set()
    count = 0
    for assignment in assignments:
        state = template.state_from_assignment(assignment)
        code = encode(kind, state)
        codes.add(code)
        count += 1
        if decode(kind, code) != state:
            failures.append(f"{list(assignment)} does not survive the round trip")
    if len(codes) != count:
        failures.append(f"{count - len(codes)} duplicate codes among {count} states")
    return count, failures


def codec_suite(seed: int = 0, n_random: int = 10_000, n_pairs: int = 100_000) -> List[OracleCheck]:
    rng = np.random.default_rng(seed)
    checks = []

    count, failures = _round_trips("hanoi34", build_domain("hanoi34").all_assignments())
    checks.append(OracleCheck("codec", "hanoi34 exhaustive", not failures and count == 64,
                              "; ".join(failures[:3]) or f"{count} states"))

    boards = {tuple(int(v) for v in row) for row in rng.integers(0, 2, size=(n_random, 16))}
    count, failures = _round_trips("lights_out4", sorted(boards))
    checks.append(OracleCheck("codec", "lights_out4 random", not failures,
                              "; ".join(failures[:3]) or f"{count} states"))

    grids = {tuple(int(v) for v in rng.permutation(9)) for _ in range(n_random)}
    count, failures = _round_trips("eight_puzzle", sorted(grids))
    checks.append(OracleCheck("codec", "eight_puzzle random", not failures,
                              "; ".join(failures[:3]) or f"{count} states"))

    first = np.argsort(rng.random((n_pairs, 9)), axis=1)
    second = np.argsort(rng.random((n_pairs, 9)), axis=1)
    collisions = 0
    for a, b in zip(first, second):
        if not np.array_equal(a, b) and pack("eight_puzzle", a.tolist()) == pack("eight_puzzle", b.tolist()):
            collisions += 1
    checks.append(OracleCheck("codec", "eight_puzzle pairs", collisions == 0,
                              f"{collisions} collisions among {n_pairs} pairs"))
    return checks


SUITE_RUNNERS: Dict[str, Callable[..., List[OracleCheck]]] = {
    "planner": planner_suite,
    "landmarks": landmark_suite,
    "gradients": gradient_suite,
    "codec": codec_suite,
}


def run_oracles(suites: Sequence[str] = SUITES, seed: int = 0) -> Dict[str, Any]:
    """Run the named suites ("all" expands to every suite); seed drives the random instances."""
    names = list(SUITES) if "all" in suites else list(suites)
    unknown = [s for s in names if s not in SUITE_RUNNERS]
    if unknown:
        raise ValueError(f"unknown oracle suite(s) {unknown}, choose from {SUITES + ('all',)}")
    results: Dict[str, Any] = {'suites': names, 'checks': [], 'failures': [], 'success': False}
    for name in names:
        logger.info(f"🚀 Running {name} oracle suite")
        checks = SUITE_RUNNERS[name](seed=seed)
        failed = [c for c in checks if not c.passed]
        for check in failed:
            logger.error(f"❌ {check.suite}/{check.name}: {check.detail}")
        if not failed:
            logger.info(f"✅ {name}: {len(checks)} checks passed")
        results['checks'] += checks
        results['failures'] += failed
    results['success'] = not results['failures']
    return results


def print_oracle_report(results: Dict[str, Any]) -> None:
    print(f"\n🔎 ORACLE VERIFICATION")
    print("=" * 80)
    for suite in results['suites']:
        checks = [c for c in results['checks'] if c.suite == suite]
        failed = [c for c in checks if not c.passed]
        status = "✅" if not failed else "❌"
        print(f"{status} {suite:10} {len(checks) - len(failed)}/{len(checks)} passed")
        for check in failed:
            print(f"   - {check.name}: {check.detail}")
    gradients = [c for c in results['checks'] if c.suite == "gradients"]
    if gradients:
        print(f"\n📊 Gradient suite: max relative error {max(c.value for c in gradients):.2e} "
              f"(tolerance {GRADIENT_TOLERANCE:g})")
