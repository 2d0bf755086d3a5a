#!/usr/bin/env python3
"""
Forward Search Planner

A* (h_max), breadth-first and greedy best-first search over a GroundTask.
Used to produce dataset traces, to answer optimal-cost queries for the
cost-difference recognizer, and as the brute-force reference in tests.

Open-list ties are broken by lower f, then lower h, then smaller action
id (or its seeded rank), then insertion order, so equal configs always
give equal plans.
"""

import heapq
import itertools
import logging
import threading
from collections import Counter, defaultdict, deque
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, MutableMapping, NamedTuple, Optional, Tuple

import numpy as np

from planning.relaxation import UNREACHABLE
from planning.strips_task import GroundAction, GroundTask, State, applicable, apply

logger = logging.getLogger(__name__)

MODES = ("optimal_astar", "optimal_bfs", "satisficing_gbfs")
HEURISTICS = ("goal_count", "h_max", "h_add")
DEFAULT_NODE_LIMIT = 5_000_000


class SearchLimitExceeded(RuntimeError):
    def __init__(self, nodes_expanded: int, task_name: str = ""):
        self.nodes_expanded = nodes_expanded
        super().__init__(f"node limit exceeded after {nodes_expanded} expansions"
                         + (f" on {task_name}" if task_name else ""))


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "optimal_astar"
    heuristic: str = "h_max"
    node_limit: int = DEFAULT_NODE_LIMIT
    seed: Optional[int] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode}")
        if self.heuristic not in HEURISTICS:
            raise ValueError(f"heuristic must be one of {HEURISTICS}, got {self.heuristic}")
        if self.node_limit <= 0:
            raise ValueError(f"node_limit must be positive, got {self.node_limit}")
        if self.mode == "optimal_astar" and self.heuristic != "h_max":
            raise ValueError(f"optimal_astar needs the admissible h_max, got {self.heuristic}")

    @classmethod
    def satisficing(cls, **kwargs) -> "SearchConfig":
        return cls(mode="satisficing_gbfs", heuristic="h_add", **kwargs)

    @classmethod
    def breadth_first(cls, **kwargs) -> "SearchConfig":
        return cls(mode="optimal_bfs", heuristic="h_max", **kwargs)


@dataclass(frozen=True)
class Plan:
    actions: Tuple[GroundAction, ...] = ()

    @property
    def cost(self) -> int:
        return sum(a.cost for a in self.actions)

    @property
    def names(self) -> List[str]:
        return [a.name for a in self.actions]

    def __len__(self) -> int:
        return len(self.actions)


class PlanValidation(NamedTuple):
    valid: bool
    reason: str = ""
    failed_step: Optional[int] = None


def _progress(facts: FrozenSet[int], action: GroundAction) -> FrozenSet[int]:
    return (facts | action.add) - action.delete


class _SuccessorGenerator:
    """Indexes each action under its rarest precondition fact."""

    def __init__(self, task: GroundTask):
        counts = Counter(f for a in task.actions for f in a.pre)
        self.always: List[GroundAction] = []
        self.by_fact: Dict[int, List[GroundAction]] = defaultdict(list)
        for a in task.actions:
            if a.pre:
                self.by_fact[min(a.pre, key=lambda f: (counts[f], f))].append(a)
            else:
                self.always.append(a)

    def applicable(self, facts: FrozenSet[int]) -> List[GroundAction]:
        candidates = list(self.always)
        for f in facts:
            bucket = self.by_fact.get(f)
            if bucket:
                candidates.extend(bucket)
        return sorted((a for a in candidates if a.pre <= facts), key=lambda a: a.id)


_generators: Dict[Tuple[str, int], _SuccessorGenerator] = {}
_generators_lock = threading.Lock()


def _successors(task: GroundTask) -> _SuccessorGenerator:
    key = (task.key, len(task.actions))
    with _generators_lock:
        gen = _generators.get(key)
        if gen is None:
            if len(_generators) > 256:
                _generators.clear()
            gen = _generators[key] = _SuccessorGenerator(task)
        return gen


def successor_states(task: GroundTask, state: State) -> List[Tuple[GroundAction, State]]:
    """Applicable actions of `state` in id order, each paired with its successor."""
    facts = state.true_facts
    return [(a, State(_progress(facts, a), task.key)) for a in _successors(task).applicable(facts)]


def make_heuristic(task: GroundTask, name: str) -> Callable[[FrozenSet[int]], float]:
    goal = task.goal
    if name == "goal_count":
        return lambda facts: len(goal - facts)
    if name == "h_max":
        return lambda facts: task.relaxation.h_max(facts, goal)
    if name == "h_add":
        return lambda facts: task.relaxation.h_add(facts, goal)
    raise ValueError(f"unknown heuristic {name}")


def _action_rank(task: GroundTask, seed: Optional[int]) -> np.ndarray:
    if seed is None:
        return np.arange(len(task.actions))
    return np.random.default_rng(seed).permutation(len(task.actions))


def _extract(parents: Dict, state: FrozenSet[int]) -> Plan:
    actions = []
    while parents[state] is not None:
        state, action = parents[state]
        actions.append(action)
    return Plan(tuple(reversed(actions)))


def solve(task: GroundTask, cfg: SearchConfig = SearchConfig()) -> Optional[Plan]:
    """
    Search for a plan from task.init to task.goal.

    Returns:
        A Plan (minimum length in the optimal modes), or None when the goal
        is unreachable.

    Raises:
        SearchLimitExceeded: more than cfg.node_limit expansions
    """
    init = task.init.true_facts
    if task.goal <= init:
        return Plan()
    if cfg.mode == "optimal_bfs":
        return _breadth_first(task, cfg)
    return _best_first(task, cfg, astar=cfg.mode == "optimal_astar")


def _breadth_first(task: GroundTask, cfg: SearchConfig) -> Optional[Plan]:
    goal = task.goal
    gen = _successors(task)
    rank = _action_rank(task, cfg.seed)
    init = task.init.true_facts
    parents: Dict[FrozenSet[int], Optional[Tuple]] = {init: None}
    frontier = deque([init])
    expanded = 0
    while frontier:
        state = frontier.popleft()
        expanded += 1
        if expanded > cfg.node_limit:
            raise SearchLimitExceeded(expanded - 1, task.name)
        for action in sorted(gen.applicable(state), key=lambda a: rank[a.id]):
            child = _progress(state, action)
            if child in parents:
                continue
            parents[child] = (state, action)
            if goal <= child:
                logger.debug(f"BFS solved {task.name} after {expanded} expansions")
                return _extract(parents, child)
            frontier.append(child)
    return None


def _best_first(task: GroundTask, cfg: SearchConfig, astar: bool) -> Optional[Plan]:
    goal = task.goal
    gen = _successors(task)
    rank = _action_rank(task, cfg.seed)
    heuristic = make_heuristic(task, cfg.heuristic)
    init = task.init.true_facts

    h0 = heuristic(init)
    if h0 == UNREACHABLE:
        return None
    counter = itertools.count()
    g: Dict[FrozenSet[int], int] = {init: 0}
    parents: Dict[FrozenSet[int], Optional[Tuple]] = {init: None}
    open_list = [(h0, h0, -1, next(counter), init)]
    closed = set()
    expanded = 0
    while open_list:
        _, h_value, _, _, state = heapq.heappop(open_list)
        if state in closed:
            continue
        if goal <= state:
            logger.debug(f"{cfg.mode} solved {task.name} after {expanded} expansions")
            return _extract(parents, state)
        closed.add(state)
        expanded += 1
        if expanded > cfg.node_limit:
            raise SearchLimitExceeded(expanded - 1, task.name)
        base = g[state]
        for action in gen.applicable(state):
            child = _progress(state, action)
            if child in closed:
                continue
            new_g = base + action.cost
            if astar:
                if new_g >= g.get(child, UNREACHABLE):
                    continue
            elif child in g:
                continue
            g[child] = new_g
            parents[child] = (state, action)
            h_child = heuristic(child)
            if h_child == UNREACHABLE:
                continue
            f_child = new_g + h_child if astar else h_child
            heapq.heappush(open_list, (f_child, h_child, int(rank[action.id]), next(counter), child))
    return None


def optimal_cost(task: GroundTask, goal_override, cfg: Optional[SearchConfig] = None,
                 cache: Optional[MutableMapping] = None) -> Optional[int]:
    """
    Length of a shortest plan from task.init to `goal_override`, or None if
    no plan exists. Pass a dict as `cache` to memoize per (task, goal).
    """
    goal = frozenset(goal_override)
    key = (task.key, task.init.true_facts, goal)
    if cache is not None and key in cache:
        return cache[key]
    if goal <= task.init.true_facts:
        cost = 0
    elif task.relaxation.h_max(task.init.true_facts, goal) == UNREACHABLE:
        cost = None
    else:
        plan = solve(task.with_goal(goal), cfg or SearchConfig())
        cost = plan.cost if plan is not None else None
    if cache is not None:
        cache[key] = cost
    return cost


def validate(task: GroundTask, plan: Plan) -> PlanValidation:
    """Replay `plan` from task.init with the public transition function."""
    state = task.init
    for i, action in enumerate(plan.actions):
        if action.task_key and task.key and action.task_key != task.key:
            return PlanValidation(False, f"step {i}: {action.name} belongs to another task", i)
        if not applicable(state, action):
            missing = task.describe(action.pre - state.true_facts)
            return PlanValidation(False, f"step {i}: {action.name} not applicable, missing "
                                         f"{', '.join(missing)}", i)
        state = apply(state, action)
    if not state.satisfies(task.goal):
        missing = task.describe(task.goal - state.true_facts)
        return PlanValidation(False, f"goal not reached, missing {', '.join(missing)}", len(plan))
    return PlanValidation(True)
