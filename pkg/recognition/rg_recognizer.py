#!/usr/bin/env python3
"""
Goal Recognition as Planning

The observations are compiled into the task: observation i gets a copy of
its action that needs marker (obs-done-{i-1}) and adds (obs-done-i), with
(obs-done-0) true initially. A plan reaching G plus the last marker embeds
the observations in order, so

    delta(G) = cost(G | O) - cost(G)

measures how much complying with the observations costs. The candidates
with the smallest delta are returned.
"""

import hashlib
import logging
import time
from dataclasses import dataclass, replace
from typing import Dict, List, MutableMapping, Optional, Sequence, Tuple

from joblib import Parallel, delayed

from planning.search_planner import Plan, SearchConfig, SearchLimitExceeded, optimal_cost, solve
from planning.strips_task import GroundAction, GroundTask, State
from recognition.recognition_problem import RecognitionProblem, RecognitionResult, UnknownObservationError

logger = logging.getLogger(__name__)

RECOGNIZER_NAME = "rg"


def marker_name(i: int) -> str:
    return f"(obs-done-{i})"


@dataclass(frozen=True, eq=False)
class CompiledTask:
    base: GroundTask
    task: GroundTask
    observations: Tuple[GroundAction, ...]
    markers: Tuple[int, ...]
    copies: Tuple[int, ...]

    @property
    def final_marker(self) -> int:
        return self.markers[-1]

    def goal_for(self, goal) -> frozenset:
        return frozenset(goal) | {self.final_marker}

    def strip_markers(self, plan: Plan) -> Plan:
        """The base-task plan behind a compiled plan: observation copies become their originals."""
        copy_of = {self.copies[i]: obs for i, obs in enumerate(self.observations)}
        base_actions = []
        for action in plan.actions:
            if action.id in copy_of:
                base_actions.append(copy_of[action.id])
            else:
                base_actions.append(self.base.actions[action.id])
        return Plan(tuple(base_actions))


def _compiled_key(task: GroundTask, observations: Sequence[GroundAction]) -> str:
    digest = hashlib.sha1(",".join(str(a.id) for a in observations).encode()).hexdigest()[:12]
    return f"{task.key}/obs-{len(observations)}-{digest}"


def compile_observations(task: GroundTask, observations: Sequence[GroundAction]) -> CompiledTask:
    """
    Extend `task` with one marker fact per observation boundary and one
    marked copy per observed action. Original actions keep their ids.

    Raises:
        UnknownObservationError: an observed action is not an action of `task`
    """
    observations = tuple(observations)
    for action in observations:
        if task.action_index.get(action.name) != action:
            raise UnknownObservationError(action.name, task.name)
    key = _compiled_key(task, observations)
    n_facts = len(task.facts)
    markers = tuple(n_facts + i for i in range(len(observations) + 1))
    facts = task.facts + tuple(marker_name(i) for i in range(len(observations) + 1))

    actions: List[GroundAction] = [replace(a, task_key=key) for a in task.actions]
    copies = []
    for i, obs in enumerate(observations, 1):
        copies.append(len(actions))
        actions.append(GroundAction(
            id=len(actions),
            name=f"(obs-{i} {obs.name[1:]}",
            pre=obs.pre | {markers[i - 1]},
            add=obs.add | {markers[i]},
            delete=obs.delete,
            cost=obs.cost,
            task_key=key,
        ))

    compiled = replace(
        task,
        name=f"{task.name}+obs{len(observations)}",
        facts=facts,
        actions=tuple(actions),
        init=State(task.init.true_facts | {markers[0]}, key),
        goal=task.goal | {markers[-1]},
        candidate_goals=(),
        key=key,
    )
    return CompiledTask(task, compiled, observations, markers, tuple(copies))


def _costs(compiled: CompiledTask, goal: frozenset, cfg: SearchConfig,
           cache: Optional[MutableMapping]) -> Tuple[Optional[int], Optional[int], str]:
    try:
        base = optimal_cost(compiled.base, goal, cfg, cache)
        if base is None:
            return None, None, "unsolvable"
        constrained = optimal_cost(compiled.task, compiled.goal_for(goal), cfg, cache)
    except SearchLimitExceeded as e:
        logger.warning(f"⚠️ {e}")
        return None, None, "limit_exceeded"
    if constrained is None:
        return base, None, "unsolvable"
    return base, constrained, ""


def recognize_rg(problem: RecognitionProblem, cfg: Optional[SearchConfig] = None,
                 cache: Optional[MutableMapping] = None, n_jobs: int = 1) -> RecognitionResult:
    """
    Rank candidates by delta(G); every candidate tying at the minimum is
    returned. Scores are 1 / (1 + delta), 0 for candidates that are
    unsolvable or hit the search limit (those are flagged). Pass a dict as
    `cache` to reuse optimal costs across problems and observability levels.
    """
    cfg = cfg or SearchConfig()
    started = time.perf_counter()
    compiled = compile_observations(problem.task, problem.observations)
    costs = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_costs)(compiled, goal, cfg, cache) for goal in problem.candidates
    )
    deltas: Dict[int, int] = {}
    flags: Dict[int, str] = {}
    for i, (base, constrained, flag) in enumerate(costs):
        if flag:
            flags[i] = flag
        else:
            deltas[i] = constrained - base
    scores = {i: (1.0 / (1.0 + deltas[i]) if i in deltas else 0.0) for i in range(len(problem.candidates))}
    if deltas:
        best = min(deltas.values())
        returned = tuple(i for i in sorted(deltas) if deltas[i] == best)
    else:
        logger.warning(f"⚠️ {problem.problem_id or problem.task.name}: no candidate could be costed")
        returned = tuple(range(len(problem.candidates)))
    elapsed = time.perf_counter() - started
    return RecognitionResult(RECOGNIZER_NAME, scores, returned, elapsed, None, flags,
                             {"deltas": deltas, "planner": cfg.mode})


def compiled_plan(compiled: CompiledTask, goal, cfg: Optional[SearchConfig] = None) -> Optional[Plan]:
    """An optimal plan of the compiled task for `goal`."""
    return solve(compiled.task.with_goal(compiled.goal_for(goal)), cfg or SearchConfig())
