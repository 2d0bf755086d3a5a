#!/usr/bin/env python3
"""
Plan Traces

Solves a (task, goal) pair and records the plan together with every state it
visits: states[0] is the initial state and states[i + 1] follows action i.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Tuple

from planning.search_planner import Plan, SearchConfig, solve
from planning.strips_task import GroundTask, State, apply

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlanTrace:
    task: GroundTask = field(compare=False, repr=False)
    goal: frozenset
    plan: Plan
    states: Tuple[State, ...]

    @property
    def actions(self):
        return self.plan.actions

    @property
    def action_names(self) -> List[str]:
        return self.plan.names

    @property
    def final_state(self) -> State:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.plan)


def replay(task: GroundTask, plan: Plan, start: Optional[State] = None) -> Tuple[State, ...]:
    state = start or task.init
    states = [state]
    for action in plan.actions:
        state = apply(state, action, task)
        states.append(state)
    return tuple(states)


def generate_trace(task: GroundTask, goal: Iterable[int], cfg: SearchConfig = SearchConfig(),
                   seed: Optional[int] = None) -> Optional[PlanTrace]:
    """
    Plan from task.init to `goal` and record the visited states.

    `seed` (when the config carries none) permutes the planner's tie-breaking,
    so different seeds can give different plans of the same cost.

    Returns:
        The trace, or None when the goal cannot be reached (logged, skipped).

    Raises:
        SearchLimitExceeded: the planner hit its node limit
    """
    goal = frozenset(goal)
    if seed is not None and cfg.seed is None:
        cfg = replace(cfg, seed=seed)
    goal_task = task.with_goal(goal)
    plan = solve(goal_task, cfg)
    if plan is None:
        logger.warning(f"⚠️ Goal unreachable from {task.name} initial state, skipped: "
                       f"{', '.join(task.describe(goal - task.init.true_facts))}")
        return None
    return PlanTrace(goal_task, goal, plan, replay(goal_task, plan))


def check_trace(trace: PlanTrace) -> List[str]:
    """Replay invariants of a trace; returns a list of violations."""
    problems = []
    if len(trace.states) != len(trace.plan) + 1:
        problems.append(f"{len(trace.states)} states for {len(trace.plan)} actions")
        return problems
    for i, action in enumerate(trace.actions):
        if not action.pre <= trace.states[i].true_facts:
            problems.append(f"step {i}: {action.name} not applicable")
            break
        if apply(trace.states[i], action) != trace.states[i + 1]:
            problems.append(f"step {i}: recorded successor differs from {action.name}")
            break
    if not trace.final_state.satisfies(trace.goal):
        problems.append("final state does not satisfy the goal")
    return problems
