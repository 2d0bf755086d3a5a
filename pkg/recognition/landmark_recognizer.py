#!/usr/bin/env python3
"""
Landmark-Based Goal Recognition

Fact landmarks per candidate goal by backchaining over the delete
relaxation, then two scores per candidate:

- goal completion (gc): achieved landmarks / all landmarks
- uniqueness (uniq): the same ratio with every landmark weighted by
  1 / (number of candidates whose landmark set contains it)

Candidates scoring within theta percent of the best are returned.
"""

import logging
import time
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from planning.search_planner import SearchConfig, solve
from planning.strips_task import GroundAction, GroundTask
from recognition.recognition_problem import RecognitionProblem, RecognitionResult, select_within

logger = logging.getLogger(__name__)

HEURISTICS = ("gc", "uniq")


@dataclass(frozen=True)
class LandmarkSet:
    goal: frozenset
    landmarks: frozenset
    solvable: bool = True

    def __len__(self) -> int:
        return len(self.landmarks)


def _first_achiever_preconditions(task: GroundTask, fact: int) -> Optional[frozenset]:
    """
    Facts shared by the preconditions of every possible first achiever of
    `fact`: actions adding it (without needing it) whose preconditions are
    relaxed-reachable while no achiever of `fact` is used.
    """
    rm = task.relaxation
    allowed = ~rm.add[:, fact]
    reached = rm.reachable(task.init.true_facts, allowed)
    usable = rm.achieves[:, fact] & ~np.any(rm.pre & ~reached, axis=1)
    ids = np.flatnonzero(usable)
    if ids.size == 0:
        return None
    shared = np.logical_and.reduce(rm.pre[ids], axis=0)
    return frozenset(int(f) for f in np.flatnonzero(shared))


def extract_landmarks(task: GroundTask, goal: Iterable[int]) -> LandmarkSet:
    """
    Sound fact landmarks of reaching `goal` from task.init.

    Goal facts are landmarks; so is every fact needed by all possible first
    achievers of a landmark, iterated to a fixpoint. Static facts are left
    out unless they belong to the goal. A goal that is unreachable even in
    the relaxation yields an empty, unsolvable set.
    """
    goal = frozenset(goal)
    init = task.init.true_facts
    reached = task.relaxation.reachable(init)
    if goal and not reached[list(goal)].all():
        return LandmarkSet(goal, frozenset(), solvable=False)

    landmarks = set(goal)
    queue = sorted(goal - init)
    while queue:
        fact = queue.pop()
        shared = _first_achiever_preconditions(task, fact)
        if shared is None:
            continue
        for f in sorted(shared - landmarks):
            landmarks.add(f)
            if f not in init:
                queue.append(f)
    landmarks -= task.static_facts - goal
    return LandmarkSet(goal, frozenset(landmarks))


def achieved_landmarks(lms: LandmarkSet, task: GroundTask, observations: Sequence[GroundAction]) -> frozenset:
    """Landmarks true initially or touched (precondition or add) by an observed action."""
    seen = set(task.init.true_facts)
    for action in observations:
        seen |= action.pre
        seen |= action.add
    return lms.landmarks & frozenset(seen)


def landmark_sets(problem: RecognitionProblem, n_jobs: int = 1) -> List[LandmarkSet]:
    """One LandmarkSet per candidate, in candidate order."""
    return Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(extract_landmarks)(problem.task, goal) for goal in problem.candidates
    )


def _ratio(achieved: frozenset, landmarks: frozenset, weight) -> float:
    total = sum(weight(l) for l in landmarks)
    if total == 0:
        return 1.0
    return sum(weight(l) for l in achieved) / total


def h_gc(problem: RecognitionProblem, index: int, lms: Optional[LandmarkSet] = None) -> float:
    if lms is None:
        lms = extract_landmarks(problem.task, problem.candidates[index])
    if not lms.solvable:
        return 0.0
    achieved = achieved_landmarks(lms, problem.task, problem.observations)
    return _ratio(achieved, lms.landmarks, lambda _: 1.0)


def uniqueness(sets: Sequence[LandmarkSet]) -> Dict[int, float]:
    """Landmark fact -> 1 / number of candidate landmark sets holding it."""
    counts: Dict[int, int] = {}
    for lms in sets:
        for l in lms.landmarks:
            counts[l] = counts.get(l, 0) + 1
    return {l: 1.0 / n for l, n in counts.items()}


def h_uniq(problem: RecognitionProblem, sets: Optional[Sequence[LandmarkSet]] = None) -> Dict[int, float]:
    sets = sets if sets is not None else landmark_sets(problem)
    weights = uniqueness(sets)
    scores = {}
    for i, lms in enumerate(sets):
        if not lms.solvable:
            scores[i] = 0.0
            continue
        achieved = achieved_landmarks(lms, problem.task, problem.observations)
        scores[i] = _ratio(achieved, lms.landmarks, weights.__getitem__)
    return scores


def recognize_pom(problem: RecognitionProblem, heuristic: str = "gc", theta: float = 0.0,
                  n_jobs: int = 1) -> RecognitionResult:
    """
    Score every candidate with h_gc or h_uniq and return those within
    theta/100 of the best. Unsolvable candidates score 0 and are flagged;
    if no candidate is solvable all of them are returned.
    """
    if heuristic not in HEURISTICS:
        raise ValueError(f"heuristic must be one of {HEURISTICS}, got {heuristic!r}")
    started = time.perf_counter()
    sets = landmark_sets(problem, n_jobs)
    if heuristic == "gc":
        scores = {i: h_gc(problem, i, lms) for i, lms in enumerate(sets)}
    else:
        scores = h_uniq(problem, sets)
    flags = {i: "unsolvable" for i, lms in enumerate(sets) if not lms.solvable}

    if len(flags) == len(sets):
        logger.warning(f"⚠️ {problem.problem_id or problem.task.name}: no candidate is solvable")
        returned = tuple(range(len(sets)))
    else:
        solvable = {i: s for i, s in scores.items() if i not in flags}
        returned = select_within(solvable, theta)
    elapsed = time.perf_counter() - started
    return RecognitionResult(f"pom_{heuristic}", scores, returned, elapsed, theta, flags,
                             {"landmarks": [len(lms) for lms in sets]})


# === Soundness oracle ===

def without_achievers(task: GroundTask, fact: int) -> GroundTask:
    """Copy of `task` with every action adding `fact` removed (ids renumbered)."""
    kept = [a for a in task.actions if fact not in a.add]
    actions = tuple(replace(a, id=k) for k, a in enumerate(kept))
    return replace(task, actions=actions, key=f"{task.key}/without-{fact}")


def removal_oracle(task: GroundTask, goal: Iterable[int], fact: int) -> bool:
    """
    True when `fact` is a landmark by brute force: it holds initially, or no
    plan reaches `goal` once all its achievers are gone.
    """
    if fact in task.init.true_facts:
        return True
    reduced = without_achievers(task, fact).with_goal(goal)
    return solve(reduced, SearchConfig.breadth_first()) is None
