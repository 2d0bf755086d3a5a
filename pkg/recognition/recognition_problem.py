#!/usr/bin/env python3
"""
Recognition Problems and Results

A RecognitionProblem bundles a ground task (its init is the observed agent's
start), the candidate goals and the observed actions. Every recognizer answers
with a RecognitionResult keyed by candidate index.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Tuple

from planning.strips_task import GroundAction, GroundTask, TaskMismatchError

logger = logging.getLogger(__name__)

SCORE_TOLERANCE = 1e-12


class UnknownObservationError(ValueError):
    def __init__(self, name: str, task_name: str = ""):
        self.name = name
        super().__init__(f"observed action {name} is not a ground action of {task_name or 'the task'}")


@dataclass(frozen=True)
class RecognitionProblem:
    task: GroundTask
    candidates: Tuple[frozenset, ...]
    observations: Tuple[GroundAction, ...] = ()
    hidden_goal: Optional[int] = None
    problem_id: str = ""
    level: int = 100

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(frozenset(c) for c in self.candidates))
        object.__setattr__(self, "observations", tuple(self.observations))
        if not self.candidates:
            raise ValueError("a recognition problem needs at least one candidate goal")
        n = len(self.task.facts)
        for i, goal in enumerate(self.candidates):
            if any(not 0 <= f < n for f in goal):
                raise TaskMismatchError(f"candidate {i} refers to facts outside task {self.task.name}")
        for action in self.observations:
            if self.task.action_index.get(action.name) != action:
                raise UnknownObservationError(action.name, self.task.name)
        if self.hidden_goal is not None and not 0 <= self.hidden_goal < len(self.candidates):
            raise ValueError(f"hidden goal index {self.hidden_goal} outside {len(self.candidates)} candidates")

    @classmethod
    def from_names(cls, task: GroundTask, candidates: Iterable[Iterable[str]],
                   observed: Iterable[str], **kwargs) -> "RecognitionProblem":
        actions = []
        for name in observed:
            action = task.action_index.get(name)
            if action is None:
                raise UnknownObservationError(name, task.name)
            actions.append(action)
        return cls(task, tuple(task.fact_ids(c) for c in candidates), tuple(actions), **kwargs)

    def with_observations(self, observations: Sequence[GroundAction]) -> "RecognitionProblem":
        return RecognitionProblem(self.task, self.candidates, tuple(observations), self.hidden_goal,
                                  self.problem_id, self.level)


@dataclass(frozen=True)
class RecognitionResult:
    recognizer: str
    scores: Mapping[int, float]
    returned: Tuple[int, ...]
    elapsed: float = 0.0
    theta: Optional[float] = None
    flags: Mapping[int, str] = field(default_factory=dict)
    details: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.returned:
            raise ValueError(f"{self.recognizer} returned no goal")

    @property
    def spread(self) -> int:
        return len(self.returned)

    def contains(self, hidden: int) -> bool:
        return hidden in self.returned

    def is_strict_hit(self, hidden: int) -> bool:
        return self.returned == (hidden,)


def select_within(scores: Mapping[int, float], theta: float) -> Tuple[int, ...]:
    """Candidates scoring at least max - theta/100, in index order."""
    if not 0 <= theta <= 100:
        raise ValueError(f"theta must be in [0, 100], got {theta}")
    best = max(scores.values())
    return tuple(i for i in sorted(scores) if scores[i] >= best - theta / 100 - SCORE_TOLERANCE)

