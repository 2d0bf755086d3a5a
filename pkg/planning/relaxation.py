"""
Delete relaxation of a ground task as numpy boolean matrices.

Shared by the search heuristics (h_max, h_add) and by landmark extraction,
which needs relaxed reachability with some actions switched off.
"""

import logging
from typing import Iterable, Optional

import numpy as np

logger = logging.getLogger(__name__)

UNREACHABLE = float("inf")
_BIG = 1e9


class RelaxedModel:
    def __init__(self, task):
        n_facts = len(task.facts)
        n_actions = len(task.actions)
        self.n_facts = n_facts
        self.n_actions = n_actions
        self.pre = np.zeros((n_actions, n_facts), dtype=bool)
        self.add = np.zeros((n_actions, n_facts), dtype=bool)
        for a in task.actions:
            self.pre[a.id, list(a.pre)] = True
            self.add[a.id, list(a.add)] = True
        self.pre_float = self.pre.astype(np.float64)
        # an action that needs f to add f never achieves f first
        self.achieves = self.add & ~self.pre

    def _vector(self, facts: Iterable[int]) -> np.ndarray:
        vec = np.zeros(self.n_facts, dtype=bool)
        ids = list(facts)
        if ids:
            vec[ids] = True
        return vec

    def reachable(self, facts: Iterable[int], allowed: Optional[np.ndarray] = None) -> np.ndarray:
        """Fixpoint of relaxed reachability from `facts`, using only `allowed` actions."""
        reached = self._vector(facts)
        pending = np.ones(self.n_actions, dtype=bool) if allowed is None else allowed.copy()
        while True:
            ready = pending & ~np.any(self.pre & ~reached, axis=1)
            if not ready.any():
                return reached
            pending &= ~ready
            new = reached | self.add[ready].any(axis=0)
            if np.array_equal(new, reached):
                return reached
            reached = new

    def h_max(self, facts: Iterable[int], goal: Iterable[int]) -> float:
        """Unit-cost h_max: the relaxed layer in which the last goal fact appears."""
        goal_ids = np.fromiter(goal, dtype=np.int64)
        reached = self._vector(facts)
        if goal_ids.size == 0 or reached[goal_ids].all():
            return 0
        pending = np.ones(self.n_actions, dtype=bool)
        level = 0
        while True:
            ready = pending & ~np.any(self.pre & ~reached, axis=1)
            if not ready.any():
                return UNREACHABLE
            pending &= ~ready
            level += 1
            reached = reached | self.add[ready].any(axis=0)
            if reached[goal_ids].all():
                return level

    def h_add(self, facts: Iterable[int], goal: Iterable[int]) -> float:
        """Additive relaxed cost of the goal (not admissible)."""
        goal_ids = np.fromiter(goal, dtype=np.int64)
        if goal_ids.size == 0:
            return 0
        cost = np.full(self.n_facts, _BIG)
        cost[list(facts)] = 0.0
        while True:
            action_cost = np.minimum(1.0 + self.pre_float @ cost, _BIG)
            offered = np.where(self.add, action_cost[:, None], _BIG).min(axis=0) if self.n_actions else cost
            new = np.minimum(cost, offered)
            if np.array_equal(new, cost):
                break
            cost = new
        total = cost[goal_ids]
        if np.any(total >= _BIG):
            return UNREACHABLE
        return float(total.sum())
