#!/usr/bin/env python3
"""
Benchmark Domain Templates

Loads hanoi34, eight_puzzle and lights_out4 from their PDDL fixtures and gives
each a slot/value layout:

- hanoi34: one slot per disk (d1 smallest), value = peg index p1..p4 -> 0..3
- eight_puzzle: one slot per cell c0..c8, value = tile number, 0 = blank
- lights_out4: one slot per cell c0..c15, value = 1 when the light is on

States convert to and from these assignments; the state codec packs them into
bits and the dataset pipeline draws goals and initial states through them.
"""

import itertools
import logging
from collections import deque
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from planning.search_planner import successor_states
from planning.strips_task import GroundTask, State, load_task
from utils.settings import DOMAIN_KINDS, domain_files

logger = logging.getLogger(__name__)

Assignment = Tuple[int, ...]


class MalformedStateError(ValueError):
    """A state that does not give exactly one value to every slot of its domain."""


class DomainTemplate:
    """Ground task of a benchmark domain plus its assignment layout."""

    kind = ""
    slots: Tuple[str, ...] = ()
    values: Tuple[str, ...] = ()

    def __init__(self, task: GroundTask):
        self.task = task
        self.anchor = task.init
        self._tokens = [name[1:-1].split() for name in task.facts]
        self._slot_index = {name: i for i, name in enumerate(self.slots)}

    # --- layout hooks ---

    def assignment_of(self, state: State) -> Assignment:
        raise NotImplementedError

    def _slot_facts(self, assignment: Assignment) -> List[str]:
        raise NotImplementedError

    def check_assignment(self, assignment: Sequence[int]) -> None:
        if len(assignment) != len(self.slots):
            raise MalformedStateError(f"{self.kind} needs {len(self.slots)} slot values, "
                                      f"got {len(assignment)}")
        bad = [v for v in assignment if not 0 <= v < len(self.values)]
        if bad:
            raise MalformedStateError(f"{self.kind} slot values out of range: {bad}")

    # --- states and goals ---

    def state_from_assignment(self, assignment: Iterable[int]) -> State:
        assignment = tuple(int(v) for v in assignment)
        self.check_assignment(assignment)
        return self.task.state(self.task.fact_ids(self._slot_facts(assignment)) | self.task.static_facts)

    def goal_facts(self, state: State) -> frozenset:
        """Full-state goal: every non-static fact of `state`."""
        return frozenset(state.true_facts - self.task.static_facts)

    def state_of_goal(self, goal: Iterable[int]) -> State:
        return self.task.state(frozenset(goal) | self.task.static_facts)

    def neighbours(self, state: State) -> List[State]:
        return [nxt for _, nxt in successor_states(self.task, state)]

    def reachable_states(self, start: Optional[State] = None,
                         max_depth: Optional[int] = None) -> Iterator[State]:
        """Breadth-first enumeration from `start` (the anchor by default)."""
        for state, _ in self.states_by_depth(start, max_depth):
            yield state

    def states_by_depth(self, start: Optional[State] = None,
                        max_depth: Optional[int] = None) -> Iterator[Tuple[State, int]]:
        """(state, BFS depth) pairs in breadth-first order."""
        start = start or self.anchor
        seen = {start.true_facts}
        frontier = deque([(start, 0)])
        while frontier:
            state, depth = frontier.popleft()
            yield state, depth
            if max_depth is not None and depth >= max_depth:
                continue
            for nxt in self.neighbours(state):
                if nxt.true_facts not in seen:
                    seen.add(nxt.true_facts)
                    frontier.append((nxt, depth + 1))

    def sample_distant_states(self, rng: np.random.Generator, n: int, depth: Tuple[int, int],
                              exclude: Iterable[frozenset] = ()) -> List[State]:
        """
        Up to `n` distinct states whose shortest distance from the anchor lies
        in depth[0]..depth[1], drawn uniformly from that band.
        """
        if n <= 0:
            return []
        low, high = depth
        taken = set(exclude)
        band = [s for s, d in self.states_by_depth(max_depth=high)
                if d >= low and self.goal_facts(s) not in taken]
        order = rng.permutation(len(band))[:n]
        return [band[int(i)] for i in order]

    def random_walk(self, rng: np.random.Generator, n_moves: int,
                    start: Optional[State] = None) -> State:
        state = start or self.anchor
        for _ in range(n_moves):
            options = self.neighbours(state)
            if not options:
                break
            state = options[int(rng.integers(len(options)))]
        return state

    def sample_goal_states(self, rng: np.random.Generator, n: int, walk: Tuple[int, int] = (3, 8),
                           exclude: Iterable[frozenset] = ()) -> List[State]:
        """
        Up to `n` distinct states drawn by random walks of walk[0]..walk[1]
        moves from the anchor. The anchor itself and anything in `exclude`
        (goal fact sets) are never returned.
        """
        taken = set(exclude) | {self.goal_facts(self.anchor)}
        found: List[State] = []
        for _ in range(max(50 * n, 200)):
            if len(found) == n:
                break
            state = self.random_walk(rng, int(rng.integers(walk[0], walk[1] + 1)))
            goal = self.goal_facts(state)
            if goal not in taken:
                taken.add(goal)
                found.append(state)
        return found

    def sample_init(self, rng: np.random.Generator, walk: Tuple[int, int] = (0, 2)) -> State:
        return self.random_walk(rng, int(rng.integers(walk[0], walk[1] + 1)))


class HanoiTemplate(DomainTemplate):
    kind = "hanoi34"
    slots = ("d1", "d2", "d3")
    values = ("p1", "p2", "p3", "p4")

    def assignment_of(self, state: State) -> Assignment:
        support: Dict[str, str] = {}
        for f in state.true_facts:
            tok = self._tokens[f]
            if tok[0] != "on":
                continue
            if tok[1] in support:
                raise MalformedStateError(f"disk {tok[1]} is on both {support[tok[1]]} and {tok[2]}")
            support[tok[1]] = tok[2]
        pegs = []
        for disk in self.slots:
            where, seen = support.get(disk), {disk}
            while where not in self.values:
                if where is None:
                    raise MalformedStateError(f"disk {disk} rests on nothing")
                if where in seen:
                    raise MalformedStateError(f"disk {disk} sits in a cycle of disks")
                seen.add(where)
                where = support.get(where)
            pegs.append(self.values.index(where))
        return tuple(pegs)

    def _slot_facts(self, assignment: Assignment) -> List[str]:
        facts = []
        for p, peg in enumerate(self.values):
            top = peg
            # largest disk at the bottom
            for i in reversed(range(len(self.slots))):
                if assignment[i] == p:
                    facts.append(f"(on {self.slots[i]} {top})")
                    top = self.slots[i]
            facts.append(f"(clear {top})")
        return facts

    def all_assignments(self) -> Iterator[Assignment]:
        return itertools.product(range(len(self.values)), repeat=len(self.slots))

    def sample_goal_states(self, rng: np.random.Generator, n: int, walk: Tuple[int, int] = (3, 8),
                           exclude: Iterable[frozenset] = ()) -> List[State]:
        # every state is reachable, so goals are drawn uniformly over all of them
        taken = set(exclude)
        pool = [s for s in map(self.state_from_assignment, self.all_assignments())
                if self.goal_facts(s) not in taken]
        order = rng.permutation(len(pool))[:n]
        return [pool[i] for i in order]

    def sample_init(self, rng: np.random.Generator, walk: Tuple[int, int] = (0, 2)) -> State:
        return self.state_from_assignment(rng.integers(len(self.values), size=len(self.slots)))


class EightPuzzleTemplate(DomainTemplate):
    kind = "eight_puzzle"
    slots = tuple(f"c{i}" for i in range(9))
    values = ("blank",) + tuple(f"t{i}" for i in range(1, 9))

    def assignment_of(self, state: State) -> Assignment:
        grid: List[Optional[int]] = [None] * len(self.slots)
        for f in state.true_facts:
            tok = self._tokens[f]
            if tok[0] == "at":
                cell, tile = tok[2], self.values.index(tok[1])
            elif tok[0] == "blank":
                cell, tile = tok[1], 0
            else:
                continue
            i = self._slot_index[cell]
            if grid[i] is not None:
                raise MalformedStateError(f"cell {cell} holds both {self.values[grid[i]]} "
                                          f"and {self.values[tile]}")
            grid[i] = tile
        if None in grid:
            raise MalformedStateError(f"cell {self.slots[grid.index(None)]} has no tile")
        self.check_assignment(grid)
        return tuple(grid)

    def check_assignment(self, assignment: Sequence[int]) -> None:
        super().check_assignment(assignment)
        if len(set(assignment)) != len(assignment):
            raise MalformedStateError(f"tile placed twice in {list(assignment)}")

    def _slot_facts(self, assignment: Assignment) -> List[str]:
        return [f"(blank {cell})" if tile == 0 else f"(at {self.values[tile]} {cell})"
                for cell, tile in zip(self.slots, assignment)]


class LightsOutTemplate(DomainTemplate):
    kind = "lights_out4"
    slots = tuple(f"c{i}" for i in range(16))
    values = ("off", "on")

    def assignment_of(self, state: State) -> Assignment:
        board: List[Optional[int]] = [None] * len(self.slots)
        for f in state.true_facts:
            tok = self._tokens[f]
            if tok[0] != "light":
                continue
            i = self._slot_index[tok[1]]
            if board[i] is not None:
                raise MalformedStateError(f"light {tok[1]} is both on and off")
            board[i] = self.values.index(tok[2])
        if None in board:
            raise MalformedStateError(f"light {self.slots[board.index(None)]} has no value")
        return tuple(board)

    def _slot_facts(self, assignment: Assignment) -> List[str]:
        return [f"(light {cell} {self.values[v]})" for cell, v in zip(self.slots, assignment)]


_TEMPLATES = {cls.kind: cls for cls in (HanoiTemplate, EightPuzzleTemplate, LightsOutTemplate)}


@lru_cache(maxsize=None)
def build_domain(kind: str) -> DomainTemplate:
    if kind not in DOMAIN_KINDS:
        raise ValueError(f"unknown domain kind {kind!r}, expected one of {', '.join(DOMAIN_KINDS)}")
    task = load_task(*domain_files(kind))
    template = _TEMPLATES[kind](task)
    logger.info(f"📐 Built {kind}: {len(task.facts)} facts, {len(task.actions)} ground actions")
    return template
