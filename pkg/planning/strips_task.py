#!/usr/bin/env python3
"""
Grounded STRIPS Tasks

Turns a parsed DomainModel + ProblemSpec into a propositional GroundTask:
a dense fact table, ground actions with pre/add/del fact-id sets, the
initial State and the goal. Also hosts the state transition function.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from planning.pddl_parser import Atom, DomainModel, Operator, ProblemSpec, parse_domain, parse_problem

logger = logging.getLogger(__name__)

_task_serial = itertools.count(1)


class TaskMismatchError(ValueError):
    """State and action (or state and task) come from different fact tables."""


class InapplicableActionError(ValueError):
    def __init__(self, action_name: str, missing: Sequence[str]):
        self.action_name = action_name
        self.missing = tuple(missing)
        super().__init__(f"{action_name} is not applicable, missing: {', '.join(self.missing)}")


@dataclass(frozen=True)
class State:
    true_facts: frozenset
    task_key: str = field(default="", compare=False, repr=False)

    def __contains__(self, fact_id: int) -> bool:
        return fact_id in self.true_facts

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.true_facts))

    def __len__(self) -> int:
        return len(self.true_facts)

    def satisfies(self, goal: Iterable[int]) -> bool:
        return self.true_facts.issuperset(goal)


@dataclass(frozen=True)
class GroundAction:
    id: int
    name: str
    pre: frozenset
    add: frozenset
    delete: frozenset
    cost: int = 1
    task_key: str = field(default="", compare=False, repr=False)


@dataclass(frozen=True, eq=False)
class GroundTask:
    name: str
    facts: Tuple[str, ...]
    actions: Tuple[GroundAction, ...]
    init: State
    goal: frozenset
    static_facts: frozenset = frozenset()
    candidate_goals: Tuple[frozenset, ...] = ()
    key: str = ""

    @cached_property
    def fact_index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.facts)}

    @cached_property
    def action_index(self) -> Dict[str, GroundAction]:
        return {a.name: a for a in self.actions}

    @cached_property
    def relaxation(self):
        from planning.relaxation import RelaxedModel
        return RelaxedModel(self)

    def state(self, fact_ids: Iterable[int]) -> State:
        facts = frozenset(fact_ids)
        bad = [f for f in facts if not 0 <= f < len(self.facts)]
        if bad:
            raise TaskMismatchError(f"fact ids {sorted(bad)} are outside task {self.name} "
                                    f"(|F| = {len(self.facts)})")
        return State(facts, self.key)

    def state_from_names(self, names: Iterable[str]) -> State:
        try:
            return self.state(self.fact_index[n] for n in names)
        except KeyError as e:
            raise TaskMismatchError(f"fact {e.args[0]} is not in task {self.name}") from None

    def fact_ids(self, names: Iterable[str]) -> frozenset:
        return frozenset(self.state_from_names(names).true_facts)

    def describe(self, fact_ids: Iterable[int]) -> List[str]:
        return [self.facts[f] for f in sorted(fact_ids)]

    def _derive(self, **changes) -> "GroundTask":
        derived = replace(self, **changes)
        # same facts and actions, so the table-level caches carry over
        for name in ("fact_index", "action_index", "relaxation"):
            if name in self.__dict__:
                derived.__dict__[name] = self.__dict__[name]
        return derived

    def with_init(self, state: Union[State, Iterable[int]]) -> "GroundTask":
        facts = state.true_facts if isinstance(state, State) else state
        return self._derive(init=self.state(facts))

    def with_goal(self, goal: Iterable[int]) -> "GroundTask":
        return self._derive(goal=frozenset(self.state(goal).true_facts))


# === Transition function ===

def _check_same_task(s: State, a: GroundAction) -> None:
    if s.task_key and a.task_key and s.task_key != a.task_key:
        raise TaskMismatchError(f"state from task {s.task_key} used with action {a.name} "
                                f"from task {a.task_key}")


def applicable(s: State, a: GroundAction) -> bool:
    _check_same_task(s, a)
    return a.pre <= s.true_facts


def apply(s: State, a: GroundAction, task: Optional[GroundTask] = None) -> State:
    """
    Successor state (s ∪ add(a)) minus del(a).

    Raises:
        InapplicableActionError: pre(a) is not contained in s; `missing`
            lists the unmet facts (by name when `task` is given)
    """
    _check_same_task(s, a)
    missing = a.pre - s.true_facts
    if missing:
        names = task.describe(missing) if task is not None else [str(f) for f in sorted(missing)]
        raise InapplicableActionError(a.name, names)
    return State((s.true_facts | a.add) - a.delete, s.task_key)


# === Grounding ===

def _objects_by_type(dom: DomainModel, prob: ProblemSpec) -> Dict[str, List[str]]:
    type_names = [t.name for t in dom.types] + ["object"]
    return {
        t: [obj.name for obj in prob.objects if dom.is_subtype(obj.type, t)]
        for t in type_names
    }


def _bindings(op: Operator, static: frozenset, static_facts: Dict[str, List[Tuple[str, ...]]],
              objects: Dict[str, List[str]]) -> Iterator[Dict[str, str]]:
    """Join static preconditions against init, then enumerate the remaining parameters."""
    param_types = {p.name: p.type for p in op.params}
    allowed = {p.name: set(objects.get(p.type, ())) for p in op.params}
    static_atoms = [a for a in op.pre if a.predicate in static]

    def extend(i: int, binding: Dict[str, str]) -> Iterator[Dict[str, str]]:
        if i == len(static_atoms):
            free = [p.name for p in op.params if p.name not in binding]
            for combo in itertools.product(*(objects.get(param_types[v], ()) for v in free)):
                yield {**binding, **dict(zip(free, combo))}
            return
        atom = static_atoms[i]
        for args in static_facts.get(atom.predicate, ()):
            new = dict(binding)
            for var, obj in zip(atom.args, args):
                if var in new:
                    if new[var] != obj:
                        break
                elif obj in allowed[var]:
                    new[var] = obj
                else:
                    break
            else:
                yield from extend(i + 1, new)

    yield from extend(0, {})


def _substitute(atoms: Iterable[Atom], binding: Dict[str, str]) -> List[Atom]:
    return [Atom(a.predicate, tuple(binding[v] for v in a.args)) for a in atoms]


def ground(dom: DomainModel, prob: ProblemSpec) -> GroundTask:
    """
    Instantiate every operator over the problem's typed objects.

    Bindings that contradict a static precondition are never produced. The
    fact table holds init, goal and candidate atoms plus every add effect;
    actions needing a fact outside that table can never fire and are dropped.
    """
    static = dom.static_predicates()
    static_facts: Dict[str, List[Tuple[str, ...]]] = {}
    for atom in prob.init:
        if atom.predicate in static:
            static_facts.setdefault(atom.predicate, []).append(atom.args)
    objects = _objects_by_type(dom, prob)

    raw: Dict[str, Tuple[List[Atom], List[Atom], List[Atom]]] = {}
    overlaps = 0
    for op in dom.operators:
        for binding in _bindings(op, static, static_facts, objects):
            name = "(" + " ".join([op.name] + [binding[p.name] for p in op.params]) + ")"
            if name in raw:
                continue
            pre = _substitute(op.pre, binding)
            add = _substitute(op.eff_add, binding)
            delete = _substitute(op.eff_del, binding)
            # delete-then-add: an atom both added and deleted stays true
            if set(add) & set(delete):
                overlaps += 1
                delete = [a for a in delete if a not in set(add)]
            raw[name] = (pre, add, delete)

    atoms = set(prob.init) | set(prob.goal)
    for cand in prob.candidate_goals:
        atoms |= set(cand)
    for _, add, _ in raw.values():
        atoms |= set(add)
    ordered = sorted(atoms, key=lambda a: (a.predicate, a.args))
    facts = tuple(str(a) for a in ordered)
    index = {a: i for i, a in enumerate(ordered)}

    key = f"{prob.name}#{next(_task_serial)}"
    actions: List[GroundAction] = []
    unreachable = 0
    for name in sorted(raw):
        pre, add, delete = raw[name]
        if any(a not in index for a in pre):
            unreachable += 1
            continue
        actions.append(GroundAction(
            id=len(actions),
            name=name,
            pre=frozenset(index[a] for a in pre),
            add=frozenset(index[a] for a in add),
            delete=frozenset(index[a] for a in delete if a in index),
            task_key=key,
        ))

    static_ids = frozenset(index[a] for a in prob.init if a.predicate in static)
    task = GroundTask(
        name=prob.name,
        facts=facts,
        actions=tuple(actions),
        init=State(frozenset(index[a] for a in prob.init), key),
        goal=frozenset(index[a] for a in prob.goal),
        static_facts=static_ids,
        candidate_goals=tuple(frozenset(index[a] for a in cand) for cand in prob.candidate_goals),
        key=key,
    )
    logger.debug(f"Grounded {prob.name}: {len(facts)} facts, {len(actions)} actions "
                 f"({unreachable} unreachable dropped, {overlaps} add/del overlaps resolved)")
    return task


def load_task(domain_path: Union[str, Path], problem_path: Union[str, Path]) -> GroundTask:
    dom = parse_domain(Path(domain_path).read_text())
    prob = parse_problem(Path(problem_path).read_text(), dom)
    return ground(dom, prob)


def check_task(task: GroundTask) -> List[str]:
    """Structural invariants of a ground task; returns a list of violations."""
    problems = []
    n = len(task.facts)
    if len(set(task.facts)) != n:
        problems.append("fact table has duplicate names")
    for a in task.actions:
        if any(not 0 <= f < n for f in a.pre | a.add | a.delete):
            problems.append(f"{a.name} refers to facts outside the table")
        if a.add & a.delete:
            problems.append(f"{a.name} adds and deletes {task.describe(a.add & a.delete)}")
    if [a.id for a in task.actions] != list(range(len(task.actions))):
        problems.append("action ids are not dense")
    if any(not 0 <= f < n for f in task.init.true_facts | task.goal):
        problems.append("init or goal outside the fact table")
    return problems
