#!/usr/bin/env python3
"""Tests for landmark extraction and the landmark-based recognizers."""

import itertools

import numpy as np
import pytest

from planning.search_planner import solve
from planning.strips_task import TaskMismatchError
from recognition.landmark_recognizer import (
    achieved_landmarks,
    extract_landmarks,
    h_gc,
    h_uniq,
    landmark_sets,
    recognize_pom,
    removal_oracle,
    uniqueness,
)
from recognition.recognition_problem import RecognitionProblem, UnknownObservationError, select_within
from tracegen.domain_builder import build_domain
from tracegen.trace_generator import replay


@pytest.fixture(scope="module")
def hanoi():
    return build_domain("hanoi34")


def _ids(task, *names):
    return task.fact_ids(names)


def test_goal_fact_in_init_is_a_landmark(chain_task):
    lms = extract_landmarks(chain_task, _ids(chain_task, "(at a)"))
    assert lms.solvable
    assert lms.landmarks == _ids(chain_task, "(at a)")


def test_chain_landmarks(chain_task):
    lms = extract_landmarks(chain_task, chain_task.goal)
    assert lms.landmarks >= _ids(chain_task, "(at a)", "(at b)", "(at c)")
    assert not lms.landmarks & chain_task.static_facts


def test_relaxed_unreachable_goal_is_flagged(chain_task):
    stranded = chain_task.with_init(_ids(chain_task, "(at a)"))
    lms = extract_landmarks(stranded, stranded.goal)
    assert not lms.solvable
    assert len(lms) == 0


def test_landmarks_pass_the_removal_oracle(hanoi, chain_task, fork_task):
    tasks = [(chain_task, chain_task.goal), (fork_task, fork_task.goal)]
    rng = np.random.default_rng(0)
    states = list(hanoi.reachable_states())
    for k in rng.choice(len(states), size=12, replace=False):
        tasks.append((hanoi.task, hanoi.goal_facts(states[k])))
    for task, goal in tasks:
        lms = extract_landmarks(task, goal)
        for fact in lms.landmarks:
            assert removal_oracle(task, goal, fact), f"{task.facts[fact]} is not a landmark of {task.name}"


def test_achieved_with_no_observations_is_init_part(hanoi):
    task = hanoi.task
    lms = extract_landmarks(task, task.goal)
    assert achieved_landmarks(lms, task, ()) == lms.landmarks & task.init.true_facts


def test_full_plan_achieves_every_landmark(hanoi):
    task = hanoi.task
    lms = extract_landmarks(task, task.goal)
    plan = solve(task)
    assert achieved_landmarks(lms, task, plan.actions) == lms.landmarks


def test_achieved_matches_replayed_states(puzzle_task):
    lms = extract_landmarks(puzzle_task, puzzle_task.goal)
    plan = solve(puzzle_task)
    states = replay(puzzle_task, plan)
    for k in range(len(plan) + 1):
        seen = frozenset().union(*(s.true_facts for s in states[:k + 1]))
        assert achieved_landmarks(lms, puzzle_task, plan.actions[:k]) == lms.landmarks & seen


def test_achieved_sets_grow_with_observations(hanoi):
    task = hanoi.task
    lms = extract_landmarks(task, task.goal)
    plan = solve(task)
    previous = frozenset()
    for k in range(len(plan) + 1):
        current = achieved_landmarks(lms, task, plan.actions[:k])
        assert previous <= current
        previous = current


def test_goal_completion_on_chain(chain_task):
    problem = RecognitionProblem.from_names(chain_task, [["(at c)"]], ["(step a b)"])
    assert h_gc(problem, 0) == pytest.approx(2 / 3)
    full = RecognitionProblem.from_names(chain_task, [["(at c)"]], ["(step a b)", "(step b c)"])
    assert h_gc(full, 0) == 1.0


def test_goal_completion_without_progress_is_zero(fork_task):
    problem = RecognitionProblem(fork_task, fork_task.candidate_goals)
    assert h_gc(problem, 0) == 0.0


def test_uniqueness_on_shared_tool(fork_task):
    problem = RecognitionProblem.from_names(fork_task, [["(made i1)"], ["(made i2)"]], ["(take hammer)"])
    sets = landmark_sets(problem)
    weights = uniqueness(sets)
    holding = fork_task.fact_index["(holding hammer)"]
    assert weights[holding] == 0.5
    assert weights[fork_task.fact_index["(made i1)"]] == 1.0
    scores = h_uniq(problem, sets)
    assert scores == {0: pytest.approx(1 / 3), 1: pytest.approx(1 / 3)}


def test_theta_selection(fork_task):
    problem = RecognitionProblem.from_names(fork_task, [["(made i1)"], ["(made i2)"]],
                                            ["(take hammer)", "(make i1 hammer)"])
    strict = recognize_pom(problem, "gc", theta=0)
    assert strict.returned == (0,)
    assert strict.scores == {0: 1.0, 1: 0.5}
    assert recognize_pom(problem, "gc", theta=100).returned == (0, 1)
    assert recognize_pom(problem, "uniq", theta=0).returned == (0,)


def test_theta_nesting_and_score_bounds(hanoi):
    rng = np.random.default_rng(3)
    task = hanoi.task
    goals = [hanoi.goal_facts(s) for s in hanoi.sample_goal_states(rng, 4)]
    plan = solve(task.with_goal(goals[0]))
    for k, heuristic in itertools.product(range(len(plan) + 1), ("gc", "uniq")):
        problem = RecognitionProblem(task, goals, plan.actions[:k], hidden_goal=0)
        previous = ()
        for theta in (0, 10, 30, 100):
            result = recognize_pom(problem, heuristic, theta)
            assert set(previous) <= set(result.returned)
            assert all(0.0 <= s <= 1.0 for s in result.scores.values())
            previous = result.returned
        assert len(previous) == 4


def test_full_observation_keeps_the_hidden_goal(hanoi):
    rng = np.random.default_rng(8)
    task = hanoi.task
    for _ in range(6):
        goals = [hanoi.goal_facts(s) for s in hanoi.sample_goal_states(rng, 4)]
        hidden = int(rng.integers(4))
        plan = solve(task.with_goal(goals[hidden]))
        result = recognize_pom(RecognitionProblem(task, goals, plan.actions, hidden), "gc", 0)
        assert result.contains(hidden)


def test_unsolvable_candidates_score_zero(fork_task):
    partial = fork_task.with_init(_ids(fork_task, "(needs i1 hammer)"))
    problem = RecognitionProblem(partial, fork_task.candidate_goals)
    result = recognize_pom(problem, "gc", theta=100)
    assert result.flags == {1: "unsolvable"}
    assert result.scores[1] == 0.0
    assert result.returned == (0,)

    stranded = fork_task.with_init(())
    everything = recognize_pom(RecognitionProblem(stranded, fork_task.candidate_goals), "uniq")
    assert everything.returned == (0, 1)
    assert set(everything.flags) == {0, 1}


def test_parallel_extraction_matches_sequential(hanoi):
    rng = np.random.default_rng(5)
    goals = [hanoi.goal_facts(s) for s in hanoi.sample_goal_states(rng, 6)]
    problem = RecognitionProblem(hanoi.task, goals)
    assert landmark_sets(problem, n_jobs=2) == landmark_sets(problem, n_jobs=1)


def test_problem_validation(chain_task, hanoi):
    with pytest.raises(UnknownObservationError):
        RecognitionProblem.from_names(chain_task, [["(at c)"]], ["(step a c)"])
    with pytest.raises(UnknownObservationError):
        RecognitionProblem(chain_task, [chain_task.goal], hanoi.task.actions[:1])
    with pytest.raises(TaskMismatchError):
        RecognitionProblem(chain_task, [frozenset({10_000})])
    with pytest.raises(ValueError):
        RecognitionProblem(chain_task, [chain_task.goal], hidden_goal=3)
    with pytest.raises(ValueError):
        recognize_pom(RecognitionProblem(chain_task, [chain_task.goal]), "hmax")


def test_select_within():
    scores = {0: 0.5, 1: 0.95, 2: 1.0, 3: 0.9}
    assert select_within(scores, 0) == (2,)
    assert select_within(scores, 10) == (1, 2, 3)
    assert select_within(scores, 100) == (0, 1, 2, 3)
    with pytest.raises(ValueError):
        select_within(scores, 101)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
