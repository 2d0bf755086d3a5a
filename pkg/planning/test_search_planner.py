#!/usr/bin/env python3
"""Tests for the forward search planner."""

import itertools

import pytest
from joblib import Parallel, delayed

from planning import search_planner
from planning.search_planner import (
    Plan,
    SearchConfig,
    SearchLimitExceeded,
    optimal_cost,
    solve,
    validate,
)
from planning.pddl_parser import parse_domain, parse_problem
from planning.strips_task import applicable, apply, ground
from utils.settings import domain_files

ASTAR = SearchConfig()
BFS = SearchConfig.breadth_first()
GBFS = SearchConfig.satisficing()


def _press_vectors():
    masks = []
    for cell in range(16):
        r, c = divmod(cell, 4)
        mask = 1 << cell
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < 4 and 0 <= cc < 4:
                mask |= 1 << (rr * 4 + cc)
        masks.append(mask)
    return masks


def _min_presses(board):
    """Exhaustive search over press subsets, smallest first."""
    masks = _press_vectors()
    for k in range(17):
        for subset in itertools.combinations(range(16), k):
            acc = 0
            for i in subset:
                acc ^= masks[i]
            if acc == board:
                return k
    return None


def _board_state(task, board):
    names = [f"(light c{i} {'on' if board >> i & 1 else 'off'})" for i in range(16)]
    names += [task.facts[f] for f in task.static_facts]
    return task.state_from_names(names)


def test_init_satisfies_goal_gives_empty_plan(hanoi_task):
    task = hanoi_task.with_goal(hanoi_task.init.true_facts - hanoi_task.static_facts)
    plan = solve(task, ASTAR)
    assert plan == Plan()
    assert plan.cost == 0
    assert validate(task, plan).valid


@pytest.mark.parametrize("cfg", [ASTAR, BFS])
def test_hanoi_far_peg_costs_five(hanoi_task, cfg):
    plan = solve(hanoi_task, cfg)
    assert plan.cost == 5
    assert validate(hanoi_task, plan).valid


def test_satisficing_plan_is_valid(hanoi_task, puzzle_task, lights_task):
    for task in (hanoi_task, puzzle_task, lights_task):
        plan = solve(task, GBFS)
        assert plan is not None
        assert validate(task, plan).valid


def test_eight_puzzle_fixture_costs_four(puzzle_task):
    assert solve(puzzle_task, ASTAR).cost == 4
    assert solve(puzzle_task, BFS).cost == 4


def test_lights_out_fixture_costs_two(lights_task):
    assert solve(lights_task, ASTAR).cost == 2


@pytest.mark.parametrize("cell", [0, 5, 13])
def test_single_light_matches_exhaustive_press_search(lights_task, cell):
    board = 1 << cell
    task = lights_task.with_init(_board_state(lights_task, board))
    expected = _min_presses(board)
    plan = solve(task, ASTAR)
    if expected is None:
        assert plan is None
    else:
        assert plan.cost == expected


def test_optimal_cost_trivial_and_unreachable(hanoi_task):
    assert optimal_cost(hanoi_task, hanoi_task.init.true_facts) == 0
    dom = parse_domain(domain_files("chain")[0].read_text())
    prob = parse_problem("""
    (define (problem reverse) (:domain chain)
      (:objects a b c - node)
      (:init (at a) (link a b) (link b c) (link c a))
      (:goal (and (at c) (link c b))))
    """, dom)
    task = ground(dom, prob)
    # (link c b) is in the fact table only because the goal names it
    assert optimal_cost(task, task.fact_ids(["(at c)"])) == 2
    assert optimal_cost(task, task.goal) is None
    assert solve(task, BFS) is None


def test_unsolvable_goal_returns_none(chain_task):
    # nothing ever deletes the links, so a state with the agent in two places is unreachable
    goal = chain_task.fact_ids(["(at a)", "(at b)"])
    assert optimal_cost(chain_task, goal) is None
    assert solve(chain_task.with_goal(goal), ASTAR) is None


def test_one_slide_away(puzzle_task):
    solved = puzzle_task.goal | puzzle_task.static_facts
    solved_task = puzzle_task.with_init(solved)
    action = next(a for a in puzzle_task.actions if applicable(solved_task.init, a))
    one_away = apply(solved_task.init, action)
    task = puzzle_task.with_init(one_away)
    assert optimal_cost(task, puzzle_task.goal) == 1


def test_optimal_cost_memo(puzzle_task):
    cache = {}
    assert optimal_cost(puzzle_task, puzzle_task.goal, cache=cache) == 4
    assert len(cache) == 1
    cache[next(iter(cache))] = 99
    assert optimal_cost(puzzle_task, puzzle_task.goal, cache=cache) == 99


def test_validate_reports_first_bad_step(hanoi_task):
    covered = hanoi_task.action_index["(move d3 p1 p2)"]
    result = validate(hanoi_task, Plan((covered,)))
    assert not result.valid
    assert result.failed_step == 0
    assert "(clear d3)" in result.reason


def test_validate_empty_plan_on_solved_task(hanoi_task):
    task = hanoi_task.with_goal([])
    assert validate(task, Plan()).valid


def test_node_limit(puzzle_task):
    with pytest.raises(SearchLimitExceeded) as err:
        solve(puzzle_task, SearchConfig(node_limit=1))
    assert err.value.nodes_expanded == 1


def test_determinism_and_seeded_tie_breaking(hanoi_task):
    first = solve(hanoi_task, ASTAR)
    assert solve(hanoi_task, ASTAR).names == first.names
    seeded = SearchConfig(seed=3)
    assert solve(hanoi_task, seeded).names == solve(hanoi_task, seeded).names
    assert solve(hanoi_task, seeded).cost == 5


def test_successor_cache_shared_across_threads(hanoi_task, puzzle_task):
    search_planner._generators.clear()
    tasks = [hanoi_task, puzzle_task] * 32
    gens = Parallel(n_jobs=8, prefer="threads")(delayed(search_planner._successors)(t) for t in tasks)
    assert len({id(g) for g in gens[0::2]}) == 1
    assert len({id(g) for g in gens[1::2]}) == 1
    plans = Parallel(n_jobs=4, prefer="threads")(delayed(solve)(t, ASTAR) for t in tasks[:8])
    assert [p.cost for p in plans] == [5, 4] * 4


def test_h_max_admissible_at_init(hanoi_task, puzzle_task, lights_task):
    for task in (hanoi_task, puzzle_task, lights_task):
        assert task.relaxation.h_max(task.init.true_facts, task.goal) <= solve(task, BFS).cost


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(node_limit=0)
    with pytest.raises(ValueError):
        SearchConfig(mode="optimal_astar", heuristic="h_add")
    with pytest.raises(ValueError):
        SearchConfig(mode="dfs")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
