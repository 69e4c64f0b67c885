import math

import pytest

from micro import MICRO, random_task
from samplan.domains import load_bundled
from samplan.sas import UNDEFINED, Task
from samplan.search import (BlindHeuristic, FunctionHeuristic, GoalCountHeuristic, Limits, PerfectHeuristic,
                            Status, gbfs, goal_count, make_heuristic, validate_plan)
from samplan.statespace import INFINITY, enumerate_forward, perfect_h


def test_goal_count(toy3):
    assert goal_count(toy3, (0, 0)) == 1
    assert goal_count(toy3, (1, 0)) == 0
    both = Task(toy3.variables, toy3.operators, (), toy3.s0, (1, 1))
    assert goal_count(both, (0, 0)) == 2


def test_blind_toy3(toy3):
    r = gbfs(toy3, (0, 0), BlindHeuristic())
    assert r.status is Status.SOLVED and r.plan == [0] and r.plan_cost == 1


@pytest.mark.parametrize("h", ["blind", "goalcount", "perfect"])
def test_start_is_goal(toy3, h):
    r = gbfs(toy3, (1, 1), make_heuristic(h, toy3))
    assert r.solved and r.plan == [] and r.expanded == 1


def test_validate_plan(toy3):
    assert validate_plan(toy3, (0, 0), [0])
    assert not validate_plan(toy3, (0, 0), [])
    assert not validate_plan(toy3, (1, 0), [0])
    assert not validate_plan(toy3, (0, 0), [9])


def test_partial_start_rejected(toy3):
    with pytest.raises(ValueError):
        gbfs(toy3, (0, UNDEFINED), BlindHeuristic())


def test_exhausted_on_dead_end():
    task = load_bundled("deadend")
    sp = enumerate_forward(task)
    r = gbfs(task, (2, 0), BlindHeuristic())
    assert r.status is Status.EXHAUSTED
    assert r.expanded <= r.generated <= len(sp)


def test_infinite_h_never_enqueued():
    task = load_bundled("deadend")
    sp = enumerate_forward(task)
    r = gbfs(task, (0, 0), PerfectHeuristic(sp))
    assert r.solved and r.plan_cost == 1
    # the trap successor has h = inf and must not be expanded
    assert r.expanded == 2


def test_fifo_tie_breaking(toy3):
    order = []

    def h(s):
        order.append(s)
        return 0

    r = gbfs(toy3, (0, 0), FunctionHeuristic(h))
    # with equal h the first generated successor (op1 -> goal) is expanded first
    assert r.plan == [0] and r.expanded == 2


def test_expansion_limit():
    task = load_bundled("blocks-5")
    r = gbfs(task, task.s0, BlindHeuristic(), Limits(max_expansions=5))
    assert r.status is Status.TIMEOUT and r.expanded == 5


def test_time_limit():
    task = load_bundled("blocks7")
    r = gbfs(task, task.s0, BlindHeuristic(), Limits(max_seconds=0.0, check_every=1))
    assert r.status is Status.TIMEOUT


def test_memory_limit():
    task = load_bundled("blocks7")
    r = gbfs(task, task.s0, BlindHeuristic(), Limits(max_memory_mb=-1.0, check_every=1))
    assert r.status is Status.MEMORY


@pytest.mark.parametrize("name", MICRO)
def test_blind_and_perfect_optimal(spaces, name):
    task, sp = spaces(name)
    perfect = PerfectHeuristic(sp)
    for i in range(0, len(sp), max(1, len(sp) // 60)):
        s = sp.states[i]
        hs = perfect_h(sp, s)
        for h in (BlindHeuristic(), perfect):
            r = gbfs(task, s, h)
            if hs == INFINITY:
                assert not r.solved
                continue
            assert r.solved and validate_plan(task, s, r.plan)
            assert r.plan_cost == hs


@pytest.mark.parametrize("seed", range(20))
def test_random_tasks_solutions_valid(seed):
    task = random_task(seed)
    sp = enumerate_forward(task)
    for s in sp.states:
        for h in (BlindHeuristic(), GoalCountHeuristic(task), PerfectHeuristic(sp)):
            r = gbfs(task, s, h)
            assert r.solved == math.isfinite(sp.hstar[sp.index[s]])
            if r.solved:
                assert validate_plan(task, s, r.plan)
                assert r.plan_cost == sum(task.operators[o].cost for o in r.plan)
            else:
                assert r.expanded <= r.generated <= len(sp)


def test_determinism():
    task = load_bundled("npuzzle-2x3")
    a = gbfs(task, task.s0, GoalCountHeuristic(task))
    b = gbfs(task, task.s0, GoalCountHeuristic(task))
    assert (a.status, a.plan, a.expanded, a.generated) == (b.status, b.plan, b.expanded, b.generated)


def test_make_heuristic_unknown(toy3):
    with pytest.raises(ValueError):
        make_heuristic("hff", toy3)
