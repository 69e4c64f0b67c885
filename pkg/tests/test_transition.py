import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from micro import random_task
from samplan.sas import UNDEFINED, MutexGroup
from samplan.transition import (ContractViolation, applicable, applicable_ops, backward_applicable, completions,
                                predecessor, predecessors, satisfies_goal, subsumes, successor, successors,
                                violates_mutex)

U = UNDEFINED


@pytest.fixture
def ops(toy3):
    return toy3.operators


def test_applicable(ops):
    op1 = ops[0]
    assert applicable((0, 0), op1)
    assert not applicable((1, 0), op1)
    assert not applicable((U, 0), op1)


def test_successor(ops):
    op1, op2 = ops
    assert successor((0, 0), op1) == (1, 0)
    assert successor((0, 1), op1) == (1, 1)
    assert successor((0, 0), op2) == (0, 1)
    with pytest.raises(ContractViolation):
        successor((1, 0), op1)


def test_backward_applicable(ops):
    op1, op2 = ops
    assert backward_applicable((1, U), op1)
    assert not backward_applicable((1, U), op2)
    assert not backward_applicable((0, U), op1)


def test_predecessor(ops):
    op1, op2 = ops
    assert predecessor((1, U), op1) == (0, U)
    assert predecessor((1, 1), op2) == (1, 0)
    assert predecessor((1, 1), op1) == (0, 1)
    with pytest.raises(ContractViolation):
        predecessor((0, U), op1)


def test_satisfies_goal(toy3):
    g = toy3.goal
    assert satisfies_goal((1, U), g)
    assert not satisfies_goal((U, 1), g)
    assert satisfies_goal((1, 0), g)


def test_violates_mutex():
    group = [MutexGroup(((0, 1), (1, 1)))]
    assert violates_mutex((1, 1), group)
    assert not violates_mutex((1, 0), group)
    assert not violates_mutex((1, 1), [])


def all_partial_states(task):
    return itertools.product(*[range(-1, v.domain_size) for v in task.variables])


@pytest.mark.parametrize("seed", range(40))
def test_regression_soundness_exhaustive(seed):
    task = random_task(seed)
    for s in all_partial_states(task):
        for o in task.operators:
            if not backward_applicable(s, o):
                continue
            r = predecessor(s, o)
            # succ(pred(s,o),o) refines s wherever s is defined
            if applicable(r, o):
                assert subsumes(s, successor(r, o))
            # every completion of the predecessor progresses into S(s)
            for rc in completions(r, task.domain_sizes):
                assert applicable(rc, o)
                assert subsumes(s, successor(rc, o))


@pytest.mark.parametrize("seed", range(20))
def test_applicable_brute_force_on_complete_states(seed):
    task = random_task(seed)
    for s in itertools.product(*[range(v.domain_size) for v in task.variables]):
        brute = [i for i, o in enumerate(task.operators) if all(s[v] == x for v, x in enumerate(o.pre) if x != U)]
        assert applicable_ops(task, s) == brute
        assert [o for o, _ in successors(task, s)] == brute


@pytest.mark.parametrize("seed", range(20))
def test_indexed_predecessors_match_scan(seed):
    task = random_task(seed)
    for s in all_partial_states(task):
        expect = [(i, predecessor(s, o)) for i, o in enumerate(task.operators) if backward_applicable(s, o)]
        assert predecessors(task, s) == expect


@settings(max_examples=200)
@given(st.lists(st.integers(-1, 2), min_size=3, max_size=3), st.integers(0, 2), st.integers(0, 2))
def test_violates_mutex_monotone(s, v, x):
    groups = [MutexGroup(((0, 1), (1, 1), (2, 0))), MutexGroup(((0, 2), (2, 2)))]
    s = tuple(s)
    if violates_mutex(s, groups) and s[v] == U:
        t = list(s)
        t[v] = x
        assert violates_mutex(tuple(t), groups)


def test_strict_rule_on_partial_states():
    rng = random.Random(3)
    task = random_task(7)
    for _ in range(100):
        s = tuple(rng.randrange(-1, v.domain_size) for v in task.variables)
        for i in applicable_ops(task, s):
            assert all(s[v] == x for v, x in task.operators[i].pre_items)
