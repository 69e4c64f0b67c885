"""Progression and regression over partial states, goal and mutex tests."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cache
from typing import Iterator, Sequence

from .sas import UNDEFINED, MutexGroup, Operator, PartialState, Task


class ContractViolation(ValueError):
    pass


@dataclass(frozen=True)
class TransitionEvent:
    operator: int
    source: PartialState
    result: PartialState
    direction: str  # "forward" | "backward"
    cost: int


def applicable(s: PartialState, o: Operator) -> bool:
    """s ⊇ pre(o); a precondition on a variable undefined in s fails."""
    for v, x in o.pre_items:
        if s[v] != x:
            return False
    return True


def successor(s: PartialState, o: Operator) -> PartialState:
    if not applicable(s, o):
        raise ContractViolation(f"operator {o.name} not applicable")
    t = list(s)
    for v, x in o.eff_items:
        t[v] = x
    return tuple(t)


def backward_applicable(s: PartialState, o: Operator) -> bool:
    relevant = False
    for v, x in o.eff_items:
        sv = s[v]
        if sv == UNDEFINED:
            continue
        if sv != x:
            return False
        relevant = True
    if not relevant:
        return False
    eff = o.eff
    for v, x in o.pre_items:
        if eff[v] == UNDEFINED and s[v] != UNDEFINED and s[v] != x:
            return False
    return True


def predecessor(s: PartialState, o: Operator) -> PartialState:
    """pre(o) ∘ s restricted to dom(s) minus the relevant effect variables."""
    if not backward_applicable(s, o):
        raise ContractViolation(f"operator {o.name} not backward applicable")
    return _regress(s, o)


def _regress(s: PartialState, o: Operator) -> PartialState:
    r = list(s)
    for v, _ in o.eff_items:
        r[v] = UNDEFINED
    for v, x in o.pre_items:
        r[v] = x
    return tuple(r)


def satisfies_goal(s: PartialState, goal: PartialState) -> bool:
    for v, x in enumerate(goal):
        if x != UNDEFINED and s[v] != x:
            return False
    return True


def violates_mutex(s: PartialState, mutexes: Sequence[MutexGroup]) -> bool:
    for group in mutexes:
        hits = 0
        for v, x in group.facts:
            if s[v] == x:
                hits += 1
                if hits > 1:
                    return True
    return False


def subsumes(t: PartialState, s: PartialState) -> bool:
    """S(s) ⊆ S(t): t agrees with s wherever t is defined."""
    for a, b in zip(t, s):
        if a != UNDEFINED and a != b:
            return False
    return True


def completions(s: PartialState, domain_sizes: Sequence[int]) -> Iterator[PartialState]:
    """All complete states in S(s), in lexicographic order."""
    open_vars = [v for v, x in enumerate(s) if x == UNDEFINED]

    def rec(i: int, cur: list[int]):
        if i == len(open_vars):
            yield tuple(cur)
            return
        v = open_vars[i]
        for x in range(domain_sizes[v]):
            cur[v] = x
            yield from rec(i + 1, cur)
        cur[v] = UNDEFINED

    yield from rec(0, list(s))


class _Index:
    """Operator lookup tables: by one precondition fact (progression) and by
    effect fact (regression)."""

    def __init__(self, task: Task):
        n = len(task.variables)
        self.by_pre: list[dict[int, list[int]]] = [dict() for _ in range(n)]
        self.no_pre: list[int] = []
        self.by_eff: list[dict[int, list[int]]] = [dict() for _ in range(n)]
        for i, op in enumerate(task.operators):
            if op.pre_items:
                v, x = op.pre_items[0]
                self.by_pre[v].setdefault(x, []).append(i)
            else:
                self.no_pre.append(i)
            for v, x in op.eff_items:
                self.by_eff[v].setdefault(x, []).append(i)


@cache
def _index(task: Task) -> _Index:
    return _Index(task)


def applicable_ops(task: Task, s: PartialState) -> list[int]:
    """Indices of operators applicable in s, ascending."""
    idx = _index(task)
    ops = task.operators
    found = list(idx.no_pre)
    for v, x in enumerate(s):
        if x != UNDEFINED:
            bucket = idx.by_pre[v].get(x)
            if bucket:
                found.extend(i for i in bucket if applicable(s, ops[i]))
    found.sort()
    return found


def successors(task: Task, s: PartialState) -> list[tuple[int, PartialState]]:
    ops = task.operators
    out = []
    for i in applicable_ops(task, s):
        t = list(s)
        for v, x in ops[i].eff_items:
            t[v] = x
        out.append((i, tuple(t)))
    return out


def backward_ops(task: Task, s: PartialState) -> list[int]:
    """Indices of operators backward applicable in s, ascending."""
    idx = _index(task)
    ops = task.operators
    cand: set[int] = set()
    for v, x in enumerate(s):
        if x != UNDEFINED:
            bucket = idx.by_eff[v].get(x)
            if bucket:
                cand.update(bucket)
    return sorted(i for i in cand if backward_applicable(s, ops[i]))


def predecessors(task: Task, s: PartialState) -> list[tuple[int, PartialState]]:
    ops = task.operators
    return [(i, _regress(s, ops[i])) for i in backward_ops(task, s)]
