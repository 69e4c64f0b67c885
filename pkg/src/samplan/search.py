"""Greedy best-first search with FIFO tie-breaking."""
from __future__ import annotations

import heapq
import math
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import psutil

from .sas import PartialState, Task, encode_states, is_complete
from .transition import applicable, satisfies_goal, successor, successors


class Status(str, Enum):
    SOLVED = "SOLVED"
    EXHAUSTED = "EXHAUSTED"
    TIMEOUT = "TIMEOUT"
    MEMORY = "MEMORY"


@dataclass
class SearchResult:
    status: Status
    plan: list[int] = field(default_factory=list)
    plan_cost: Optional[int] = None
    expanded: int = 0
    generated: int = 0
    seconds: float = 0.0

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLVED


def goal_count(task: Task, s: PartialState) -> int:
    return sum(1 for v, x in task.goal_items if s[v] != x)


class Heuristic:
    """Batch evaluator: ``evaluate(states) -> list of values``."""

    kind = "abstract"

    def evaluate(self, states: Sequence[PartialState]) -> list:
        raise NotImplementedError

    def __call__(self, s: PartialState):
        return self.evaluate([s])[0]


class BlindHeuristic(Heuristic):
    kind = "blind"

    def evaluate(self, states):
        return [0] * len(states)


class GoalCountHeuristic(Heuristic):
    kind = "goalcount"

    def __init__(self, task: Task):
        self.task = task

    def evaluate(self, states):
        return [goal_count(self.task, s) for s in states]


class PerfectHeuristic(Heuristic):
    kind = "perfect"

    def __init__(self, space):
        from .statespace import hstar_anywhere

        self.space = space
        self._h = hstar_anywhere

    def evaluate(self, states):
        return [self._h(self.space, s) for s in states]


class LearnedHeuristic(Heuristic):
    kind = "learned"

    def __init__(self, task: Task, model):
        from .learner import predict_batch

        self.task = task
        self.model = model
        self._predict = predict_batch

    def evaluate(self, states):
        if not states:
            return []
        return self._predict(self.model, encode_states(self.task, states)).tolist()


class FunctionHeuristic(Heuristic):
    kind = "function"

    def __init__(self, fn: Callable[[PartialState], float]):
        self.fn = fn

    def evaluate(self, states):
        return [self.fn(s) for s in states]


@dataclass
class Limits:
    max_seconds: float = 300.0
    max_memory_mb: float = 2048.0
    max_expansions: Optional[int] = None
    check_every: int = 256


def _rss_mb() -> float:
    return psutil.Process(os.getpid()).memory_info().rss / 2 ** 20


def gbfs(task: Task, start: PartialState, heuristic: Heuristic, limits: Limits = Limits()) -> SearchResult:
    """Open list keyed by (h, generation order); goal test on expansion; no reopening."""
    start = tuple(start)
    if not is_complete(start):
        raise ValueError("GBFS needs a complete start state")
    t0 = time.perf_counter()
    base_mem = _rss_mb()
    costs = [op.cost for op in task.operators]
    parent: dict = {start: None}
    h0 = heuristic.evaluate([start])[0]
    heap = [(h0, 0, start)]
    order = 1
    expanded = 0
    closed: set = set()

    def done(status, plan=None, cost=None):
        return SearchResult(status, plan or [], cost, expanded, order, time.perf_counter() - t0)

    while heap:
        _, _, s = heapq.heappop(heap)
        if s in closed:
            continue
        closed.add(s)
        expanded += 1
        if satisfies_goal(s, task.goal):
            plan = []
            cur = s
            while parent[cur] is not None:
                prev, o = parent[cur]
                plan.append(o)
                cur = prev
            plan.reverse()
            return done(Status.SOLVED, plan, sum(costs[o] for o in plan))
        if expanded % limits.check_every == 0:
            if time.perf_counter() - t0 >= limits.max_seconds:
                return done(Status.TIMEOUT)
            if _rss_mb() - base_mem >= limits.max_memory_mb:
                return done(Status.MEMORY)
        if limits.max_expansions is not None and expanded >= limits.max_expansions:
            return done(Status.TIMEOUT)
        fresh = [(o, t) for o, t in successors(task, s) if t not in parent]
        if not fresh:
            continue
        values = heuristic.evaluate([t for _, t in fresh])
        for (o, t), h in zip(fresh, values):
            parent[t] = (s, o)
            if h == math.inf:
                continue
            heapq.heappush(heap, (h, order, t))
            order += 1
    return done(Status.EXHAUSTED)


def validate_plan(task: Task, start: PartialState, plan: Sequence[int]) -> bool:
    s = tuple(start)
    for o in plan:
        if not 0 <= o < len(task.operators):
            return False
        op = task.operators[o]
        if not applicable(s, op):
            return False
        s = successor(s, op)
    return satisfies_goal(s, task.goal)


def make_heuristic(spec: str, task: Task, space=None) -> Heuristic:
    """``blind``, ``goalcount``, ``perfect`` or ``learned:<model file>``."""
    if spec == "blind":
        return BlindHeuristic()
    if spec == "goalcount":
        return GoalCountHeuristic(task)
    if spec == "perfect":
        if space is None:
            from .statespace import enumerate_forward

            space = enumerate_forward(task)
        return PerfectHeuristic(space)
    if spec.startswith("learned:"):
        from .learner import load_model

        model = load_model(spec.split(":", 1)[1])
        return LearnedHeuristic(task, model)
    raise ValueError(f"unknown heuristic '{spec}'")
