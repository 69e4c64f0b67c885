"""Exhaustive forward state spaces with exact goal distances.

Ground truth for small tasks: breadth-first closure from the initial state,
then one backward Dijkstra sweep from every goal state over reversed edges.
"""
from __future__ import annotations

import heapq
import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .sas import UNDEFINED, PartialState, Task
from .transition import satisfies_goal, successors

INFINITY = math.inf
DEFAULT_MAX_STATES = 1_000_000


class StateSpaceTooLarge(RuntimeError):
    def __init__(self, reached: int, limit: int):
        super().__init__(f"state space too large: reached {reached} states (limit {limit})")
        self.reached = reached
        self.limit = limit


class InvalidPredecessor(LookupError):
    """No forward-reachable state matches the given partial state."""


@dataclass
class StateSpace:
    task: Task
    states: list[PartialState]
    index: dict[PartialState, int]
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_cost: np.ndarray
    hstar: np.ndarray  # float64, inf for dead ends
    _matrix: Optional[np.ndarray] = field(default=None, repr=False)
    _match_cache: dict = field(default_factory=dict, repr=False)
    _extra_h: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, s) -> bool:
        return tuple(s) in self.index

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.array(self.states, dtype=np.int16).reshape(len(self.states), -1)
        return self._matrix

    @property
    def goal_count(self) -> int:
        return int(np.count_nonzero(self.hstar == 0))

    def matching(self, filt: PartialState) -> np.ndarray:
        """Indices of states in S(filt), ascending."""
        key = tuple(filt)
        hit = self._match_cache.get(key)
        if hit is None:
            cols = [v for v, x in enumerate(key) if x != UNDEFINED]
            m = self.matrix
            if cols:
                mask = np.all(m[:, cols] == np.array([key[v] for v in cols], dtype=np.int16), axis=1)
                hit = np.flatnonzero(mask)
            else:
                hit = np.arange(len(self.states))
            if len(self._match_cache) < 200_000:
                self._match_cache[key] = hit
        return hit

    def has_completion(self, filt: PartialState) -> bool:
        return len(self.matching(filt)) > 0


def _sweep(task: Task, states, src, dst, cost) -> np.ndarray:
    n = len(states)
    rev: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for a, b, c in zip(src, dst, cost):
        rev[b].append((a, c))
    dist = np.full(n, INFINITY)
    heap = []
    for i, s in enumerate(states):
        if satisfies_goal(s, task.goal):
            dist[i] = 0.0
            heap.append((0, i))
    heapq.heapify(heap)
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist[i]:
            continue
        for j, c in rev[i]:
            nd = d + c
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(heap, (nd, j))
    return dist


def _closure(task: Task, roots: Iterable[PartialState], max_states: int):
    states: list[PartialState] = []
    index: dict[PartialState, int] = {}
    src, dst, cost = [], [], []
    queue = deque()
    for r in roots:
        r = tuple(r)
        if r not in index:
            index[r] = len(states)
            states.append(r)
            queue.append(r)
    ops = task.operators
    while queue:
        s = queue.popleft()
        i = index[s]
        for o, t in successors(task, s):
            j = index.get(t)
            if j is None:
                if len(states) >= max_states:
                    raise StateSpaceTooLarge(len(states) + 1, max_states)
                j = index[t] = len(states)
                states.append(t)
                queue.append(t)
            src.append(i)
            dst.append(j)
            cost.append(ops[o].cost)
    return states, index, src, dst, cost


def enumerate_forward(task: Task, max_states: int = DEFAULT_MAX_STATES) -> StateSpace:
    states, index, src, dst, cost = _closure(task, [task.s0], max_states)
    hstar = _sweep(task, states, src, dst, cost)
    return StateSpace(task, states, index, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                      np.array(cost, dtype=np.int64), hstar)


def goal_distances(task: Task, roots: Iterable[PartialState], max_states: int = DEFAULT_MAX_STATES) -> dict:
    """Exact h* for every state forward-reachable from ``roots``."""
    states, _, src, dst, cost = _closure(task, roots, max_states)
    dist = _sweep(task, states, src, dst, cost)
    return {s: (int(d) if d != INFINITY else INFINITY) for s, d in zip(states, dist)}


def perfect_h(space: StateSpace, s: PartialState):
    i = space.index.get(tuple(s))
    if i is None:
        raise KeyError(f"state not in forward state space: {s}")
    d = space.hstar[i]
    return INFINITY if d == INFINITY else int(d)


def hstar_anywhere(space: StateSpace, s: PartialState, max_states: int = DEFAULT_MAX_STATES):
    """h* of any complete state: table lookup inside the FSS, forward closure outside it."""
    s = tuple(s)
    i = space.index.get(s)
    if i is not None:
        d = space.hstar[i]
        return INFINITY if d == INFINITY else int(d)
    hit = space._extra_h.get(s)
    if hit is None:
        dists = goal_distances(space.task, [s], max_states)
        # every state in the closure has its exact distance now
        for t, d in dists.items():
            if t not in space.index:
                space._extra_h[t] = d
        hit = dists[s]
    return hit


def dmax(space: StateSpace) -> int:
    finite = space.hstar[np.isfinite(space.hstar)]
    if finite.size == 0:
        raise ValueError("no state in the space reaches the goal")
    return int(finite.max())


def mean_hstar(space: StateSpace) -> float:
    finite = space.hstar[np.isfinite(space.hstar)]
    return float(finite.mean()) if finite.size else INFINITY


def depth_histogram(space: StateSpace) -> dict:
    c = Counter(int(d) if d != INFINITY else -1 for d in space.hstar)
    return dict(sorted(c.items()))


def random_fs_state(space: StateSpace, filt: Optional[PartialState], rng: random.Random) -> PartialState:
    if filt is None:
        return space.states[rng.randrange(len(space.states))]
    hits = space.matching(filt)
    if len(hits) == 0:
        raise InvalidPredecessor(f"no forward-reachable state matches {filt}")
    return space.states[int(hits[rng.randrange(len(hits))])]


def forward_ucs(task: Task, start: PartialState, max_states: int = DEFAULT_MAX_STATES):
    """Optimal cost from ``start`` to the goal by forward uniform-cost search."""
    start = tuple(start)
    ops = task.operators
    dist = {start: 0}
    heap = [(0, 0, start)]
    tick = 1
    while heap:
        d, _, s = heapq.heappop(heap)
        if d > dist[s]:
            continue
        if satisfies_goal(s, task.goal):
            return d
        for o, t in successors(task, s):
            nd = d + ops[o].cost
            if nd < dist.get(t, INFINITY):
                if t not in dist and len(dist) >= max_states:
                    raise StateSpaceTooLarge(len(dist) + 1, max_states)
                dist[t] = nd
                heapq.heappush(heap, (nd, tick, t))
                tick += 1
    return INFINITY
