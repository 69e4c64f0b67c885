"""Regression samplers: random walks, BFS, DFS and the two-phase BFS+RW (FSM)."""
from __future__ import annotations

import math
import random
import warnings
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .sas import PartialState, Task, mean_effect_size, num_facts
from .transition import predecessors, satisfies_goal, violates_mutex


class Origin(str, Enum):
    BFS_PHASE = "bfs_phase"
    RW = "rw"
    DFS = "dfs"
    BFS = "bfs"
    RANDOM = "random"


@dataclass
class Sample:
    state: PartialState
    h: int
    origin: Origin = Origin.RW


@dataclass
class SampleSet:
    samples: list[Sample]
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def states(self) -> list[PartialState]:
        return [s.state for s in self.samples]

    @property
    def hs(self) -> list[int]:
        return [s.h for s in self.samples]


class NoPredecessors(RuntimeError):
    pass


class SamplingExhausted(UserWarning):
    pass


class LimitKind(str, Enum):
    FIXED = "fixed"
    FACTS = "facts"
    FACTS_PER_MEAN_EFFECT = "facts-per-effect"


@dataclass(frozen=True)
class RegressionLimit:
    kind: LimitKind
    resolved: int

    def __post_init__(self):
        if self.resolved < 1:
            raise ValueError("regression limit must be at least 1")

    def __str__(self) -> str:
        if self.kind is LimitKind.FIXED:
            return f"fixed:{self.resolved}"
        return self.kind.value


def resolve_limit(task: Task, kind, value: Optional[int] = None) -> RegressionLimit:
    kind = LimitKind(kind)
    if kind is LimitKind.FIXED:
        if value is None:
            raise ValueError("fixed limit needs a value")
        return RegressionLimit(kind, int(value))
    if kind is LimitKind.FACTS:
        return RegressionLimit(kind, num_facts(task))
    return RegressionLimit(kind, math.ceil(num_facts(task) / mean_effect_size(task)))


def parse_limit(task: Task, text: str) -> RegressionLimit:
    """``fixed:<L>``, ``facts`` or ``facts-per-effect``."""
    if text.startswith("fixed:"):
        return resolve_limit(task, LimitKind.FIXED, int(text.split(":", 1)[1]))
    return resolve_limit(task, text)


def _limit_value(limit) -> int:
    return limit.resolved if isinstance(limit, RegressionLimit) else int(limit)


class _Regressor:
    """Predecessor generation with mutex pruning and optional FSS validity."""

    def __init__(self, task: Task, use_mutex: bool, oracle=None):
        self.task = task
        self.use_mutex = use_mutex and bool(task.mutexes)
        self.oracle = oracle
        self.cost = [op.cost for op in task.operators]
        self._cache: dict = {}

    def preds(self, s: PartialState) -> list[tuple[int, PartialState]]:
        hit = self._cache.get(s)
        if hit is not None:
            return hit
        out = predecessors(self.task, s)
        if self.use_mutex:
            out = [(o, p) for o, p in out if not violates_mutex(p, self.task.mutexes)]
        if self.oracle is not None:
            out = [(o, p) for o, p in out if self.oracle.has_completion(p)]
        if len(self._cache) < 400_000:
            self._cache[s] = out
        return out


def _meta(task, algorithm, n, limit, use_mutex, seed, **extra) -> dict:
    meta = {"task": task.name, "algorithm": algorithm, "N": n, "limit": _limit_value(limit),
            "limit_kind": str(limit) if isinstance(limit, RegressionLimit) else f"fixed:{limit}",
            "mutex": int(bool(use_mutex)), "seed": seed}
    meta.update(extra)
    return meta


def _check_goal(reg: _Regressor, goal: PartialState) -> None:
    if not reg.preds(goal):
        raise NoPredecessors("goal has no predecessors")


def sample_rw(task: Task, n: int, limit, use_mutex: bool = True, seed: int = 0, goal_reset: bool = True,
              oracle=None, rng: Optional[random.Random] = None) -> SampleSet:
    """Random-walk rollouts from the goal; every generated partial state is a sample."""
    if n < 1:
        raise ValueError("N must be at least 1")
    rng = rng or random.Random(seed)
    L = _limit_value(limit)
    reg = _Regressor(task, use_mutex, oracle)
    goal = task.goal
    _check_goal(reg, goal)
    samples: list[Sample] = []
    while len(samples) < n:
        if not _rollout(reg, goal, 0, 0, L, {goal}, samples, n, rng, goal_reset, Origin.RW):
            # the first step from the goal is never blocked by anything but the goal itself
            raise NoPredecessors("goal has no predecessors other than itself")
    return SampleSet(samples, _meta(task, "rw", n, limit, use_mutex, seed, goal_reset=int(goal_reset)))


def _rollout(reg, s, h, depth, L, blocked, samples, n, rng, goal_reset, origin, skip=None) -> int:
    """One backward random walk; ``blocked`` is the rollout's own path."""
    goal = reg.task.goal
    added = 0
    while depth < L and len(samples) < n:
        cands = [(o, p) for o, p in reg.preds(s) if p not in blocked and (skip is None or p not in skip)]
        if not cands:
            break
        o, p = cands[rng.randrange(len(cands))]
        h += reg.cost[o]
        depth += 1
        if goal_reset and satisfies_goal(p, goal):
            h = 0
        samples.append(Sample(p, h, origin))
        blocked.add(p)
        s = p
        added += 1
    return added


def sample_bfs_dfs(task: Task, n: int, limit, mode: str = "bfs", use_mutex: bool = True, seed: int = 0,
                   goal_reset: bool = True, oracle=None, rng: Optional[random.Random] = None) -> SampleSet:
    """Single regression traversal; partial states become samples when expanded."""
    mode = mode.lower()
    if mode not in ("bfs", "dfs"):
        raise ValueError(f"mode must be bfs or dfs, got {mode}")
    if n < 1:
        raise ValueError("N must be at least 1")
    rng = rng or random.Random(seed)
    L = _limit_value(limit)
    reg = _Regressor(task, use_mutex, oracle)
    goal = task.goal
    _check_goal(reg, goal)
    origin = Origin.BFS if mode == "bfs" else Origin.DFS
    frontier = deque([(goal, 0, 0)])
    pop = frontier.popleft if mode == "bfs" else frontier.pop
    seen = {goal}
    samples: list[Sample] = []
    while frontier and len(samples) < n:
        s, h, depth = pop()
        samples.append(Sample(s, h, origin))
        if depth >= L:
            continue
        preds = list(reg.preds(s))
        rng.shuffle(preds)
        for o, p in preds:
            if p in seen:
                continue
            seen.add(p)
            hp = h + reg.cost[o]
            if goal_reset and satisfies_goal(p, goal):
                hp = 0
            frontier.append((p, hp, depth + 1))
    exhausted = len(samples) < n
    if exhausted:
        warnings.warn(f"{mode} regression space exhausted after {len(samples)} of {n} samples", SamplingExhausted)
    return SampleSet(samples, _meta(task, mode, n, limit, use_mutex, seed, goal_reset=int(goal_reset),
                                    exhausted=int(exhausted)))


def sample_fsm(task: Task, n: int, limit, p_fsm: float = 0.10, use_mutex: bool = True, seed: int = 0,
               goal_reset: bool = True, oracle=None, rng: Optional[random.Random] = None) -> SampleSet:
    """BFS near the goal for a p_fsm share of the budget, then random walks from the BFS leaves."""
    if not 0 < p_fsm < 1:
        raise ValueError("p_fsm must lie strictly between 0 and 1")
    if n < 2:
        raise ValueError("FSM needs N >= 2")
    budget = math.floor(p_fsm * n)
    if budget < 1:
        raise ValueError(f"BFS budget floor({p_fsm}*{n}) is zero")
    rng = rng or random.Random(seed)
    L = _limit_value(limit)
    reg = _Regressor(task, use_mutex, oracle)
    goal = task.goal
    _check_goal(reg, goal)

    # phase 1: layer-wise BFS, children of one expansion are sampled all-or-nothing
    info = {goal: (0, 0)}  # state -> (h, depth)
    samples = [Sample(goal, 0, Origin.BFS_PHASE)]
    expanded: set = set()
    queue = deque([goal])
    while queue and len(samples) < budget:
        s = queue.popleft()
        h, depth = info[s]
        if depth >= L:
            continue
        preds = list(reg.preds(s))
        rng.shuffle(preds)
        children = []
        fresh = set()
        for o, p in preds:
            if p in info or p in fresh:
                continue
            fresh.add(p)
            hp = 0 if goal_reset and satisfies_goal(p, goal) else h + reg.cost[o]
            children.append((p, hp))
        if len(samples) + len(children) > budget:
            continue
        expanded.add(s)
        for p, hp in children:
            info[p] = (hp, depth + 1)
            samples.append(Sample(p, hp, Origin.BFS_PHASE))
            queue.append(p)
    n_bfs = len(samples)
    seeds = [s.state for s in samples if s.state not in expanded and info[s.state][1] < L]
    if not seeds:
        if n_bfs == 1:
            raise NoPredecessors("goal has no regression predecessors")
        # phase 1 used up the reachable regression space within depth L
        warnings.warn(f"fsm BFS phase exhausted the regression space after {n_bfs} of {n}", SamplingExhausted)
        return SampleSet(samples, _meta(task, "fsm", n, limit, use_mutex, seed, p_fsm=p_fsm,
                                        goal_reset=int(goal_reset), bfs_samples=n_bfs, exhausted=1))

    # phase 2: rollouts from seeds, each seed once per epoch
    bfs_states = set(info)
    order: list = []
    epoch_added = 0
    exhausted = False
    while len(samples) < n:
        if not order:
            order = seeds[:]
            rng.shuffle(order)
            epoch_added = 0
        q = order.pop()
        h, depth = info[q]
        epoch_added += _rollout(reg, q, h, depth, L, {q}, samples, n, rng, goal_reset, Origin.RW, skip=bfs_states)
        if not order and epoch_added == 0:
            exhausted = True
            break
    if exhausted:
        warnings.warn(f"fsm random walks produced no new samples after {len(samples)} of {n}", SamplingExhausted)
    return SampleSet(samples, _meta(task, "fsm", n, limit, use_mutex, seed, p_fsm=p_fsm, goal_reset=int(goal_reset),
                                    bfs_samples=n_bfs, exhausted=int(exhausted)))
