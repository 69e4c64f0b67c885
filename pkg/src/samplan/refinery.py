"""Training-set workflow: estimate improvement (SAI, SUI), completion,
random-sample augmentation.

Stage order is fixed::

    sample -> SAI(partial) -> SUI(partial) -> complete -> add random -> SAI(complete)
"""
from __future__ import annotations

import heapq
import math
import random
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .sas import UNDEFINED, PartialState, Task
from .sampler import (Origin, RegressionLimit, Sample, SampleSet, parse_limit, sample_bfs_dfs, sample_fsm,
                      sample_rw)
from .statespace import InvalidPredecessor, StateSpace, random_fs_state
from .transition import applicable_ops, violates_mutex

MUTEX_RETRIES = 10_000


def stream(seed: int, tag: str) -> random.Random:
    """Independent RNG stream for one pipeline stage."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(tag.encode())])
    return random.Random(int(ss.generate_state(1, dtype=np.uint64)[0]))


# ---------------------------------------------------------------------------
# SAI


def sai(samples: Sequence[Sample]) -> list[Sample]:
    """Every sample takes the minimum h among samples with the identical state."""
    best: dict = {}
    for s in samples:
        h = best.get(s.state)
        if h is None or s.h < h:
            best[s.state] = s.h
    return [s if s.h == best[s.state] else replace(s, h=best[s.state]) for s in samples]


# ---------------------------------------------------------------------------
# SUI


class FactTrie:
    """Trie over partial states keyed variable by variable; UNDEFINED is the wildcard edge.

    ``query(s)`` returns payloads of stored states t with S(s) ⊆ S(t),
    i.e. t(v) is UNDEFINED or equal to s(v) for every variable.
    """

    def __init__(self, num_vars: int):
        self.num_vars = num_vars
        self.root: dict = {}
        self.size = 0

    def insert(self, state: PartialState, payload) -> None:
        node = self.root
        for x in state[:-1]:
            node = node.setdefault(x, {})
        node.setdefault(state[-1], []).append(payload)
        self.size += 1

    def query(self, s: PartialState) -> list:
        out = []
        last = self.num_vars - 1
        stack = [(self.root, 0)]
        while stack:
            node, v = stack.pop()
            x = s[v]
            for key in (UNDEFINED, x) if x != UNDEFINED else (UNDEFINED,):
                child = node.get(key)
                if child is None:
                    continue
                if v == last:
                    out.extend(child)
                else:
                    stack.append((child, v + 1))
        out.sort()
        return out


@dataclass
class SuccessorGraph:
    """Arcs between sampled partial states, stored per distinct state.

    ``classes[c]`` holds the sample indices sharing distinct state c; an arc
    (c, d, w) stands for index arcs (i, j, w) with i in c, j in d, i != j.
    """

    states: list
    classes: list[list[int]]
    class_states: list[PartialState]
    arcs: dict = field(default_factory=dict)  # (c, d) -> min weight

    def index_arcs(self) -> Iterable[tuple[int, int, int]]:
        for (c, d), w in sorted(self.arcs.items()):
            for i in self.classes[c]:
                for j in self.classes[d]:
                    if i != j:
                        yield i, j, w

    def relaxable(self, hs: Sequence[float]) -> list[tuple[int, int, int]]:
        return [(i, j, w) for i, j, w in self.index_arcs() if hs[i] > hs[j] + w]


def build_successor_graph(task: Task, states: Sequence[PartialState]) -> SuccessorGraph:
    classes: list[list[int]] = []
    class_states: list[PartialState] = []
    class_of: dict = {}
    for i, s in enumerate(states):
        c = class_of.get(s)
        if c is None:
            c = class_of[s] = len(class_states)
            class_states.append(s)
            classes.append([])
        classes[c].append(i)
    trie = FactTrie(len(task.variables))
    for c, s in enumerate(class_states):
        trie.insert(s, c)
    ops = task.operators
    arcs: dict = {}
    for c, s in enumerate(class_states):
        for o in applicable_ops(task, s):
            t = list(s)
            for v, x in ops[o].eff_items:
                t[v] = x
            w = ops[o].cost
            for d in trie.query(tuple(t)):
                if c == d and len(classes[c]) == 1:
                    continue
                old = arcs.get((c, d))
                if old is None or w < old:
                    arcs[c, d] = w
    return SuccessorGraph(list(states), classes, class_states, arcs)


def relax(graph: SuccessorGraph, hs: Sequence[int]) -> list[int]:
    """Fixpoint of h(s) = min(h(s), h(t) + w(s, t)) over all index arcs.

    Dijkstra on reversed class arcs (weights are non-negative) gives the best
    value reachable by any member of each class. A sample then takes the best
    value through an arc to another class; arcs between duplicates of one state
    apply last, since they cannot lower the class minimum.
    """
    k = len(graph.classes)
    dist = [min(hs[i] for i in members) for members in graph.classes]
    rev: list[list[tuple[int, int]]] = [[] for _ in range(k)]
    fwd: list[list[tuple[int, int]]] = [[] for _ in range(k)]
    self_w: dict = {}
    for (c, d), w in graph.arcs.items():
        if c == d:
            self_w[c] = w
        else:
            rev[d].append((c, w))
            fwd[c].append((d, w))
    heap = [(dist[c], c) for c in range(k)]
    heapq.heapify(heap)
    while heap:
        dd, d = heapq.heappop(heap)
        if dd > dist[d]:
            continue
        for c, w in rev[d]:
            nd = dd + w
            if nd < dist[c]:
                dist[c] = nd
                heapq.heappush(heap, (nd, c))
    out = list(hs)
    for c, members in enumerate(graph.classes):
        ext = min((dist[d] + w for d, w in fwd[c]), default=math.inf)
        for i in members:
            if ext < out[i]:
                out[i] = ext
        w = self_w.get(c)
        if w is not None and len(members) > 1:
            vals = sorted((out[i], i) for i in members)
            (m1, a1), (m2, _) = vals[0], vals[1]
            for i in members:
                best = (m2 if i == a1 else m1) + w
                if best < out[i]:
                    out[i] = best
    return out


def sui(samples: Sequence[Sample], task: Task) -> list[Sample]:
    """Lower estimates through sampled successors until no arc relaxes."""
    if not samples:
        return []
    graph = build_successor_graph(task, [s.state for s in samples])
    hs = relax(graph, [s.h for s in samples])
    return [s if s.h == h else replace(s, h=h) for s, h in zip(samples, hs)]


# ---------------------------------------------------------------------------
# completion


class Completion(str, Enum):
    RANDOM = "random"
    MUTEX = "mutex"
    FSS = "fss"


class _MutexIndex:
    def __init__(self, task: Task):
        self.groups_of: dict = {}
        for g in task.mutexes:
            for f in g.facts:
                self.groups_of.setdefault(f, []).append(g.facts)

    def conflicts(self, cur: list, v: int, x: int) -> bool:
        for facts in self.groups_of.get((v, x), ()):
            for v2, x2 in facts:
                if v2 != v and cur[v2] == x2:
                    return True
        return False


_mutex_cache: dict = {}


def _mutex_index(task: Task) -> _MutexIndex:
    idx = _mutex_cache.get(id(task))
    if idx is None or idx[0] is not task:
        idx = _mutex_cache[id(task)] = (task, _MutexIndex(task))
    return idx[1]


def mutex_complete(task: Task, s: PartialState, rng: random.Random,
                   retries: int = MUTEX_RETRIES) -> tuple[PartialState, bool]:
    """Random mutex-respecting completion. Returns (state, ok); on failure the
    partial state comes back unchanged (its open variables encode as all-false)."""
    open_vars = [v for v, x in enumerate(s) if x == UNDEFINED]
    if not open_vars:
        return s, True
    if violates_mutex(s, task.mutexes):
        return s, False
    idx = _mutex_index(task)
    sizes = task.domain_sizes
    for _ in range(retries):
        cur = list(s)
        order = open_vars[:]
        rng.shuffle(order)
        for v in order:
            allowed = [x for x in range(sizes[v]) if not idx.conflicts(cur, v, x)]
            if not allowed:
                break
            cur[v] = allowed[rng.randrange(len(allowed))]
        else:
            return tuple(cur), True
    return s, False


def complete_state(sample: Sample, strategy, task: Task, oracle: Optional[StateSpace] = None,
                   rng: Optional[random.Random] = None) -> Sample:
    """Complete the sample's state; h is carried over. FSS raises InvalidPredecessor
    when no reachable state matches; MUTEX may hand back the partial state."""
    strategy = Completion(strategy)
    rng = rng or random.Random(0)
    s = sample.state
    if UNDEFINED not in s:
        return sample
    if strategy is Completion.RANDOM:
        sizes = task.domain_sizes
        state = tuple(x if x != UNDEFINED else rng.randrange(sizes[v]) for v, x in enumerate(s))
    elif strategy is Completion.MUTEX:
        state, _ = mutex_complete(task, s, rng)
    else:
        if oracle is None:
            raise ValueError("FSS completion needs an enumerated state space")
        state = random_fs_state(oracle, s, rng)
    return replace(sample, state=state)


# ---------------------------------------------------------------------------
# random samples


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def add_random_samples(samples: Sequence[Sample], fraction: float, task: Task, rng: random.Random,
                       n_total: Optional[int] = None, limit: Optional[int] = None) -> list[Sample]:
    """Make ``round(fraction * n_total)`` of the final ``n_total`` samples random.

    Regression samples beyond ``n_total - k`` are dropped. Random states come
    from mutex completion of the empty state; each gets 1 + max h, or the h of
    an identical existing sample. With no regression samples left, h = limit + 1.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("random fraction must lie in [0, 1]")
    n_total = len(samples) if n_total is None else n_total
    k = round_half_up(fraction * n_total)
    if k == 0:
        return list(samples)
    base = list(samples[: n_total - k])
    if base:
        h_new = 1 + max(s.h for s in base)
    else:
        if limit is None:
            raise ValueError("an all-random sample set needs the regression limit")
        h_new = int(limit) + 1
    known: dict = {}
    for s in base:
        if s.state not in known or s.h < known[s.state]:
            known[s.state] = s.h
    empty = (UNDEFINED,) * len(task.variables)
    out = base
    for _ in range(k):
        state, _ = mutex_complete(task, empty, rng)
        out.append(Sample(state, known.get(state, h_new), Origin.RANDOM))
    return out


# ---------------------------------------------------------------------------
# workflow


@dataclass
class TrainingSetConfig:
    algorithm: str = "fsm"
    n: int = 1000
    limit: str = "facts-per-effect"  # fixed:<L> | facts | facts-per-effect
    completion: str = "mutex"
    sai: bool = True
    sui: bool = True
    random_fraction: float = 0.0
    use_mutex: bool = True
    goal_reset: bool = True
    p_fsm: float = 0.10
    seed: int = 0

    @classmethod
    def baseline(cls, n: int, seed: int = 0) -> "TrainingSetConfig":
        """Random walks to depth 200, mutexes on, goal reset and improvements off."""
        return cls(algorithm="rw", n=n, limit="fixed:200", completion="mutex", sai=False, sui=False,
                   random_fraction=0.0, use_mutex=True, goal_reset=False, seed=seed)

    @classmethod
    def best(cls, n: int, seed: int = 0) -> "TrainingSetConfig":
        """FSM, facts-per-mean-effect limit, SAI+SUI, 20 % random samples."""
        return cls(algorithm="fsm", n=n, limit="facts-per-effect", completion="mutex", sai=True, sui=True,
                   random_fraction=0.2, use_mutex=True, goal_reset=True, seed=seed)


def run_sampler(task: Task, algorithm: str, n: int, limit: RegressionLimit, use_mutex: bool, seed: int,
                goal_reset: bool = True, p_fsm: float = 0.10, oracle=None, rng=None) -> SampleSet:
    rng = rng or random.Random(seed)
    kw = dict(use_mutex=use_mutex, seed=seed, goal_reset=goal_reset, oracle=oracle, rng=rng)
    algorithm = algorithm.lower()
    if algorithm == "rw":
        return sample_rw(task, n, limit, **kw)
    if algorithm in ("bfs", "dfs"):
        return sample_bfs_dfs(task, n, limit, algorithm, **kw)
    if algorithm == "fsm":
        return sample_fsm(task, n, limit, p_fsm, **kw)
    raise ValueError(f"unknown sampling algorithm {algorithm}")


def complete_all(samples: Sequence[Sample], strategy, task: Task, oracle=None,
                 rng: Optional[random.Random] = None) -> tuple[list[Sample], int, int]:
    """Complete every sample. Returns (samples, mutex fallbacks, dropped invalid)."""
    rng = rng or random.Random(0)
    strategy = Completion(strategy)
    out, fallbacks, dropped = [], 0, 0
    for s in samples:
        try:
            c = complete_state(s, strategy, task, oracle, rng)
        except InvalidPredecessor:
            dropped += 1
            continue
        if UNDEFINED in c.state:
            fallbacks += 1
        out.append(c)
    return out, fallbacks, dropped


def build_training_set(task: Task, config: TrainingSetConfig, oracle: Optional[StateSpace] = None) -> SampleSet:
    completion = Completion(config.completion)
    if completion is Completion.FSS and oracle is None:
        raise ValueError("FSS completion needs an enumerated state space")
    limit = parse_limit(task, config.limit)
    k = round_half_up(config.random_fraction * config.n)
    n_reg = config.n - k
    meta = {}
    samples: list[Sample] = []
    if n_reg > 0:
        ss = run_sampler(task, config.algorithm, n_reg, limit, config.use_mutex, config.seed, config.goal_reset,
                         config.p_fsm, oracle if completion is Completion.FSS else None,
                         stream(config.seed, "sample"))
        meta.update(ss.meta)
        samples = ss.samples
    if config.sai:
        samples = sai(samples)
    if config.sui:
        samples = sui(samples, task)
    samples, fallbacks, dropped = complete_all(samples, completion, task, oracle, stream(config.seed, "completion"))
    if k:
        samples = add_random_samples(samples, config.random_fraction, task, stream(config.seed, "random"),
                                     n_total=len(samples) + k, limit=limit.resolved)
    if config.sai:
        samples = sai(samples)
    meta.update({"task": task.name, "algorithm": config.algorithm, "N": config.n, "limit": limit.resolved,
                 "limit_kind": str(limit), "completion": completion.value, "sai": int(config.sai),
                 "sui": int(config.sui), "random_fraction": config.random_fraction, "random_samples": k,
                 "mutex": int(config.use_mutex), "goal_reset": int(config.goal_reset), "seed": config.seed,
                 "mutex_fallbacks": fallbacks, "invalid_dropped": dropped})
    return SampleSet(samples, meta)
