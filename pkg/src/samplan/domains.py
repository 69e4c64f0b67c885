"""Generators for the small bundled planning tasks.

The encodings follow the shape of Fast Downward's translator output (finite
domain variables from mutex groups, binary variables for the rest, mutex
groups listed in the file), so the sampling code sees realistic tasks.
"""
from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

from .sas import UNDEFINED, MutexGroup, Operator, Task, VariableDef, load_task, parse_sas, write_sas


def _var(index, name, values):
    return VariableDef(index, name, len(values), tuple(values))


def _op(n, name, pre, eff, cost=1):
    p, e = [UNDEFINED] * n, [UNDEFINED] * n
    for v, x in pre.items():
        p[v] = x
    for v, x in eff.items():
        e[v] = x
    return Operator(name, tuple(p), tuple(e), cost)


def toy3() -> Task:
    variables = (_var(0, "A", ["a0", "a1"]), _var(1, "B", ["b0", "b1"]))
    ops = (_op(2, "op1", {0: 0}, {0: 1}), _op(2, "op2", {1: 0}, {1: 1}))
    return Task(variables, ops, (), (0, 0), (1, UNDEFINED), 0, "toy3")


def deadend() -> Task:
    """Three-valued A with a trap value a2 that cannot reach the goal."""
    variables = (_var(0, "A", ["a0", "a1", "a2"]), _var(1, "B", ["b0", "b1"]))
    ops = (
        _op(2, "op1", {0: 0}, {0: 1}),
        _op(2, "trap", {0: 0}, {0: 2}),
        _op(2, "op2", {1: 0}, {1: 1}),
    )
    return Task(variables, ops, (), (0, 0), (1, UNDEFINED), 0, "deadend")


def blocks(names: list[str], init: list[list[str]], goal_tower: list[str], name: str) -> Task:
    """4-operator blocks world with a hand.

    ``init`` lists towers bottom-up; ``goal_tower`` is a single tower, bottom-up.
    Variables: pos(b) in {on(b,c)..., ontable(b), holding(b)}, clear(b), handempty.
    """
    k = len(names)
    n = 2 * k + 1
    on_idx = {}  # (b, c) -> value index in pos(b)
    variables = []
    for i, b in enumerate(names):
        values = []
        for c in names:
            if c != b:
                on_idx[b, c] = len(values)
                values.append(f"Atom on({b}, {c})")
        values += [f"Atom ontable({b})", f"Atom holding({b})"]
        variables.append(_var(i, f"pos({b})", values))
    table, held = k - 1, k
    for i, b in enumerate(names):
        variables.append(_var(k + i, f"clear({b})", [f"Atom clear({b})", f"NegatedAtom clear({b})"]))
    variables.append(_var(2 * k, "handempty", ["Atom handempty()", "NegatedAtom handempty()"]))
    pos = {b: i for i, b in enumerate(names)}
    clear = {b: k + i for i, b in enumerate(names)}
    hand = 2 * k
    T, F = 0, 1

    ops = []
    for b in names:
        ops.append(_op(n, f"pick-up {b}", {pos[b]: table, clear[b]: T, hand: T}, {pos[b]: held, clear[b]: F, hand: F}))
        ops.append(_op(n, f"put-down {b}", {pos[b]: held}, {pos[b]: table, clear[b]: T, hand: T}))
    for b in names:
        for c in names:
            if b == c:
                continue
            ops.append(_op(n, f"stack {b} {c}", {pos[b]: held, clear[c]: T},
                           {pos[b]: on_idx[b, c], clear[c]: F, clear[b]: T, hand: T}))
            ops.append(_op(n, f"unstack {b} {c}", {pos[b]: on_idx[b, c], clear[b]: T, hand: T},
                           {pos[b]: held, clear[c]: T, clear[b]: F, hand: F}))

    mutexes = [MutexGroup(((hand, T),) + tuple((pos[b], held) for b in names))]
    for c in names:
        facts = [(clear[c], T)] + [(pos[b], on_idx[b, c]) for b in names if b != c] + [(pos[c], held)]
        mutexes.append(MutexGroup(tuple(facts)))

    s0 = [UNDEFINED] * n
    for tower in init:
        s0[pos[tower[0]]] = table
        for lower, upper in zip(tower, tower[1:]):
            s0[pos[upper]] = on_idx[upper, lower]
            s0[clear[lower]] = F
        s0[clear[tower[-1]]] = T
    s0[hand] = T
    goal = [UNDEFINED] * n
    for lower, upper in zip(goal_tower, goal_tower[1:]):
        goal[pos[upper]] = on_idx[upper, lower]
    return Task(tuple(variables), tuple(ops), tuple(mutexes), tuple(s0), tuple(goal), 0, name)


def blocks_n(k: int) -> Task:
    names = [chr(ord("a") + i) for i in range(k)]
    init = [names[: (k + 1) // 2][::-1], names[(k + 1) // 2:]]
    init = [t for t in init if t]
    return blocks(names, init, names, f"blocks-{k}")


def blocks_7_0() -> Task:
    """Seven blocks, single-tower goal, as in the IPC-2000 instance probBLOCKS-7-0."""
    names = ["c", "f", "a", "b", "g", "d", "e"]
    init = [["d", "c", "f", "a", "b", "g", "e"]]
    goal = ["e", "f", "c", "b", "d", "g", "a"]
    return blocks(names, init, goal, "blocks7")


def npuzzle(rows: int, cols: int, scramble: int = 60, seed: int = 0) -> Task:
    """Sliding-tile puzzle; variable cell(p) holds the tile at p (0 is the blank)."""
    cells = rows * cols
    variables = tuple(_var(p, f"cell({p // cols},{p % cols})",
                           ["Atom blank"] + [f"Atom tile({t})" for t in range(1, cells)]) for p in range(cells))
    adj = []
    for p in range(cells):
        r, c = divmod(p, cols)
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols:
                adj.append((p, rr * cols + cc))
    ops = tuple(_op(cells, f"move tile{t} {p} {q}", {p: t, q: 0}, {p: 0, q: t})
                for t in range(1, cells) for p, q in adj)
    mutexes = tuple(MutexGroup(tuple((p, t) for p in range(cells))) for t in range(cells))
    goal = tuple(list(range(1, cells)) + [0])
    state = list(goal)
    rng = random.Random(seed)
    for _ in range(scramble):
        blank = state.index(0)
        moves = [q for p, q in adj if p == blank]
        q = rng.choice(moves)
        state[blank], state[q] = state[q], 0
    return Task(variables, ops, mutexes, tuple(state), goal, 0, f"npuzzle-{rows}x{cols}")


def visitall(rows: int, cols: int) -> Task:
    cells = rows * cols
    names = [f"cell-{p // cols}-{p % cols}" for p in range(cells)]
    variables = [_var(0, "at-robot", [f"Atom at-robot({c})" for c in names])]
    for p, c in enumerate(names):
        variables.append(_var(p + 1, f"visited({c})", [f"Atom visited({c})", f"NegatedAtom visited({c})"]))
    n = cells + 1
    ops = []
    for p in range(cells):
        r, c = divmod(p, cols)
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < rows and 0 <= cc < cols:
                q = rr * cols + cc
                ops.append(_op(n, f"move {names[p]} {names[q]}", {0: p}, {0: q, q + 1: 0}))
    s0 = tuple([0, 0] + [1] * (cells - 1))
    goal = tuple([UNDEFINED] + [0] * cells)
    return Task(tuple(variables), tuple(ops), (), s0, goal, 0, f"visitall-{rows}x{cols}")


GENERATORS = {
    "toy3": toy3,
    "deadend": deadend,
    "blocks-4": lambda: blocks_n(4),
    "blocks-5": lambda: blocks_n(5),
    "blocks-6": lambda: blocks_n(6),
    "blocks7": blocks_7_0,
    "npuzzle-2x3": lambda: npuzzle(2, 3),
    "npuzzle-3x3": lambda: npuzzle(3, 3),
    "visitall-3x3": lambda: visitall(3, 3),
}


def bundled_names() -> list[str]:
    return sorted(GENERATORS)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("samplan") / "data" / f"{name}.sas"))


def load_bundled(name: str) -> Task:
    """Load a bundled task by name (falls back to the generator if the file is missing)."""
    path = bundled_path(name)
    if path.exists():
        return load_task(path)
    return parse_sas(write_sas(GENERATORS[name]()), name=name)


def write_bundled(directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, make in GENERATORS.items():
        path = directory / f"{name}.sas"
        path.write_text(write_sas(make()))
        written.append(path)
    return written
