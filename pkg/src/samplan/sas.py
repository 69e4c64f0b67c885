"""SAS+ (Fast Downward FDR, version 3) task model, parser and fact encoding.

States are plain tuples of value indices with ``UNDEFINED`` (-1) marking
variables a partial state leaves open. Complete and partial states share this
representation, so hashing, equality and dictionary keys are cheap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

UNDEFINED = -1

PartialState = tuple  # tuple[int, ...], UNDEFINED for open variables


class ParseError(ValueError):
    """Malformed FDR input. Carries the 1-based line number and section name."""

    def __init__(self, message: str, line: int, section: str):
        super().__init__(f"line {line} [{section}]: {message}")
        self.line = line
        self.section = section


class UnsupportedFeature(ParseError):
    pass


@dataclass(frozen=True)
class VariableDef:
    index: int
    name: str
    domain_size: int
    fact_names: tuple[str, ...]

    def __post_init__(self):
        if self.domain_size < 1:
            raise ValueError(f"variable {self.name}: empty domain")
        if len(self.fact_names) != self.domain_size:
            raise ValueError(f"variable {self.name}: {len(self.fact_names)} names for {self.domain_size} values")


@dataclass(frozen=True)
class Operator:
    name: str
    pre: PartialState
    eff: PartialState
    cost: int = 1
    pre_items: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)
    eff_items: tuple[tuple[int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.pre) != len(self.eff):
            raise ValueError(f"operator {self.name}: pre/eff dimension mismatch")
        if self.cost < 0:
            raise ValueError(f"operator {self.name}: negative cost")
        eff_items = tuple((v, x) for v, x in enumerate(self.eff) if x != UNDEFINED)
        if not eff_items:
            raise ValueError(f"operator {self.name}: no effects")
        object.__setattr__(self, "pre_items", tuple((v, x) for v, x in enumerate(self.pre) if x != UNDEFINED))
        object.__setattr__(self, "eff_items", eff_items)


@dataclass(frozen=True)
class MutexGroup:
    facts: tuple[tuple[int, int], ...]


@dataclass(frozen=True, eq=False)
class Task:
    variables: tuple[VariableDef, ...]
    operators: tuple[Operator, ...]
    mutexes: tuple[MutexGroup, ...]
    s0: PartialState
    goal: PartialState
    metric_flag: int = 0
    name: str = "task"

    def __post_init__(self):
        n = len(self.variables)
        if len(self.s0) != n or UNDEFINED in self.s0:
            raise ValueError("initial state must be complete")
        if len(self.goal) != n or all(x == UNDEFINED for x in self.goal):
            raise ValueError("goal must define at least one variable")
        for s in (self.s0, self.goal):
            check_state(self, s)
        for op in self.operators:
            check_state(self, op.pre)
            check_state(self, op.eff)
        for group in self.mutexes:
            for v, x in group.facts:
                if not (0 <= v < n and 0 <= x < self.variables[v].domain_size):
                    raise ValueError(f"mutex fact ({v}, {x}) out of range")

    @property
    def domain_sizes(self) -> tuple[int, ...]:
        return tuple(v.domain_size for v in self.variables)

    @property
    def goal_items(self) -> tuple[tuple[int, int], ...]:
        return tuple((v, x) for v, x in enumerate(self.goal) if x != UNDEFINED)

    @property
    def fact_offsets(self) -> tuple[int, ...]:
        offsets, acc = [], 0
        for var in self.variables:
            offsets.append(acc)
            acc += var.domain_size
        return tuple(offsets)

    def state_from_mapping(self, assignment: Mapping[int, int]) -> PartialState:
        s = [UNDEFINED] * len(self.variables)
        for v, x in assignment.items():
            s[v] = x
        check_state(self, tuple(s))
        return tuple(s)

    def format_state(self, s: PartialState) -> str:
        parts = [f"{self.variables[v].name}={self.variables[v].fact_names[x]}" for v, x in enumerate(s) if x != UNDEFINED]
        return "{" + ", ".join(parts) + "}"


def check_state(task: Task, s: Sequence[int]) -> None:
    if len(s) != len(task.variables):
        raise ValueError(f"state has {len(s)} entries, task has {len(task.variables)} variables")
    for var, x in zip(task.variables, s):
        if x != UNDEFINED and not 0 <= x < var.domain_size:
            raise ValueError(f"value {x} out of range for variable {var.name}")


def is_complete(s: PartialState) -> bool:
    return UNDEFINED not in s


def defined_vars(s: PartialState) -> list[int]:
    return [v for v, x in enumerate(s) if x != UNDEFINED]


def num_facts(task: Task) -> int:
    return sum(v.domain_size for v in task.variables)


def mean_effect_size(task: Task) -> Fraction:
    if not task.operators:
        raise ValueError("mean effect size undefined for a task without operators")
    return Fraction(sum(len(op.eff_items) for op in task.operators), len(task.operators))


def encode_state(task: Task, s: PartialState) -> np.ndarray:
    """One-hot fact vector in (variable, value) order; undefined variables give all-zero blocks."""
    bits = np.zeros(num_facts(task), dtype=np.uint8)
    for off, x in zip(task.fact_offsets, s):
        if x != UNDEFINED:
            bits[off + x] = 1
    return bits


def encode_states(task: Task, states: Iterable[PartialState]) -> np.ndarray:
    states = list(states)
    out = np.zeros((len(states), num_facts(task)), dtype=np.float64)
    offsets = task.fact_offsets
    for i, s in enumerate(states):
        for off, x in zip(offsets, s):
            if x != UNDEFINED:
                out[i, off + x] = 1.0
    return out


def decode_facts(task: Task, bits: Sequence[int]) -> PartialState:
    if len(bits) != num_facts(task):
        raise ValueError(f"expected {num_facts(task)} facts, got {len(bits)}")
    s = []
    for off, var in zip(task.fact_offsets, task.variables):
        block = [j for j in range(var.domain_size) if bits[off + j]]
        if len(block) > 1:
            raise ValueError(f"variable {var.name}: {len(block)} true facts")
        s.append(block[0] if block else UNDEFINED)
    return tuple(s)


# ---------------------------------------------------------------------------
# FDR parsing


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0
        self.section = "version"

    def next(self) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise ParseError("unexpected end of file", self.pos, self.section)

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.pos, self.section)

    def expect(self, token: str) -> None:
        line = self.next()
        if line != token:
            raise self.error(f"expected '{token}', found '{line}'")

    def int(self) -> int:
        line = self.next()
        try:
            return int(line)
        except ValueError:
            raise self.error(f"expected an integer, found '{line}'") from None

    def ints(self, count: int) -> list[int]:
        line = self.next()
        parts = line.split()
        if len(parts) != count:
            raise self.error(f"expected {count} integers, found '{line}'")
        try:
            return [int(p) for p in parts]
        except ValueError:
            raise self.error(f"expected integers, found '{line}'") from None


def parse_sas(text: str, name: str = "task") -> Task:
    """Parse an FDR v3 document. Prevail conditions and pre-values go to ``pre``."""
    r = _Lines(text)

    r.expect("begin_version")
    version = r.int()
    if version != 3:
        raise UnsupportedFeature(f"FDR version {version} not supported (need 3)", r.pos, r.section)
    r.expect("end_version")

    r.section = "metric"
    r.expect("begin_metric")
    metric = r.int()
    r.expect("end_metric")

    r.section = "variables"
    variables = []
    for index in range(r.int()):
        r.expect("begin_variable")
        var_name = r.next()
        layer = r.int()
        if layer != -1:
            raise UnsupportedFeature(f"derived variable {var_name} (axiom layer {layer})", r.pos, r.section)
        size = r.int()
        if size < 1:
            raise r.error(f"variable {var_name} has empty domain")
        names = tuple(r.next() for _ in range(size))
        r.expect("end_variable")
        variables.append(VariableDef(index, var_name, size, names))
    n = len(variables)

    def fact(v: int, x: int, allow_none: bool = False) -> None:
        if not 0 <= v < n:
            raise r.error(f"variable index {v} out of range")
        if allow_none and x == -1:
            return
        if not 0 <= x < variables[v].domain_size:
            raise r.error(f"value {x} out of range for variable {variables[v].name}")

    r.section = "mutex_group"
    mutexes = []
    for _ in range(r.int()):
        r.expect("begin_mutex_group")
        facts = []
        for _ in range(r.int()):
            v, x = r.ints(2)
            fact(v, x)
            facts.append((v, x))
        r.expect("end_mutex_group")
        mutexes.append(MutexGroup(tuple(facts)))

    r.section = "state"
    r.expect("begin_state")
    s0 = []
    for v in range(n):
        x = r.int()
        fact(v, x)
        s0.append(x)
    r.expect("end_state")

    r.section = "goal"
    r.expect("begin_goal")
    goal = [UNDEFINED] * n
    count = r.int()
    if count < 1:
        raise r.error("goal must contain at least one fact")
    for _ in range(count):
        v, x = r.ints(2)
        fact(v, x)
        goal[v] = x
    r.expect("end_goal")

    r.section = "operator"
    operators = []
    for _ in range(r.int()):
        r.expect("begin_operator")
        op_name = r.next()
        pre = [UNDEFINED] * n
        eff = [UNDEFINED] * n
        for _ in range(r.int()):
            v, x = r.ints(2)
            fact(v, x)
            pre[v] = x
        num_effects = r.int()
        if num_effects < 1:
            raise r.error(f"operator {op_name} has no effects")
        for _ in range(num_effects):
            parts = r.next().split()
            try:
                values = [int(p) for p in parts]
            except ValueError:
                raise r.error(f"malformed effect line '{' '.join(parts)}'") from None
            if not values or values[0] != 0:
                raise UnsupportedFeature(f"conditional effect in operator {op_name}", r.pos, r.section)
            if len(values) != 4:
                raise r.error(f"malformed effect line '{' '.join(parts)}'")
            _, v, before, after = values
            fact(v, before, allow_none=True)
            fact(v, after)
            if before != -1:
                pre[v] = before
            eff[v] = after
        cost = r.int()
        r.expect("end_operator")
        if metric == 0:
            cost = 1
        operators.append(Operator(op_name, tuple(pre), tuple(eff), cost))

    r.section = "axiom"
    if r.int() != 0:
        raise UnsupportedFeature("axioms are not supported", r.pos, r.section)

    return Task(tuple(variables), tuple(operators), tuple(mutexes), tuple(s0), tuple(goal), metric, name)


def load_task(path) -> Task:
    from pathlib import Path

    path = Path(path)
    return parse_sas(path.read_text(), name=path.stem)


def write_sas(task: Task) -> str:
    """Serialise a task back to FDR v3. Prevail conditions are emitted for
    precondition variables the operator does not change."""
    out = ["begin_version", "3", "end_version", "begin_metric", str(task.metric_flag), "end_metric"]
    out.append(str(len(task.variables)))
    for var in task.variables:
        out += ["begin_variable", var.name, "-1", str(var.domain_size), *var.fact_names, "end_variable"]
    out.append(str(len(task.mutexes)))
    for group in task.mutexes:
        out += ["begin_mutex_group", str(len(group.facts))]
        out += [f"{v} {x}" for v, x in group.facts]
        out.append("end_mutex_group")
    out += ["begin_state", *map(str, task.s0), "end_state"]
    goal = task.goal_items
    out += ["begin_goal", str(len(goal)), *(f"{v} {x}" for v, x in goal), "end_goal"]
    out.append(str(len(task.operators)))
    for op in task.operators:
        prevail = [(v, x) for v, x in op.pre_items if op.eff[v] == UNDEFINED]
        out += ["begin_operator", op.name, str(len(prevail)), *(f"{v} {x}" for v, x in prevail)]
        out.append(str(len(op.eff_items)))
        out += [f"0 {v} {op.pre[v]} {x}" for v, x in op.eff_items]
        out += [str(op.cost), "end_operator"]
    out.append("0")
    return "\n".join(out) + "\n"
