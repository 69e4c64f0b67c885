"""Sample and training file formats.

Partial-sample file::

    #meta key=value
    <h>;<v1>,<v2>,...      (``*`` marks an undefined variable)

Training file::

    #facts=<F>
    <h>;<F characters of 0/1 in canonical fact order>
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .sas import UNDEFINED, Task, num_facts
from .sampler import Origin, Sample, SampleSet


class FormatError(ValueError):
    pass


def format_partial_samples(ss: SampleSet) -> str:
    lines = [f"#meta {k}={v}" for k, v in ss.meta.items()]
    for s in ss.samples:
        values = ",".join("*" if x == UNDEFINED else str(x) for x in s.state)
        lines.append(f"{s.h};{values}")
    return "\n".join(lines) + "\n"


def _meta_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_partial_samples(text: str, task: Task | None = None) -> SampleSet:
    meta, samples = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("#meta "):
                key, _, value = line[6:].partition("=")
                meta[key.strip()] = _meta_value(value.strip())
            continue
        try:
            h, _, values = line.partition(";")
            state = tuple(UNDEFINED if x == "*" else int(x) for x in values.split(","))
            sample = Sample(state, int(h), Origin.RW)
        except ValueError:
            raise FormatError(f"line {lineno}: malformed sample '{line}'") from None
        if task is not None and len(state) != len(task.variables):
            raise FormatError(f"line {lineno}: {len(state)} values, task has {len(task.variables)} variables")
        samples.append(sample)
    return SampleSet(samples, meta)


def format_training(task: Task, samples: Sequence[Sample]) -> str:
    offsets, F = task.fact_offsets, num_facts(task)
    lines = [f"#facts={F}"]
    for s in samples:
        bits = ["0"] * F
        for off, x in zip(offsets, s.state):
            if x != UNDEFINED:
                bits[off + x] = "1"
        lines.append(f"{s.h};{''.join(bits)}")
    return "\n".join(lines) + "\n"


def parse_training(text: str) -> tuple[int, list[tuple[int, str]]]:
    """Returns (F, [(h, bitstring), ...])."""
    facts = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line.startswith("#facts="):
                facts = int(line[7:])
            continue
        h, _, bits = line.partition(";")
        if facts is None:
            raise FormatError("missing #facts header")
        if len(bits) != facts or set(bits) - {"0", "1"}:
            raise FormatError(f"line {lineno}: bad bitstring")
        rows.append((int(h), bits))
    if facts is None:
        raise FormatError("missing #facts header")
    return facts, rows


def training_arrays(text: str):
    import numpy as np

    facts, rows = parse_training(text)
    x = np.array([[c == "1" for c in bits] for _, bits in rows], dtype=np.float64).reshape(len(rows), facts)
    y = np.array([h for h, _ in rows], dtype=np.float64)
    return x, y


def write_text(path, text: str) -> None:
    Path(path).write_text(text)
