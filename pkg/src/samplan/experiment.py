"""End-to-end experiments: sample, refine, train, search; oracle-based evaluation; reports."""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import random
import statistics
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .domains import GENERATORS, load_bundled
from .learner import TrainConfig, fit, save_model
from .refinery import TrainingSetConfig, build_training_set
from .sampler import Sample
from .sas import Task, encode_states, is_complete, load_task
from .search import LearnedHeuristic, Limits, gbfs, make_heuristic, validate_plan
from .statespace import INFINITY, StateSpace, StateSpaceTooLarge, enumerate_forward, hstar_anywhere
from .transition import applicable_ops, satisfies_goal, successor

RUN_FIELDS = ["task", "sample_seed", "net_seed", "init", "heuristic", "status", "plan_cost", "expanded",
              "generated", "valid", "error"]
CELL_FIELDS = ["task", "sample_seed", "net_seed", "samples", "estimate_mad", "epochs", "best_epoch",
               "best_val_loss", "born_dead_retries", "error"]


class InitialStateError(RuntimeError):
    pass


def load_any_task(ref: str) -> Task:
    """Bundled task name or path to a SAS file."""
    if ref in GENERATORS:
        return load_bundled(ref)
    return load_task(ref)


def gen_initial_states(task: Task, count: int, walk_length: int, seed: int, max_tries: Optional[int] = None):
    """Endpoints of forward random walks from s0; duplicates and goal states are redrawn."""
    if walk_length < 0:
        raise ValueError("walk length must be non-negative")
    rng = random.Random(seed)
    max_tries = max_tries if max_tries is not None else 100 * max(count, 1)
    out, seen = [], set()
    tries = 0
    while len(out) < count:
        if tries >= max_tries:
            raise InitialStateError(f"only {len(out)} of {count} distinct non-goal states after {tries} walks")
        tries += 1
        s = task.s0
        for _ in range(walk_length):
            ops = applicable_ops(task, s)
            if not ops:
                break
            s = successor(s, task.operators[ops[rng.randrange(len(ops))]])
        if s in seen or satisfies_goal(s, task.goal):
            continue
        seen.add(s)
        out.append(s)
    return out


def parse_state_file(task: Task, text: str) -> list:
    """One complete state per line, comma-separated values; duplicates allowed."""
    states = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        s = tuple(int(x) for x in line.split(","))
        if len(s) != len(task.variables) or not is_complete(s):
            raise ValueError(f"bad initial state line '{line}'")
        states.append(s)
    return states


def format_state_file(states: Iterable) -> str:
    return "".join(",".join(map(str, s)) + "\n" for s in states)


def eval_estimates(samples: Sequence[Sample], oracle: StateSpace) -> float:
    """Mean |h - h*| over complete samples with finite h*."""
    diffs = []
    for s in samples:
        if not is_complete(s.state):
            continue
        d = hstar_anywhere(oracle, s.state)
        if d == INFINITY:
            continue
        diffs.append(abs(s.h - d))
    return float(np.mean(diffs)) if diffs else math.nan


def eval_heuristic_over_fss(heuristic, oracle: StateSpace) -> float:
    finite = np.flatnonzero(np.isfinite(oracle.hstar))
    if finite.size == 0:
        return math.nan
    states = [oracle.states[i] for i in finite]
    values = np.asarray(heuristic.evaluate(states), dtype=np.float64)
    return float(np.mean(np.abs(values - oracle.hstar[finite])))


def geometric_mean(values: Iterable[float]) -> float:
    values = list(values)
    if not values:
        return math.nan
    if any(v <= 0 for v in values):
        raise ValueError("geometric mean needs strictly positive values")
    return statistics.geometric_mean(values)


def derive_seed(seed: int, tag: str) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(tag.encode())])
    return int(ss.generate_state(1)[0])


# ---------------------------------------------------------------------------
# configuration


def _split(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [v.strip() for v in str(value).split(",") if v.strip()]


@dataclass
class ExperimentConfig:
    tasks: list = field(default_factory=lambda: ["toy3"])
    heuristic: str = "learned"  # learned | blind | goalcount | perfect
    algorithm: str = "fsm"
    limit: str = "facts-per-effect"
    completion: str = "mutex"
    sai: bool = True
    sui: bool = True
    random_fraction: float = 0.0
    use_mutex: bool = True
    goal_reset: bool = True
    p_fsm: float = 0.10
    labels: str = "sampled"  # sampled | hstar (relabel completed samples with h*)
    budget: str = "fixed:1000"  # fixed:N | fraction:p | per-variable:M
    batch: int = 64
    lr: float = 1e-4
    patience: int = 100
    max_train_seconds: float = 1800.0
    max_epochs: Optional[int] = None
    sample_seeds: list = field(default_factory=lambda: [0])
    net_seeds: list = field(default_factory=lambda: [0])
    initial_states: Optional[str] = None  # state file; otherwise random walks
    initial_count: int = 50
    walk_length: int = 200
    initial_seed: int = 0
    max_seconds: float = 300.0
    max_memory_mb: float = 2048.0
    max_expansions: Optional[int] = None
    oracle_max_states: int = 1_000_000

    def __post_init__(self):
        self.tasks = _split(self.tasks)
        self.sample_seeds = [int(s) for s in _split(self.sample_seeds)]
        self.net_seeds = [int(s) for s in _split(self.net_seeds)]
        if not self.tasks:
            raise ValueError("no task given")
        if not self.sample_seeds or not self.net_seeds:
            raise ValueError("seed lists must be non-empty")
        if self.labels not in ("sampled", "hstar"):
            raise ValueError("labels must be 'sampled' or 'hstar'")
        kind = self.budget.split(":", 1)[0]
        if kind not in ("fixed", "fraction", "per-variable"):
            raise ValueError(f"unknown budget rule '{self.budget}'")

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip()
            if not sep or key not in types:
                raise ValueError(f"config line {lineno}: unknown key '{key}'")
            kw[key] = _coerce(types[key], value)
        return cls(**kw)

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, list):
                v = ",".join(map(str, v))
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{k} = {'' if v is None else v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def _coerce(typ, value: str):
    typ = str(typ)
    if value == "" and "Optional" in typ:
        return None
    if "bool" in typ:
        if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"not a boolean: {value}")
        return value.lower() in ("1", "true", "yes")
    if "int" in typ and "list" not in typ:
        return int(value)
    if "float" in typ:
        return float(value)
    return value


def sample_budget(rule: str, task: Task, oracle: Optional[StateSpace]) -> int:
    kind, _, arg = rule.partition(":")
    if kind == "fixed":
        return int(arg)
    if kind == "fraction":
        if oracle is None:
            raise ValueError("a fraction-of-state-space budget needs the enumerated state space")
        return max(1, int(math.floor(float(arg) * len(oracle) + 0.5)))
    if kind == "per-variable":
        return max(1, int(arg) // len(task.variables))
    raise ValueError(f"unknown budget rule '{rule}'")


def _needs_oracle(cfg: ExperimentConfig) -> bool:
    return (cfg.budget.startswith("fraction") or cfg.heuristic == "perfect" or cfg.labels == "hstar"
            or cfg.completion == "fss")


def _oracle(task: Task, cfg: ExperimentConfig, required: bool) -> Optional[StateSpace]:
    try:
        return enumerate_forward(task, cfg.oracle_max_states)
    except StateSpaceTooLarge:
        if required:
            raise
        return None


# ---------------------------------------------------------------------------
# cells


def _initial_states(task: Task, cfg: ExperimentConfig) -> list:
    if cfg.initial_states:
        return parse_state_file(task, Path(cfg.initial_states).read_text())
    return gen_initial_states(task, cfg.initial_count, cfg.walk_length, cfg.initial_seed)


def _rows_csv(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "inf" if x == INFINITY else repr(x)
    return str(x)


def run_cell(task_ref: str, sample_seed: int, net_seed: int, cfg: ExperimentConfig, cell_dir: str) -> None:
    """One (task, sample seed, net seed) cell; writes runs.csv, cell.csv, times.csv and a done marker."""
    cell = Path(cell_dir)
    cell.mkdir(parents=True, exist_ok=True)
    base = {"task": task_ref, "sample_seed": sample_seed, "net_seed": net_seed}
    info = dict(base, samples="", estimate_mad="", epochs="", best_epoch="", best_val_loss="",
                born_dead_retries="", error="")
    rows, times = [], []
    try:
        task = load_any_task(task_ref)
        oracle = _oracle(task, cfg, _needs_oracle(cfg))
        starts = _initial_states(task, cfg)
        heuristic_name = cfg.heuristic
        if cfg.heuristic == "learned":
            heuristic = _train_cell(task, oracle, sample_seed, net_seed, cfg, cell, info)
        else:
            heuristic = make_heuristic(cfg.heuristic, task, oracle)
        limits = Limits(cfg.max_seconds, cfg.max_memory_mb, cfg.max_expansions)
        for i, s in enumerate(starts):
            res = gbfs(task, s, heuristic, limits)
            rows.append(dict(base, init=i, heuristic=heuristic_name, status=res.status.value,
                             plan_cost=_fmt(res.plan_cost), expanded=res.expanded, generated=res.generated,
                             valid=int(validate_plan(task, s, res.plan)) if res.solved else "", error=""))
            times.append({"init": i, "seconds": f"{res.seconds:.6f}"})
    except Exception as exc:  # a failing cell must not stop the experiment
        info["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(dict(base, init="", heuristic=cfg.heuristic, status="ERROR", plan_cost="", expanded="",
                         generated="", valid="", error=info["error"]))
    (cell / "runs.csv").write_text(_rows_csv(rows, RUN_FIELDS))
    (cell / "cell.csv").write_text(_rows_csv([info], CELL_FIELDS))
    (cell / "times.csv").write_text(_rows_csv(times, ["init", "seconds"]))
    (cell / "done").write_text("ok\n")


def _train_cell(task, oracle, sample_seed, net_seed, cfg, cell: Path, info: dict):
    n = sample_budget(cfg.budget, task, oracle)
    tcfg = TrainingSetConfig(algorithm=cfg.algorithm, n=n, limit=cfg.limit, completion=cfg.completion,
                             sai=cfg.sai, sui=cfg.sui, random_fraction=cfg.random_fraction,
                             use_mutex=cfg.use_mutex, goal_reset=cfg.goal_reset, p_fsm=cfg.p_fsm, seed=sample_seed)
    ts = build_training_set(task, tcfg, oracle)
    samples = [s for s in ts.samples if is_complete(s.state)]
    if cfg.labels == "hstar":
        relabeled = []
        for s in samples:
            d = hstar_anywhere(oracle, s.state)
            if d != INFINITY:
                relabeled.append(Sample(s.state, int(d), s.origin))
        samples = relabeled
    if oracle is not None:
        info["estimate_mad"] = _fmt(eval_estimates(samples, oracle))
    info["samples"] = len(samples)
    x = encode_states(task, [s.state for s in samples])
    y = np.array([s.h for s in samples], dtype=np.float64)
    train_cfg = TrainConfig(lr=cfg.lr, batch_size=cfg.batch, patience=cfg.patience,
                            max_seconds=cfg.max_train_seconds, max_epochs=cfg.max_epochs,
                            seed=derive_seed(net_seed, "train"))
    model, report = fit(x, y, net_seed, train_cfg)
    save_model(model, cell / "model.txt")
    info.update(epochs=report.epochs, best_epoch=report.best_epoch, best_val_loss=_fmt(report.best_val_loss),
                born_dead_retries=report.born_dead_retries)
    return LearnedHeuristic(task, model)


def _cell_name(task_ref: str, sample_seed: int, net_seed: int) -> str:
    stem = Path(task_ref).stem if task_ref not in GENERATORS else task_ref
    return f"{stem}__s{sample_seed}__n{net_seed}"


def cells(cfg: ExperimentConfig) -> list[tuple[str, int, int]]:
    return [(t, s, n) for t in cfg.tasks for s in cfg.sample_seeds for n in cfg.net_seeds]


def resolve_jobs(jobs: int) -> int:
    env = os.environ.get("SAMPLAN_JOBS")
    if env:
        jobs = int(env)
    return max(1, jobs)


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> "Report":
    """Run every missing cell, then merge per-cell files into runs.csv / cells.csv / report.csv."""
    out = Path(out_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    todo = []
    for t, s, n in cells(cfg):
        d = out / "cells" / _cell_name(t, s, n)
        if not (d / "done").exists():
            todo.append((t, s, n, cfg, str(d)))
    jobs = resolve_jobs(jobs)
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for f in [pool.submit(run_cell, *args) for args in todo]:
                f.result()
    else:
        for args in todo:
            run_cell(*args)
    return merge(cfg, out)


def merge(cfg: ExperimentConfig, out: Path) -> "Report":
    run_rows, cell_rows = [], []
    for t, s, n in cells(cfg):
        d = out / "cells" / _cell_name(t, s, n)
        run_rows += list(csv.DictReader((d / "runs.csv").open(newline="")))
        cell_rows += list(csv.DictReader((d / "cell.csv").open(newline="")))
    (out / "runs.csv").write_text(_rows_csv(run_rows, RUN_FIELDS))
    (out / "cells.csv").write_text(_rows_csv(cell_rows, CELL_FIELDS))
    report = build_report(run_rows, provenance={"config": cfg.digest(),
                                                "sample_seeds": " ".join(map(str, cfg.sample_seeds)),
                                                "net_seeds": " ".join(map(str, cfg.net_seeds))})
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.txt").write_text(report.to_table())
    return report


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    rows: list  # per-task aggregate dicts
    provenance: dict = field(default_factory=dict)

    HEADER = ["task", "heuristic", "runs", "solved", "coverage", "expanded_geo", "expanded_mean", "plan_cost_mean"]

    def task_row(self, task: str) -> dict:
        for r in self.rows:
            if r["task"] == task:
                return r
        raise KeyError(task)

    @property
    def mean_coverage(self) -> float:
        task_rows = [r for r in self.rows if r["task"] != "MEAN"]
        return float(np.mean([r["coverage"] for r in task_rows])) if task_rows else math.nan

    def to_csv(self) -> str:
        lines = [f"# {k}={v}" for k, v in self.provenance.items()]
        lines.append("# MEAN coverage is the unweighted mean over tasks; expansion means use solved runs only")
        body = _rows_csv([{k: _fmt(r[k]) for k in self.HEADER} for r in self.rows], self.HEADER)
        return "\n".join(lines) + "\n" + body

    def to_table(self) -> str:
        widths = [max(len(h), 14) for h in self.HEADER]
        out = ["  ".join(h.ljust(w) for h, w in zip(self.HEADER, widths))]
        for r in self.rows:
            cells_ = []
            for h, w in zip(self.HEADER, widths):
                v = r[h]
                cells_.append((f"{v:.2f}" if isinstance(v, float) else str(v)).ljust(w))
            out.append("  ".join(cells_))
        return "\n".join(out) + "\n"


def build_report(run_rows: list[dict], common_solved: bool = False, provenance: Optional[dict] = None) -> Report:
    """Aggregate per-run rows by (task, heuristic).

    With ``common_solved`` the expansion means use only initial states solved
    in every (heuristic, sample seed, net seed) group of that task.
    """
    groups: dict = {}
    for r in run_rows:
        groups.setdefault((r["task"], r["heuristic"]), []).append(r)
    keep = None
    if common_solved:
        keep = {}
        by_task: dict = {}
        for r in run_rows:
            by_task.setdefault(r["task"], {}).setdefault((r["heuristic"], r["sample_seed"], r["net_seed"]),
                                                         set())
            if r["status"] == "SOLVED":
                by_task[r["task"]][(r["heuristic"], r["sample_seed"], r["net_seed"])].add(r["init"])
        for t, sets in by_task.items():
            keep[t] = set.intersection(*sets.values()) if sets else set()
    rows = []
    for (t, h), rs in sorted(groups.items()):
        solved = [r for r in rs if r["status"] == "SOLVED"]
        used = solved if keep is None else [r for r in solved if r["init"] in keep[t]]
        exp = [int(r["expanded"]) for r in used]
        costs = [int(r["plan_cost"]) for r in used]
        rows.append({"task": t, "heuristic": h, "runs": len(rs), "solved": len(solved),
                     "coverage": len(solved) / len(rs),
                     "expanded_geo": geometric_mean(exp) if exp else math.nan,
                     "expanded_mean": float(np.mean(exp)) if exp else math.nan,
                     "plan_cost_mean": float(np.mean(costs)) if costs else math.nan})
    if rows:
        geo = [r["expanded_geo"] for r in rows if not math.isnan(r["expanded_geo"])]
        rows.append({"task": "MEAN", "heuristic": "", "runs": sum(r["runs"] for r in rows),
                     "solved": sum(r["solved"] for r in rows),
                     "coverage": float(np.mean([r["coverage"] for r in rows])),
                     "expanded_geo": geometric_mean(geo) if geo else math.nan,
                     "expanded_mean": float(np.mean([r["expanded_mean"] for r in rows
                                                     if not math.isnan(r["expanded_mean"])] or [math.nan])),
                     "plan_cost_mean": math.nan})
    return Report(rows, provenance or {})


def read_runs(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
