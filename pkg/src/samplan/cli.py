"""Command-line interface: ``samplan <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path

from . import experiment as ex
from .files import (format_partial_samples, format_training, parse_partial_samples, training_arrays,
                    write_text)
from .learner import TrainConfig, fit, save_model
from .refinery import Completion, add_random_samples, complete_all, run_sampler, sai, stream, sui
from .sampler import Sample, SamplingExhausted, parse_limit
from .sas import ParseError, decode_facts, mean_effect_size, num_facts
from .search import Limits, gbfs, make_heuristic, validate_plan
from .statespace import StateSpaceTooLarge, depth_histogram, dmax, enumerate_forward, mean_hstar

log = logging.getLogger("samplan")


def _task(ref):
    return ex.load_any_task(ref)


def cmd_task_info(a):
    t = _task(a.task)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["task", "variables", "operators", "mutex_groups", "facts", "mean_effect_size", "limit_facts",
                "limit_facts_per_effect"])
    w.writerow([t.name, len(t.variables), len(t.operators), len(t.mutexes), num_facts(t),
                f"{float(mean_effect_size(t)):.4f}", parse_limit(t, "facts").resolved,
                parse_limit(t, "facts-per-effect").resolved])


def cmd_statespace(a):
    t = _task(a.task)
    sp = enumerate_forward(t, a.max_states)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["state_count", "goal_count", "dmax", "mean_hstar", "histogram"])
    w.writerow([len(sp), sp.goal_count, dmax(sp), f"{mean_hstar(sp):.4f}",
                " ".join(f"{k}:{v}" for k, v in depth_histogram(sp).items())])
    if a.out:
        with open(a.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state", "hstar"])
            for s, d in zip(sp.states, sp.hstar):
                w.writerow([",".join(map(str, s)), "inf" if d == float("inf") else int(d)])


def cmd_sample(a):
    t = _task(a.task)
    limit = parse_limit(t, a.limit)
    ss = run_sampler(t, a.algorithm, a.n, limit, a.mutex, a.seed, a.goal_reset, a.p_fsm,
                     rng=stream(a.seed, "sample"))
    write_text(a.out, format_partial_samples(ss))
    print(f"wrote {len(ss)} samples to {a.out}")


def cmd_refine(a):
    t = _task(a.task)
    ss = parse_partial_samples(Path(a.samples).read_text(), t)
    samples = ss.samples
    if a.sai:
        samples = sai(samples)
    if a.sui:
        samples = sui(samples, t)
    oracle = enumerate_forward(t) if a.completion == "fss" else None
    samples, fallbacks, dropped = complete_all(samples, Completion(a.completion), t, oracle,
                                               stream(a.seed, "completion"))
    if a.random_fraction > 0:
        limit = int(ss.meta.get("limit", 0)) or None
        samples = add_random_samples(samples, a.random_fraction, t, stream(a.seed, "random"),
                                     n_total=len(samples), limit=limit)
    if a.sai:
        samples = sai(samples)
    write_text(a.out, format_training(t, samples))
    print(f"wrote {len(samples)} training samples to {a.out} (mutex fallbacks {fallbacks}, dropped {dropped})")


def cmd_train(a):
    x, y = training_arrays(Path(a.data).read_text())
    if len(y) < 10:
        raise SystemExit("error: training needs at least 10 samples")
    cfg = TrainConfig(lr=a.lr, batch_size=a.batch, patience=a.patience, max_seconds=a.max_seconds,
                      max_epochs=a.max_epochs, seed=a.seed)
    model, report = fit(x, y, a.net_seed, cfg)
    save_model(model, a.out)
    print(f"epochs={report.epochs} best_epoch={report.best_epoch} best_val_loss={report.best_val_loss:.6g} "
          f"final_train_loss={report.final_train_loss:.6g} born_dead_retries={report.born_dead_retries} "
          f"seconds={report.seconds:.2f}")


def _starts(t, spec):
    if spec is None or spec == "init":
        return [t.s0]
    if spec.lstrip("-").isdigit():
        sp = enumerate_forward(t)
        return [sp.states[int(spec)]]
    return ex.parse_state_file(t, Path(spec).read_text())


def cmd_search(a):
    t = _task(a.task)
    h = make_heuristic(a.heuristic, t)
    limits = Limits(a.max_seconds, a.max_memory_mb, a.max_expansions)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["init", "status", "plan_cost", "expanded", "generated", "seconds"])
    for i, s in enumerate(_starts(t, a.initial_state)):
        r = gbfs(t, s, h, limits)
        if r.solved and not validate_plan(t, s, r.plan):
            raise SystemExit("error: search returned an invalid plan")
        w.writerow([i, r.status.value, "" if r.plan_cost is None else r.plan_cost, r.expanded, r.generated,
                    f"{r.seconds:.4f}"])


def cmd_eval(a):
    t = _task(a.task)
    sp = enumerate_forward(t, a.max_states)
    if a.samples:
        x, y = training_arrays(Path(a.samples).read_text())
        samples = [Sample(decode_facts(t, row.astype(int)), int(h)) for row, h in zip(x, y)]
        print(f"mean_abs_error={ex.eval_estimates(samples, sp):.4f}")
    else:
        h = make_heuristic(a.heuristic, t, sp)
        print(f"mean_abs_error_fss={ex.eval_heuristic_over_fss(h, sp):.4f}")


def cmd_experiment(a):
    text = Path(a.config).read_text() if a.config else ""
    text += "".join(f"{kv}\n" for kv in a.set or [])
    cfg = ex.ExperimentConfig.from_text(text)
    report = ex.run_experiment(cfg, a.out, a.jobs)
    print(report.to_table(), end="")


def cmd_report(a):
    rows = []
    for p in a.runs:
        rows += ex.read_runs(p)
    report = ex.build_report(rows, common_solved=a.common_solved)
    if a.out:
        write_text(a.out, report.to_csv())
    print(report.to_table(), end="")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="samplan", description="Regression sampling and learned heuristics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("task-info", help="task statistics and regression limits")
    s.add_argument("task")
    s.set_defaults(func=cmd_task_info)

    s = sub.add_parser("statespace", help="enumerate the forward state space with h*")
    s.add_argument("task")
    s.add_argument("--max-states", type=int, default=1_000_000)
    s.add_argument("--out", help="CSV of states and h*")
    s.set_defaults(func=cmd_statespace)

    s = sub.add_parser("sample", help="generate partial-state samples by regression")
    s.add_argument("task")
    s.add_argument("--algorithm", choices=["rw", "bfs", "dfs", "fsm"], default="fsm")
    s.add_argument("-n", "--num-samples", dest="n", type=int, default=1000)
    s.add_argument("--limit", default="facts-per-effect", help="fixed:<L>, facts or facts-per-effect")
    s.add_argument("--pfsm", "--p-fsm", dest="p_fsm", type=float, default=0.10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mutex", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--goal-reset", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("refine", help="SAI/SUI, completion and random samples; writes a training file")
    s.add_argument("task")
    s.add_argument("--samples", required=True)
    s.add_argument("--sai", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--sui", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--completion", choices=[c.value for c in Completion], default="mutex")
    s.add_argument("--random-fraction", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("train", help="train a network on a training file")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--batch", type=int, default=64)
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--patience", type=int, default=100)
    s.add_argument("--max-seconds", type=float, default=1800.0)
    s.add_argument("--max-epochs", type=int)
    s.add_argument("--net-seed", type=int, default=0)
    s.add_argument("--seed", type=int, default=0, help="data split and shuffling seed")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("search", help="GBFS from one or more initial states")
    s.add_argument("task")
    s.add_argument("--heuristic", default="goalcount", help="learned:<model>, goalcount, perfect or blind")
    s.add_argument("--initial-state", help="'init', an index into the state space, or a state file")
    s.add_argument("--max-seconds", type=float, default=300.0)
    s.add_argument("--max-memory-mb", type=float, default=2048.0)
    s.add_argument("--max-expansions", type=int)
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("eval", help="mean |h - h*| of a training file or a heuristic over the state space")
    s.add_argument("task")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--samples")
    g.add_argument("--heuristic")
    s.add_argument("--max-states", type=int, default=1_000_000)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("experiment", help="run a configured experiment")
    s.add_argument("--config")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1, help="parallel cells (SAMPLAN_JOBS overrides)")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("report", help="aggregate per-run CSV files")
    s.add_argument("runs", nargs="+")
    s.add_argument("--common-solved", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    warnings.simplefilter("always", SamplingExhausted)
    try:
        args.func(args)
    except (ParseError, StateSpaceTooLarge, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
