import math

import pytest

from samplan.domains import load_bundled
from samplan.experiment import (ExperimentConfig, InitialStateError, build_report, eval_estimates,
                                eval_heuristic_over_fss, format_state_file, gen_initial_states, geometric_mean,
                                parse_state_file, read_runs, run_experiment, sample_budget)
from samplan.sampler import Sample
from samplan.search import GoalCountHeuristic, PerfectHeuristic
from samplan.statespace import enumerate_forward
from samplan.transition import satisfies_goal


def test_initial_states_walk_zero(toy3):
    with pytest.raises(InitialStateError):
        gen_initial_states(toy3, 2, 0, seed=0)


def test_initial_states_toy3_one_step(toy3):
    # only (a0,b1) is a non-goal one-step neighbour of s0
    assert gen_initial_states(toy3, 1, 1, seed=0) == [(0, 1)]
    with pytest.raises(InitialStateError):
        gen_initial_states(toy3, 2, 1, seed=0)


def test_initial_states_distinct_non_goal():
    task = load_bundled("blocks-5")
    states = gen_initial_states(task, 30, 50, seed=1)
    assert len(set(states)) == 30
    assert not any(satisfies_goal(s, task.goal) for s in states)
    assert gen_initial_states(task, 30, 50, seed=1) == states


def test_state_file_round_trip(toy3):
    states = [(0, 0), (0, 1), (0, 0)]
    assert parse_state_file(toy3, format_state_file(states)) == states
    with pytest.raises(ValueError):
        parse_state_file(toy3, "0,-1\n")


def test_eval_estimates(toy3):
    sp = enumerate_forward(toy3)
    assert eval_estimates([Sample(s, int(h)) for s, h in zip(sp.states, sp.hstar)], sp) == 0.0
    assert eval_estimates([Sample((0, 0), 3)], sp) == 2.0


def test_eval_heuristic_over_fss(toy3):
    sp = enumerate_forward(toy3)
    assert eval_heuristic_over_fss(PerfectHeuristic(sp), sp) == 0.0
    assert eval_heuristic_over_fss(GoalCountHeuristic(toy3), sp) == 0.0


def test_geometric_mean():
    assert geometric_mean([1, 100]) == pytest.approx(10)
    assert geometric_mean([7.5] * 9) == pytest.approx(7.5)
    assert geometric_mean([2, 8, 4]) == pytest.approx(geometric_mean([8, 4, 2]))
    with pytest.raises(ValueError):
        geometric_mean([0, 3])
    assert math.isnan(geometric_mean([]))


def test_budget_rules(toy3):
    sp = enumerate_forward(load_bundled("blocks-5"))
    task = load_bundled("blocks-5")
    assert sample_budget("fixed:123", task, None) == 123
    assert sample_budget("fraction:0.01", task, sp) == 9  # round(8.66)
    assert sample_budget("per-variable:16000000", task, None) == 16000000 // 11
    with pytest.raises(ValueError):
        sample_budget("fraction:0.1", task, None)


def test_config_text_round_trip():
    cfg = ExperimentConfig(tasks=["toy3", "blocks-4"], sample_seeds=[1, 2], net_seeds=[3], sui=False,
                           max_epochs=5)
    again = ExperimentConfig.from_text(cfg.to_text())
    assert again == cfg and again.digest() == cfg.digest()


def test_config_errors():
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("bogus = 1\n")
    with pytest.raises(ValueError):
        ExperimentConfig(sample_seeds=[])
    with pytest.raises(ValueError):
        ExperimentConfig(budget="half")


def toy_config(tmp_path, **kw):
    init = tmp_path / "init.txt"
    init.write_text(format_state_file([(0, 0), (0, 1), (0, 0), (0, 1), (0, 0)]))
    base = dict(tasks=["toy3"], heuristic="blind", sample_seeds=[0, 1], net_seeds=[0, 1], initial_states=str(init))
    base.update(kw)
    return ExperimentConfig(**base)


def test_toy3_blind_experiment(tmp_path):
    report = run_experiment(toy_config(tmp_path), tmp_path / "out")
    rows = read_runs(tmp_path / "out" / "runs.csv")
    assert len(rows) == 20
    assert all(r["status"] == "SOLVED" and r["valid"] == "1" for r in rows)
    assert report.task_row("toy3")["coverage"] == 1.0


def test_report_recomputes_from_csv(tmp_path):
    report = run_experiment(toy_config(tmp_path), tmp_path / "out")
    again = build_report(read_runs(tmp_path / "out" / "runs.csv"), provenance=report.provenance)
    assert again.to_csv() == report.to_csv()


def test_resume_changes_nothing(tmp_path):
    cfg = toy_config(tmp_path)
    out = tmp_path / "out"
    run_experiment(cfg, out)
    before = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
    run_experiment(cfg, out)
    after = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
    assert before == after


def test_learned_cell_small(tmp_path):
    cfg = ExperimentConfig(tasks=["blocks-4"], heuristic="learned", algorithm="fsm", budget="fixed:200",
                           sample_seeds=[0], net_seeds=[0], initial_count=5, walk_length=20, max_epochs=5)
    report = run_experiment(cfg, tmp_path / "out")
    cells = read_runs(tmp_path / "out" / "cells.csv")
    assert cells[0]["error"] == "" and int(cells[0]["samples"]) == 200
    assert (tmp_path / "out" / "cells" / "blocks-4__s0__n0" / "model.txt").exists()
    assert report.task_row("blocks-4")["runs"] == 5


def test_failing_cell_is_recorded(tmp_path):
    cfg = ExperimentConfig(tasks=["no-such-task.sas"], heuristic="blind", initial_count=1)
    report = run_experiment(cfg, tmp_path / "out")
    rows = read_runs(tmp_path / "out" / "runs.csv")
    assert rows[0]["status"] == "ERROR" and "FileNotFoundError" in rows[0]["error"]
    assert report.rows[0]["coverage"] == 0.0


def test_common_solved_filter():
    rows = [
        {"task": "t", "heuristic": "a", "sample_seed": "0", "net_seed": "0", "init": "0", "status": "SOLVED",
         "expanded": "10", "plan_cost": "3"},
        {"task": "t", "heuristic": "a", "sample_seed": "0", "net_seed": "0", "init": "1", "status": "SOLVED",
         "expanded": "1000", "plan_cost": "3"},
        {"task": "t", "heuristic": "b", "sample_seed": "0", "net_seed": "0", "init": "0", "status": "SOLVED",
         "expanded": "40", "plan_cost": "3"},
        {"task": "t", "heuristic": "b", "sample_seed": "0", "net_seed": "0", "init": "1", "status": "TIMEOUT",
         "expanded": "", "plan_cost": ""},
    ]
    plain = build_report(rows)
    common = build_report(rows, common_solved=True)
    a_plain = next(r for r in plain.rows if r["heuristic"] == "a")
    a_common = next(r for r in common.rows if r["heuristic"] == "a")
    assert a_plain["expanded_geo"] == pytest.approx(100)
    assert a_common["expanded_geo"] == pytest.approx(10)
    assert next(r for r in common.rows if r["heuristic"] == "b")["coverage"] == 0.5


def test_jobs_env_override(monkeypatch):
    from samplan.experiment import resolve_jobs

    monkeypatch.setenv("SAMPLAN_JOBS", "3")
    assert resolve_jobs(1) == 3
    monkeypatch.delenv("SAMPLAN_JOBS")
    assert resolve_jobs(2) == 2
