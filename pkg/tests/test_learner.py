import numpy as np
import pytest

from samplan.domains import load_bundled
from samplan.learner import (LAYERS, BornDead, TrainConfig, ensure_not_born_dead, fit, format_model, init_model,
                             is_born_dead, layer_shapes, loss_and_grads, parse_model, predict, predict_batch,
                             save_model, load_model, train)
from samplan.sas import encode_states
from samplan.statespace import enumerate_forward


def test_init_deterministic_and_shapes():
    a, b = init_model(4, 1), init_model(4, 1)
    for n in LAYERS:
        assert np.array_equal(a.weights[n], b.weights[n])
        assert not a.biases[n].any()
    assert a.weights["hidden1"].shape == (250, 4)
    assert {n: a.weights[n].shape for n in LAYERS} == layer_shapes(4)


def test_he_variance():
    m = init_model(200, 0)
    w = m.weights["hidden2"]
    assert abs(w.var() - 2 / 250) < 0.0005
    assert abs(m.weights["hidden1"].var() - 2 / 200) < 0.001


def test_init_rejects_zero_dim():
    with pytest.raises(ValueError):
        init_model(0, 0)


def test_output_non_negative():
    m = init_model(6, 3)
    x = np.random.default_rng(0).normal(size=(500, 6)) * 10
    assert (predict_batch(m, x) >= 0).all()


def test_dimension_mismatch():
    m = init_model(4, 0)
    with pytest.raises(ValueError):
        predict(m, np.zeros(5))
    with pytest.raises(ValueError):
        predict_batch(m, np.zeros((2, 3)))


def flat_params(m):
    return [p for n in LAYERS for p in (m.weights[n], m.biases[n])]


def flat_grads(g):
    return [a for n in LAYERS for a in g[n]]


def test_gradient_check():
    rng = np.random.default_rng(0)
    m = init_model(5, 7, hidden=12)
    m.biases["output"][:] = 0.5  # keep the output unit active
    for n in LAYERS:
        m.biases[n] += rng.normal(scale=0.1, size=m.biases[n].shape)
    x = rng.normal(size=(8, 5))
    t = rng.uniform(0, 5, size=8)
    _, g = loss_and_grads(m, x, t)
    eps = 1e-5
    num, ana = [], []
    for p, gp in zip(flat_params(m), flat_grads(g)):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            lp = loss_and_grads(m, x, t)[0]
            p[idx] = old - eps
            lm = loss_and_grads(m, x, t)[0]
            p[idx] = old
            num.append((lp - lm) / (2 * eps))
            ana.append(gp[idx])
    num, ana = np.array(num), np.array(ana)
    rel = np.linalg.norm(num - ana) / (np.linalg.norm(num) + np.linalg.norm(ana))
    assert rel <= 1e-4


def test_residual_identity():
    m = init_model(4, 2, hidden=16)
    x = np.random.default_rng(1).uniform(size=(10, 4))
    for n in ("res1", "res2"):
        m.weights[n][:] = 0.0
    from samplan.learner import _forward

    _, (x_, z1, a1, z2, a2, z3, a3, z4, r, z5) = _forward(m, x)
    assert np.array_equal(r, a2)


def toy3_data():
    task = load_bundled("toy3")
    sp = enumerate_forward(task)
    x = encode_states(task, sp.states)
    return np.repeat(x, 3, axis=0), np.repeat(sp.hstar, 3), x, sp.hstar


def test_fit_toy3():
    # 25 copies of each state so the 10 % validation split sees every state
    _, _, xs, hs = toy3_data()
    x, y = np.repeat(xs, 25, axis=0), np.repeat(hs, 25)
    m, rep = fit(x, y, 0, TrainConfig())
    assert rep.stop_reason == "patience"
    assert np.all(np.abs(predict_batch(m, xs) - hs) <= 0.5)


def test_best_so_far_monotone():
    x, y, _, _ = toy3_data()
    _, rep = fit(x, y, 1, TrainConfig(max_epochs=200))
    best = np.minimum.accumulate(rep.val_history)
    assert np.all(np.diff(best) <= 0)
    assert rep.best_val_loss <= min(rep.val_history)


def test_constant_target():
    rng = np.random.default_rng(0)
    x = (rng.uniform(size=(1000, 10)) < 0.5).astype(float)
    y = np.full(1000, 3.0)
    _, rep = fit(x, y, 0, TrainConfig(max_epochs=200))
    assert rep.final_train_loss <= 0.01


def test_determinism():
    x, y, _, _ = toy3_data()
    cfg = TrainConfig(max_epochs=30)
    m1, r1 = fit(x, y, 5, cfg)
    m2, r2 = fit(x, y, 5, cfg)
    assert r1.val_history == r2.val_history and r1.train_history == r2.train_history
    assert format_model(m1) == format_model(m2)


def test_loss_decreases_linear():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(300, 6))
    y = x @ np.array([1.0, 2.0, 0.5, 3.0, 1.0, 2.0]) + 1
    m = init_model(6, 0)
    from samplan.learner import mse

    before = mse(m, x, y)
    m2, rep = train(m, x, y, TrainConfig(max_epochs=50))
    assert rep.final_train_loss < before


def test_train_errors():
    m = init_model(2, 0)
    with pytest.raises(ValueError):
        train(m, np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        TrainConfig(train_fraction=1.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_born_dead_detected_and_reseeded():
    x, _, _, _ = toy3_data()
    m = init_model(4, 0)
    m.weights["output"][:] = 0.0
    m.biases["output"][:] = -1e3
    assert is_born_dead(m, x)
    assert (predict_batch(m, x) == 0).all()
    fixed, retries = ensure_not_born_dead(m, x, seed=0)
    assert retries >= 1 and not is_born_dead(fixed, x)


def test_healthy_init_unchanged():
    x, _, _, _ = toy3_data()
    for seed in range(20):
        m = init_model(4, seed)
        if not is_born_dead(m, x):
            out, retries = ensure_not_born_dead(m, x, seed)
            assert out is m and retries == 0
            return
    pytest.fail("no healthy init in 20 seeds")


def test_born_dead_cap():
    x = np.zeros((3, 4))  # all-zero inputs and zero biases always give output 0
    with pytest.raises(BornDead):
        ensure_not_born_dead(init_model(4, 0), x, 0, max_retries=5)


def test_model_file_round_trip(tmp_path):
    m = init_model(7, 11, hidden=20)
    path = tmp_path / "m.txt"
    save_model(m, path)
    back = load_model(path)
    x = np.random.default_rng(0).uniform(size=(5, 7))
    assert np.array_equal(predict_batch(m, x), predict_batch(back, x))
    lines = path.read_text().splitlines()
    assert lines[0] == "samplan-model v1" and lines[1] == "input_dim=7 hidden=20"
    assert lines[2] == "layer hidden1 20 7"


def test_model_file_bad_header():
    with pytest.raises(ValueError):
        parse_model("nope\n")
