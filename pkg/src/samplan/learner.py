"""Residual feed-forward regressor from fact vectors to cost-to-goal estimates.

Architecture (all hidden layers ReLU, He-normal init, zero biases)::

    x -> hidden1 -> hidden2 -> [res1 -> res2] + hidden2 -> output (ReLU)

Training: Adam, MSE, 90/10 split, early stopping on validation loss with the
best-validation parameters returned.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

HIDDEN = 250
LAYERS = ("hidden1", "hidden2", "res1", "res2", "output")
MAGIC = "samplan-model v1"


class BornDead(RuntimeError):
    pass


@dataclass
class Model:
    input_dim: int
    hidden: int
    weights: dict  # name -> (out, in) array
    biases: dict  # name -> (out,) array
    seed: Optional[int] = None

    def copy(self) -> "Model":
        return Model(self.input_dim, self.hidden, {k: v.copy() for k, v in self.weights.items()},
                     {k: v.copy() for k, v in self.biases.items()}, self.seed)

    def params(self) -> list[np.ndarray]:
        out = []
        for name in LAYERS:
            out += [self.weights[name], self.biases[name]]
        return out

    def num_params(self) -> int:
        return sum(p.size for p in self.params())


def layer_shapes(input_dim: int, hidden: int = HIDDEN) -> dict:
    return {"hidden1": (hidden, input_dim), "hidden2": (hidden, hidden), "res1": (hidden, hidden),
            "res2": (hidden, hidden), "output": (1, hidden)}


def init_model(input_dim: int, seed: int, hidden: int = HIDDEN) -> Model:
    """He-normal weights (variance 2/fan_in), zero biases."""
    if input_dim < 1:
        raise ValueError("input_dim must be positive")
    rng = np.random.default_rng(seed)
    weights, biases = {}, {}
    for name, (rows, cols) in layer_shapes(input_dim, hidden).items():
        weights[name] = rng.normal(0.0, math.sqrt(2.0 / cols), size=(rows, cols))
        biases[name] = np.zeros(rows)
    return Model(input_dim, hidden, weights, biases, seed)


def _forward(model: Model, x: np.ndarray):
    W, b = model.weights, model.biases
    z1 = x @ W["hidden1"].T + b["hidden1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ W["hidden2"].T + b["hidden2"]
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ W["res1"].T + b["res1"]
    a3 = np.maximum(z3, 0.0)
    z4 = a3 @ W["res2"].T + b["res2"]
    a4 = np.maximum(z4, 0.0)
    r = a4 + a2
    z5 = r @ W["output"].T + b["output"]
    y = np.maximum(z5, 0.0)[:, 0]
    return y, (x, z1, a1, z2, a2, z3, a3, z4, r, z5)


def predict_batch(model: Model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise ValueError(f"input has {x.shape[1]} features, model expects {model.input_dim}")
    return _forward(model, x)[0]


def predict(model: Model, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise ValueError(f"expected a vector of length {model.input_dim}")
    return float(_forward(model, x[None, :])[0][0])


def loss_and_grads(model: Model, x: np.ndarray, t: np.ndarray):
    """MSE loss and its gradient for every parameter, by backpropagation."""
    y, (x, z1, a1, z2, a2, z3, a3, z4, r, z5) = _forward(model, x)
    W = model.weights
    m = x.shape[0]
    diff = y - t
    loss = float(np.mean(diff * diff))
    dz5 = ((2.0 / m) * diff)[:, None] * (z5 > 0)
    g = {}
    g["output"] = (dz5.T @ r, dz5.sum(axis=0))
    dr = dz5 @ W["output"]
    dz4 = dr * (z4 > 0)
    g["res2"] = (dz4.T @ a3, dz4.sum(axis=0))
    dz3 = (dz4 @ W["res2"]) * (z3 > 0)
    g["res1"] = (dz3.T @ a2, dz3.sum(axis=0))
    da2 = dz3 @ W["res1"] + dr
    dz2 = da2 * (z2 > 0)
    g["hidden2"] = (dz2.T @ a1, dz2.sum(axis=0))
    dz1 = (dz2 @ W["hidden2"]) * (z1 > 0)
    g["hidden1"] = (dz1.T @ x, dz1.sum(axis=0))
    return loss, g


def mse(model: Model, x: np.ndarray, t: np.ndarray) -> float:
    if len(t) == 0:
        return float("nan")
    y = predict_batch(model, x)
    return float(np.mean((y - t) ** 2))


class Adam:
    def __init__(self, model: Model, lr: float = 1e-4, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: (np.zeros_like(model.weights[k]), np.zeros_like(model.biases[k])) for k in LAYERS}
        self.v = {k: (np.zeros_like(model.weights[k]), np.zeros_like(model.biases[k])) for k in LAYERS}

    def step(self, model: Model, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in LAYERS:
            for k, (param, grad) in enumerate(((model.weights[name], grads[name][0]),
                                               (model.biases[name], grads[name][1]))):
                m, v = self.m[name][k], self.v[name][k]
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * grad * grad
                param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 64
    patience: int = 100
    train_fraction: float = 0.9
    max_seconds: float = 1800.0
    max_epochs: Optional[int] = None
    seed: int = 0  # data split and shuffling

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train fraction must lie strictly between 0 and 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


@dataclass
class TrainReport:
    epochs: int
    best_epoch: int
    best_val_loss: float
    final_train_loss: float
    seconds: float
    born_dead_retries: int = 0
    stop_reason: str = ""
    val_history: list = field(default_factory=list, repr=False)
    train_history: list = field(default_factory=list, repr=False)


def split_indices(n: int, train_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_val = max(1, int(round((1.0 - train_fraction) * n)))
    return perm[n_val:], perm[:n_val]


def train(model: Model, x, y, config: TrainConfig = TrainConfig()) -> tuple[Model, TrainReport]:
    """Mini-batch Adam on MSE; stops after ``patience`` epochs without strict
    validation improvement, the wall-time budget or ``max_epochs``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("empty dataset")
    if len(y) < 2:
        raise ValueError("need at least two samples for a train/validation split")
    rng = np.random.default_rng(config.seed)
    tr, va = split_indices(len(y), config.train_fraction, rng)
    xt, yt, xv, yv = x[tr], y[tr], x[va], y[va]
    model = model.copy()
    opt = Adam(model, lr=config.lr)
    best = model.copy()
    best_val = mse(model, xv, yv)
    best_epoch = 0
    val_hist, train_hist = [], []
    start = time.perf_counter()
    epoch = 0
    reason = "patience"
    while True:
        if config.max_epochs is not None and epoch >= config.max_epochs:
            reason = "max_epochs"
            break
        if time.perf_counter() - start >= config.max_seconds:
            reason = "time"
            break
        epoch += 1
        order = rng.permutation(len(yt))
        total = 0.0
        for i in range(0, len(order), config.batch_size):
            idx = order[i:i + config.batch_size]
            loss, grads = loss_and_grads(model, xt[idx], yt[idx])
            opt.step(model, grads)
            total += loss * len(idx)
        train_hist.append(total / len(yt))
        val = mse(model, xv, yv)
        val_hist.append(val)
        if val < best_val:
            best_val, best_epoch = val, epoch
            best = model.copy()
        elif epoch - best_epoch >= config.patience:
            break
    report = TrainReport(epoch, best_epoch, best_val, mse(best, xt, yt), time.perf_counter() - start,
                         stop_reason=reason, val_history=val_hist, train_history=train_hist)
    return best, report


def is_born_dead(model: Model, x) -> bool:
    return not np.any(predict_batch(model, x) > 0.0)


def ensure_not_born_dead(model: Model, x, seed: int, max_retries: int = 1000) -> tuple[Model, int]:
    """Reinitialise with fresh seeds until some training input gets a positive output."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("need at least one training input")
    seeds = np.random.SeedSequence(seed)
    retries = 0
    while is_born_dead(model, x):
        if retries >= max_retries:
            raise BornDead(f"network still born dead after {max_retries} reinitialisations")
        retries += 1
        child = int(seeds.spawn(1)[0].generate_state(1)[0])
        model = init_model(model.input_dim, child, model.hidden)
    return model, retries


def fit(x, y, net_seed: int, config: TrainConfig = TrainConfig(), hidden: int = HIDDEN) -> tuple[Model, TrainReport]:
    """Initialise, reseed if born dead, then train."""
    x = np.asarray(x, dtype=np.float64)
    model = init_model(x.shape[1], net_seed, hidden)
    rng = np.random.default_rng(config.seed)
    tr, _ = split_indices(len(y), config.train_fraction, rng)
    model, retries = ensure_not_born_dead(model, x[tr], net_seed)
    model, report = train(model, x, y, config)
    report.born_dead_retries = retries
    return model, report


# ---------------------------------------------------------------------------
# serialisation


def format_model(model: Model) -> str:
    lines = [MAGIC, f"input_dim={model.input_dim} hidden={model.hidden}"]
    for name in LAYERS:
        w, b = model.weights[name], model.biases[name]
        lines.append(f"layer {name} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(f"{v:.17g}" for v in row))
        lines.append(" ".join(f"{v:.17g}" for v in b))
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> Model:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ValueError("not a samplan model file")
    fields = dict(kv.split("=") for kv in lines[1].split())
    input_dim, hidden = int(fields["input_dim"]), int(fields["hidden"])
    expected = layer_shapes(input_dim, hidden)
    weights, biases = {}, {}
    pos = 2
    for name in LAYERS:
        tag, got, rows, cols = lines[pos].split()
        rows, cols = int(rows), int(cols)
        if tag != "layer" or got != name or (rows, cols) != expected[name]:
            raise ValueError(f"unexpected layer header '{lines[pos]}'")
        pos += 1
        w = np.array([[float(v) for v in lines[pos + r].split()] for r in range(rows)]).reshape(rows, cols)
        pos += rows
        b = np.array([float(v) for v in lines[pos].split()])
        pos += 1
        if b.shape != (rows,):
            raise ValueError(f"layer {name}: bias has {b.size} entries")
        weights[name], biases[name] = w, b
    return Model(input_dim, hidden, weights, biases)


def save_model(model: Model, path) -> None:
    Path(path).write_text(format_model(model))


def load_model(path) -> Model:
    return parse_model(Path(path).read_text())
