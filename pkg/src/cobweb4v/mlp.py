"""One-hidden-layer ReLU network trained with SGD + momentum (numpy only)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Hyper:
    lr: float = 0.00365
    momentum: float = 0.9
    epochs: int = 5
    batch_size: int = 64


PARAMS = ("w1", "b1", "w2", "b2")


@dataclass
class MlpModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    velocity: dict = field(default_factory=dict)

    @classmethod
    def init(cls, n_in: int = 784, n_hidden: int = 128, n_out: int = 10, seed: int = 0) -> "MlpModel":
        rng = np.random.default_rng(seed)
        b_in = np.sqrt(1.0 / n_in)
        b_hid = np.sqrt(1.0 / n_hidden)
        model = cls(
            w1=rng.uniform(-b_in, b_in, (n_in, n_hidden)),
            b1=rng.uniform(-b_in, b_in, n_hidden),
            w2=rng.uniform(-b_hid, b_hid, (n_hidden, n_out)),
            b2=rng.uniform(-b_hid, b_hid, n_out),
        )
        model.velocity = {name: np.zeros_like(getattr(model, name)) for name in PARAMS}
        return model

    def params(self) -> dict:
        return {name: getattr(self, name) for name in PARAMS}

    def copy(self) -> "MlpModel":
        out = MlpModel(*(getattr(self, p).copy() for p in PARAMS))
        out.velocity = {k: v.copy() for k, v in self.velocity.items()}
        return out


def forward(model: MlpModel, x: np.ndarray):
    pre = x @ model.w1 + model.b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ model.w2 + model.b2
    return pre, hidden, logits


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    _, _, logits = forward(model, x)
    return float(-log_softmax(logits)[np.arange(len(y)), y].mean())


def loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy over the batch and its parameter gradients."""
    pre, hidden, logits = forward(model, x)
    logp = log_softmax(logits)
    m = len(y)
    value = float(-logp[np.arange(m), y].mean())
    d_logits = np.exp(logp)
    d_logits[np.arange(m), y] -= 1.0
    d_logits /= m
    d_hidden = d_logits @ model.w2.T
    d_hidden[pre <= 0] = 0.0
    grads = {
        "w2": hidden.T @ d_logits,
        "b2": d_logits.sum(axis=0),
        "w1": x.T @ d_hidden,
        "b1": d_hidden.sum(axis=0),
    }
    return value, grads


def sgd_step(model: MlpModel, grads: dict, lr: float, momentum: float) -> None:
    for name in PARAMS:
        v = model.velocity[name]
        v *= momentum
        v -= lr * grads[name]
        getattr(model, name)[...] += v


def train_on_split(model: MlpModel, x: np.ndarray, y: np.ndarray, hyper: Hyper,
                   seed: int) -> list[float]:
    """Run ``hyper.epochs`` shuffled minibatch passes; returns per-batch losses."""
    if len(y) == 0:
        raise ValueError("empty split")
    rng = np.random.default_rng(seed)
    losses = []
    for _ in range(hyper.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(order), hyper.batch_size):
            batch = order[start:start + hyper.batch_size]
            value, grads = loss_and_grads(model, x[batch], y[batch])
            sgd_step(model, grads, hyper.lr, hyper.momentum)
            losses.append(value)
    return losses


@dataclass
class ReplayBuffer:
    images: np.ndarray
    labels: np.ndarray
    capacity: int = 1000

    @classmethod
    def empty(cls, n_pixels: int = 784, capacity: int = 1000) -> "ReplayBuffer":
        return cls(np.zeros((0, n_pixels)), np.zeros(0, dtype=np.int64), capacity)

    def __len__(self) -> int:
        return len(self.labels)


def train_with_replay(model: MlpModel, buffer: ReplayBuffer, x: np.ndarray, y: np.ndarray,
                      hyper: Hyper, seed: int) -> tuple[MlpModel, ReplayBuffer]:
    """Train on buffer + split, then resample the buffer uniformly from both."""
    pool_x = np.concatenate([buffer.images, x])
    pool_y = np.concatenate([buffer.labels, y])
    rng = np.random.default_rng(seed)
    train_on_split(model, pool_x, pool_y, hyper, int(rng.integers(2**63)))
    keep = min(buffer.capacity, len(pool_y))
    chosen = rng.choice(len(pool_y), size=keep, replace=False)
    return model, ReplayBuffer(pool_x[chosen], pool_y[chosen], buffer.capacity)


def mlp_predict(model: MlpModel, x: np.ndarray):
    """Argmax label for one instance (1-d input) or a batch (2-d)."""
    single = x.ndim == 1
    _, _, logits = forward(model, np.atleast_2d(x))
    labels = logits.argmax(axis=1)
    return int(labels[0]) if single else labels
