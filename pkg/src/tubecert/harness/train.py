"""Mini-batch cross-entropy training of dense networks (numpy backprop)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from tubecert import diffnet
from tubecert.diffnet import ActivationKind, Network
from tubecert.errors import ConfigError, TrainingError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelSpec:
    hidden: tuple = (32, 32)
    activation: str = "tanh"


@dataclass(frozen=True)
class TrainerSpec:
    optimizer: str = "adam"
    epochs: int = 200
    batch_size: int = 128
    lr: float = 1e-3
    momentum: float = 0.9
    seed: int = 0


@dataclass
class TrainReport:
    net: Network
    train_accuracy: float
    test_accuracy: float | None
    losses: list = field(default_factory=list)


def _act(kind, z):
    if kind is ActivationKind.TANH:
        return np.tanh(z)
    if kind is ActivationKind.SOFTPLUS:
        return np.logaddexp(0.0, z)
    if kind is ActivationKind.RELU:
        return np.maximum(z, 0.0)
    return z


def _act_deriv(kind, z, a):
    if kind is ActivationKind.TANH:
        return 1.0 - a * a
    if kind is ActivationKind.SOFTPLUS:
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if kind is ActivationKind.RELU:
        return (z > 0).astype(np.float64)
    return np.ones_like(z)


def init_params(sizes, rng):
    """Glorot-uniform weights, zero biases."""
    params = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (n_in + n_out))
        params.append([rng.uniform(-lim, lim, size=(n_out, n_in)), np.zeros(n_out)])
    return params


def _loss_and_grads(params, acts, X, y0):
    """Mean softmax cross-entropy and parameter gradients for a batch (rows = samples)."""
    zs, as_ = [], [X]
    a = X
    for (W, b), kind in zip(params, acts):
        z = a @ W.T + b
        a = _act(kind, z)
        zs.append(z)
        as_.append(a)
    logits = as_[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    m = X.shape[0]
    loss = -logp[np.arange(m), y0].mean()
    g = np.exp(logp)
    g[np.arange(m), y0] -= 1.0
    g /= m
    grads = [None] * len(params)
    for k in range(len(params) - 1, -1, -1):
        g = g * _act_deriv(acts[k], zs[k], as_[k + 1])
        grads[k] = [g.T @ as_[k], g.sum(axis=0)]
        if k:
            g = g @ params[k][0]
    return loss, grads


def accuracy(net: Network, X, y) -> float:
    if len(y) == 0:
        return float("nan")
    pred = np.array([diffnet.predicted_class(net, x) for x in X])
    return float(np.mean(pred == y))


def train(model: ModelSpec, X, y, trainer: TrainerSpec = TrainerSpec(), X_test=None, y_test=None,
          n_classes: int | None = None) -> TrainReport:
    """Train a classifier on labels ``1..C``; deterministic for a fixed seed."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    C = int(n_classes or y.max())
    if y.min() < 1 or y.max() > C:
        raise ConfigError("labels must be in 1..C")
    act = ActivationKind(model.activation)
    sizes = [X.shape[1], *model.hidden, C]
    acts = [act] * len(model.hidden) + [None]
    rng = np.random.default_rng(trainer.seed)
    params = init_params(sizes, rng)
    state = [[np.zeros_like(p) for p in layer] for layer in params]
    state2 = [[np.zeros_like(p) for p in layer] for layer in params]
    step = 0
    losses = []
    y0 = y - 1
    for epoch in range(trainer.epochs):
        perm = rng.permutation(X.shape[0])
        total = 0.0
        for start in range(0, X.shape[0], trainer.batch_size):
            idx = perm[start:start + trainer.batch_size]
            loss, grads = _loss_and_grads(params, acts, X[idx], y0[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"loss became non-finite in epoch {epoch}")
            total += loss * idx.shape[0]
            step += 1
            for k, layer in enumerate(params):
                for i in range(2):
                    g = grads[k][i]
                    if trainer.optimizer == "adam":
                        m = state[k][i] = 0.9 * state[k][i] + 0.1 * g
                        v = state2[k][i] = 0.999 * state2[k][i] + 0.001 * g * g
                        mh = m / (1 - 0.9 ** step)
                        vh = v / (1 - 0.999 ** step)
                        layer[i] = layer[i] - trainer.lr * mh / (np.sqrt(vh) + 1e-8)
                    elif trainer.optimizer == "sgd":
                        vel = state[k][i] = trainer.momentum * state[k][i] - trainer.lr * g
                        layer[i] = layer[i] + vel
                    else:
                        raise ConfigError(f"unknown optimizer {trainer.optimizer!r}")
        losses.append(total / X.shape[0])
    net = Network.from_arrays([p[0] for p in params], [p[1] for p in params], acts)
    train_acc = accuracy(net, X, y)
    test_acc = accuracy(net, X_test, y_test) if X_test is not None else None
    log.info("trained %s: loss %.4f train acc %.4f test acc %s", sizes, losses[-1], train_acc, test_acc)
    return TrainReport(net, train_acc, test_acc, losses)
