"""Minimal dense network kernel: logistic probe and one-hidden-layer ReLU MLP.

Both models are trained with plain mini-batch SGD on binary cross-entropy.
Batch order comes from a seeded generator and every reduction has a fixed
shape, so two runs with the same data and config are bitwise identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

from .dataprep import DatasetMatrix
from .errors import DataError, DimensionError, NumericError

BCE_EPS = 1e-7

# Largest/smallest doubles strictly inside (0, 1).
_P_MIN = np.finfo(np.float64).tiny
_P_MAX = 1.0 - np.finfo(np.float64).epsneg


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    l1_lambda: float = 0.0
    # Multiplier on the 1/sqrt(fan_in) uniform init bound.
    init_scale: float = 1.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.l1_lambda < 0:
            raise ValueError(f"l1_lambda must be >= 0, got {self.l1_lambda}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be > 0, got {self.init_scale}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def replace(self, **changes) -> "TrainConfig":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass
class TrainHistory:
    """Loss trace of one training run.

    ``initial_loss`` and ``final_loss`` are full-dataset BCE at the start and
    end; ``epoch_losses`` holds the mean batch loss seen during each epoch
    (computed from logits, so it needs no clipping).
    """

    initial_loss: float
    epoch_losses: list[float] = field(default_factory=list)
    final_loss: float = math.nan


@dataclass(frozen=True, eq=False)
class LinearProbe:
    weights: np.ndarray
    bias: float
    history: TrainHistory | None = field(default=None, compare=False, repr=False)

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_parameters(self) -> int:
        return self.n_features + 1


@dataclass(frozen=True, eq=False)
class MlpModel:
    w1: np.ndarray  # (hidden_width, d)
    b1: np.ndarray  # (hidden_width,)
    w2: np.ndarray  # (hidden_width,)
    b2: float
    history: TrainHistory | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        n = self.w1.shape[0]
        if self.w1.ndim != 2 or self.b1.shape != (n,) or self.w2.shape != (n,):
            raise DimensionError(
                f"inconsistent MLP shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, w2 {self.w2.shape}"
            )
        if n < 1:
            raise DimensionError("hidden_width must be >= 1")

    @property
    def hidden_width(self) -> int:
        return int(self.w1.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.w1.shape[1])

    @property
    def n_parameters(self) -> int:
        n, d = self.w1.shape
        return n * d + 2 * n + 1


Model = Union[LinearProbe, MlpModel]


def sigmoid(z):
    """Logistic function, overflow-free for any finite input."""
    out = np.exp(-np.logaddexp(0.0, -np.asarray(z, dtype=np.float64)))
    return float(out) if out.ndim == 0 else out


def _check_dim(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != d:
        raise DimensionError(f"expected feature dimension {d}, got input of shape {x.shape}")
    return x


def _squash(z):
    p = np.clip(sigmoid(z), _P_MIN, _P_MAX)
    return float(p) if np.ndim(p) == 0 else p


def predict_linear(probe: LinearProbe, x):
    """sigmoid(w.x + b) for one row (returns float) or a matrix of rows."""
    x = _check_dim(x, probe.n_features)
    return _squash(x @ probe.weights + probe.bias)


def predict_mlp(model: MlpModel, x):
    """sigmoid(w2 . relu(W1 x + b1) + b2) for one row or a matrix of rows."""
    x = _check_dim(x, model.n_features)
    hidden = np.maximum(0.0, x @ model.w1.T + model.b1)
    return _squash(hidden @ model.w2 + model.b2)


def predict_proba(model: Model, x):
    if isinstance(model, LinearProbe):
        return predict_linear(model, x)
    if isinstance(model, MlpModel):
        return predict_mlp(model, x)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def predict_labels(model: Model, x, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(predict_proba(model, x)) >= threshold).astype(np.int8)


def accuracy(model: Model, data: DatasetMatrix, threshold: float = 0.5) -> float:
    return float(np.mean(predict_labels(model, data.features, threshold) == data.targets))


def bce_loss(preds, targets) -> float:
    """Mean binary cross-entropy with predictions clipped to [1e-7, 1 - 1e-7]."""
    p = np.asarray(preds, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != y.shape:
        raise DimensionError(f"preds length {p.size} != targets length {y.size}")
    if p.size == 0:
        raise DataError("bce_loss of empty input")
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


# -- training ---------------------------------------------------------------


def _validate_training_data(data: DatasetMatrix) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(data.features, dtype=np.float64)
    y = np.asarray(data.targets)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("cannot train on an empty dataset")
    if X.shape[1] == 0:
        raise DataError("cannot train on a dataset with zero features")
    if y.shape != (X.shape[0],):
        raise DimensionError(f"targets shape {y.shape} does not match {X.shape[0]} rows")
    if not np.isin(y, (0, 1)).all():
        raise DataError("targets must be binary (0/1)")
    return X, y.astype(np.float64)


def _uniform(rng: np.random.Generator, bound: float, shape) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


def init_linear(d: int, rng: np.random.Generator, init_scale: float = 1.0) -> LinearProbe:
    return LinearProbe(_uniform(rng, init_scale / math.sqrt(d), d), 0.0)


def init_mlp(d: int, hidden_width: int, rng: np.random.Generator, init_scale: float = 1.0) -> MlpModel:
    w1 = _uniform(rng, init_scale / math.sqrt(d), (hidden_width, d))
    w2 = _uniform(rng, init_scale / math.sqrt(hidden_width), hidden_width)
    return MlpModel(w1, np.zeros(hidden_width), w2, 0.0)


def _forward_stats(z, yb):
    """Probabilities and summed BCE from logits, without clipping."""
    softplus_neg = np.logaddexp(0.0, -z)  # -log p
    p = np.exp(-softplus_neg)
    # -log(1 - p) = -log p + z
    return p, float(softplus_neg.sum() + (1.0 - yb) @ z)


def _linear_grads(w, b, xb, yb):
    p, loss_sum = _forward_stats(xb @ w + b, yb)
    delta = (p - yb) / xb.shape[0]
    return delta @ xb, float(delta.sum()), loss_sum


def _mlp_grads(w1, b1, w2, b2, xb, yb):
    pre = xb @ w1.T + b1
    hidden = np.maximum(0.0, pre)
    p, loss_sum = _forward_stats(hidden @ w2 + b2, yb)
    delta = (p - yb) / xb.shape[0]
    gw2 = delta @ hidden
    gb2 = float(delta.sum())
    dh = delta[:, None] * w2
    dh *= pre > 0
    gw1 = dh.T @ xb
    gb1 = dh.sum(axis=0)
    return gw1, gb1, gw2, gb2, loss_sum


def _record(history: "TrainHistory", total: float, n: int, epoch: int) -> None:
    loss = total / n
    if not math.isfinite(loss):
        raise NumericError(f"non-finite training loss at epoch {epoch}")
    history.epoch_losses.append(loss)


def train_linear(data: DatasetMatrix, cfg: TrainConfig) -> LinearProbe:
    """Fit the logistic probe with SGD on BCE + l1_lambda * sum|w|."""
    X, y = _validate_training_data(data)
    n, d = X.shape
    rng = np.random.default_rng(cfg.seed)
    probe = init_linear(d, rng, cfg.init_scale)
    w, b = probe.weights.copy(), probe.bias
    lr, lam, bs = cfg.learning_rate, cfg.l1_lambda, cfg.batch_size

    history = TrainHistory(bce_loss(sigmoid(X @ w + b), y))
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        Xs, ys = X[order], y[order]
        total = 0.0
        for start in range(0, n, bs):
            xb, yb = Xs[start:start + bs], ys[start:start + bs]
            gw, gb, loss_sum = _linear_grads(w, b, xb, yb)
            total += loss_sum
            if lam:
                gw += lam * np.sign(w)
            w -= lr * gw
            b -= lr * gb
        _record(history, total, n, epoch)
    history.final_loss = bce_loss(sigmoid(X @ w + b), y)
    if not (np.isfinite(w).all() and math.isfinite(b)):
        raise NumericError("non-finite probe parameters after training")
    return LinearProbe(w, float(b), history)


def train_mlp(data: DatasetMatrix, hidden_width: int, cfg: TrainConfig) -> MlpModel:
    """Fit a one-hidden-layer ReLU network with backprop and SGD."""
    if hidden_width < 1:
        raise ValueError(f"hidden_width must be >= 1, got {hidden_width}")
    X, y = _validate_training_data(data)
    n, d = X.shape
    rng = np.random.default_rng(cfg.seed)
    init = init_mlp(d, hidden_width, rng, cfg.init_scale)
    w1, b1, w2, b2 = init.w1.copy(), init.b1.copy(), init.w2.copy(), init.b2
    lr, lam, bs = cfg.learning_rate, cfg.l1_lambda, cfg.batch_size

    def full_loss():
        return bce_loss(sigmoid(np.maximum(0.0, X @ w1.T + b1) @ w2 + b2), y)

    history = TrainHistory(full_loss())
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        Xs, ys = X[order], y[order]
        total = 0.0
        for start in range(0, n, bs):
            xb, yb = Xs[start:start + bs], ys[start:start + bs]
            gw1, gb1, gw2, gb2, loss_sum = _mlp_grads(w1, b1, w2, b2, xb, yb)
            total += loss_sum
            if lam:
                gw1 += lam * np.sign(w1)
                gw2 += lam * np.sign(w2)
            w1 -= lr * gw1
            b1 -= lr * gb1
            w2 -= lr * gw2
            b2 -= lr * gb2
        _record(history, total, n, epoch)
    history.final_loss = full_loss()
    if not (np.isfinite(w1).all() and np.isfinite(w2).all() and math.isfinite(b2)):
        raise NumericError("non-finite MLP parameters after training")
    return MlpModel(w1, b1, w2, float(b2), history)


# -- gradient verification ----------------------------------------------------


def _flatten(model: Model) -> np.ndarray:
    if isinstance(model, LinearProbe):
        return np.concatenate([model.weights, [model.bias]])
    return np.concatenate([model.w1.ravel(), model.b1, model.w2, [model.b2]])


def _unflatten(theta: np.ndarray, like: Model) -> Model:
    if isinstance(like, LinearProbe):
        return LinearProbe(theta[:-1].copy(), float(theta[-1]))
    n, d = like.w1.shape
    w1 = theta[: n * d].reshape(n, d)
    b1 = theta[n * d: n * d + n]
    w2 = theta[n * d + n: n * d + 2 * n]
    return MlpModel(w1.copy(), b1.copy(), w2.copy(), float(theta[-1]))


def _analytic_grad(model: Model, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    if isinstance(model, LinearProbe):
        gw, gb, _ = _linear_grads(model.weights, model.bias, X, y)
        return np.concatenate([gw, [gb]])
    gw1, gb1, gw2, gb2, _ = _mlp_grads(model.w1, model.b1, model.w2, model.b2, X, y)
    return np.concatenate([gw1.ravel(), gb1, gw2, [gb2]])


def check_gradients(
    kind: Literal["linear", "mlp"],
    data: DatasetMatrix,
    epsilon: float = 1e-5,
    hidden_width: int = 8,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central finite differences.

    Parameters are drawn from the training initializer with ``seed``; biases
    are randomized too so their gradients are exercised away from zero.
    """
    X, y = _validate_training_data(data)
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    if kind == "linear":
        model: Model = init_linear(d, rng)
    elif kind == "mlp":
        model = init_mlp(d, hidden_width, rng)
    else:
        raise ValueError(f"kind must be 'linear' or 'mlp', got {kind!r}")
    theta = _flatten(model)
    is_bias = np.zeros(theta.size, dtype=bool)
    is_bias[-1] = True
    if kind == "mlp":
        n = hidden_width
        is_bias[n * d: n * d + n] = True
    theta[is_bias] = rng.uniform(-0.5, 0.5, int(is_bias.sum()))
    model = _unflatten(theta, model)

    analytic = _analytic_grad(model, X, y)
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = epsilon
        up = bce_loss(predict_proba(_unflatten(theta + step, model), X), y)
        down = bce_loss(predict_proba(_unflatten(theta - step, model), X), y)
        numeric[i] = (up - down) / (2 * epsilon)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
