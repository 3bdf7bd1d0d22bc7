"""
Small softmax classifiers over a flat parameter vector, trained with
mini-batch momentum SGD.

Parameters of every layer live in one 1-D array so that clients can exchange,
average and compare models directly. Layer ``i`` occupies a ``W`` block of
shape ``(fan_in, fan_out)`` followed by a bias block of length ``fan_out``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .data import Dataset


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class ModelSpec:
    kind: Literal["linear", "mlp"]
    input_dim: int
    num_classes: int
    hidden_dims: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "linear" and self.hidden_dims:
            raise ValueError("linear models take no hidden layers")
        if self.kind == "mlp" and not self.hidden_dims:
            raise ValueError("mlp models need at least one hidden layer")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(sizes[:-1], sizes[1:]))

    @property
    def num_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims)

    def unpack(self, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views ``(W, b)`` into ``w`` for each layer."""
        if w.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got {w.shape}")
        out, pos = [], 0
        for i, o in self.layer_dims:
            W = w[pos : pos + i * o].reshape(i, o)
            pos += i * o
            b = w[pos : pos + o]
            pos += o
            out.append((W, b))
        return out


def init_params(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` for weights and biases."""
    w = np.empty(spec.num_params)
    pos = 0
    for i, o in spec.layer_dims:
        bound = 1.0 / np.sqrt(i)
        w[pos : pos + i * o + o] = rng.uniform(-bound, bound, size=i * o + o)
        pos += i * o + o
    return w


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def softmax(z: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(z))


def _forward(spec: ModelSpec, w: np.ndarray, x: np.ndarray):
    layers = spec.unpack(w)
    acts = [x]
    h = x
    for idx, (W, b) in enumerate(layers):
        z = h @ W + b
        if idx < len(layers) - 1:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            h = z
    return h, acts, layers


def logits(spec: ModelSpec, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    return _forward(spec, w, x)[0]


def loss_and_grad(spec: ModelSpec, w: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy on ``(x, y)`` and its gradient w.r.t. ``w``."""
    z, acts, layers = _forward(spec, w, x)
    logp = log_softmax(z)
    m = x.shape[0]
    loss = -float(logp[np.arange(m), y].mean())

    grad = np.empty_like(w)
    delta = np.exp(logp)
    delta[np.arange(m), y] -= 1.0
    delta /= m
    # walk layers backwards; offsets are recomputed from the end
    pos = w.size
    for idx in range(len(layers) - 1, -1, -1):
        W, _ = layers[idx]
        i, o = W.shape
        h = acts[idx]
        grad[pos - o : pos] = delta.sum(axis=0)
        pos -= o
        grad[pos - i * o : pos] = (h.T @ delta).ravel()
        pos -= i * o
        if idx > 0:
            delta = (delta @ W.T) * (h > 0)
    return loss, grad


def evaluate(spec: ModelSpec, w: np.ndarray, data: Dataset) -> tuple[float, float]:
    """Mean cross-entropy and top-1 accuracy (argmax ties go to the lower class)."""
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    z = logits(spec, w, data.features)
    logp = log_softmax(z)
    loss = -float(logp[np.arange(len(data)), data.labels].mean())
    acc = float(np.mean(np.argmax(z, axis=1) == data.labels))
    return loss, acc


def mean_loss(spec: ModelSpec, w: np.ndarray, data: Dataset) -> float:
    return evaluate(spec, w, data)[0]


@dataclass
class OptimizerState:
    """Per-client SGD state. ``velocity`` persists across rounds."""

    lr: float
    momentum_coef: float
    velocity: np.ndarray
    decay: float = 1.0

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        if not 0.0 <= self.momentum_coef < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    @classmethod
    def fresh(cls, num_params: int, lr: float = 0.08, momentum: float = 0.9, decay: float = 0.99):
        return cls(lr=lr, momentum_coef=momentum, velocity=np.zeros(num_params), decay=decay)

    def end_round(self) -> None:
        self.lr *= self.decay


def local_train(
    model: np.ndarray,
    spec: ModelSpec,
    data: Dataset,
    epochs: int,
    batch_size: int,
    opt: OptimizerState,
    seed,
) -> np.ndarray:
    """``epochs`` passes of shuffled mini-batch momentum SGD; returns new weights.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts. The
    optimizer's velocity is updated in place.
    """
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    w = model.astype(float, copy=True)
    v = opt.velocity
    m = len(data)
    bs = min(batch_size, m)
    for _ in range(epochs):
        order = rng.permutation(m)
        for start in range(0, m, bs):
            idx = order[start : start + bs]
            loss, g = loss_and_grad(spec, w, data.features[idx], data.labels[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became {loss} during local training (lr={opt.lr:g})")
            v *= opt.momentum_coef
            v += g
            w -= opt.lr * v
    return w
