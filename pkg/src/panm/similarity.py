"""Pair-wise client similarity: update-direction cosines and reciprocal loss."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .theory import ConfigurationError

LOSS_FLOOR = 1e-8
_NORM_EPS = 1e-12


class EvaluationError(RuntimeError):
    """A loss oracle returned a non-finite value."""


@dataclass(frozen=True)
class TrajectorySnapshot:
    """Shared initial model, model before this round's training, model after."""

    w0: np.ndarray
    w_prev: np.ndarray
    w_cur: np.ndarray

    def __post_init__(self) -> None:
        if not (self.w0.shape == self.w_prev.shape == self.w_cur.shape):
            raise ValueError("trajectory vectors must share one dimension")

    @property
    def last_update(self) -> np.ndarray:
        return self.w_cur - self.w_prev

    @property
    def accumulated_update(self) -> np.ndarray:
        return self.w_cur - self.w0


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between ``u`` and ``v``; 0 if either is ~zero."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < _NORM_EPS or nv < _NORM_EPS:
        return 0.0
    c = float(np.dot(u, v) / (nu * nv))
    return min(1.0, max(-1.0, c))


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")


def grad_similarity(a: TrajectorySnapshot, b: TrajectorySnapshot, alpha: float = 0.5) -> float:
    """Blend of last-round-update cosine and accumulated-update cosine.

    ``alpha`` weights the last-round term; ``1 - alpha`` the accumulated term.
    """
    _check_alpha(alpha)
    c1 = cosine(a.last_update, b.last_update)
    c2 = cosine(a.accumulated_update, b.accumulated_update)
    return alpha * c1 + (1.0 - alpha) * c2


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms < _NORM_EPS, 1.0, norms)
    return np.where(norms < _NORM_EPS, 0.0, x / safe)


def pairwise_grad_similarity(
    w0: np.ndarray, w_prev: np.ndarray, w_cur: np.ndarray, alpha: float = 0.5
) -> np.ndarray:
    """All-pairs :func:`grad_similarity` for stacked client models (rows)."""
    _check_alpha(alpha)
    g = _unit_rows(w_cur - w_prev)
    h = _unit_rows(w_cur - w0[None, :])
    return np.clip(alpha * (g @ g.T) + (1.0 - alpha) * (h @ h.T), -1.0, 1.0)


def loss_similarity(model: np.ndarray, evaluator: Callable[[np.ndarray], float]) -> float:
    """Reciprocal of the owner's local loss on a peer's model."""
    loss = float(evaluator(model))
    if not math.isfinite(loss):
        raise EvaluationError(f"non-finite loss {loss!r} while scoring a peer model")
    return 1.0 / max(loss, LOSS_FLOOR)
