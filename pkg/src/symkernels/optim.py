"""ADAM with a stepwise exponential learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BASE_LR = 0.02
DECAY = 0.97
DECAY_EVERY = 5


class NonFiniteGradientError(FloatingPointError):
    pass


def lr_at_epoch(epoch: int, base_lr=BASE_LR, decay=DECAY, decay_every=DECAY_EVERY) -> float:
    """Learning rate used throughout ``epoch`` (0-based)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return base_lr * decay ** (epoch // decay_every)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    base_lr: float = BASE_LR
    decay: float = DECAY
    decay_every: int = DECAY_EVERY

    @classmethod
    def for_size(cls, n: int, **kwargs) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), **kwargs)

    def lr_at_epoch(self, epoch: int) -> float:
        return lr_at_epoch(epoch, self.base_lr, self.decay, self.decay_every)


def adam_step(params: np.ndarray, grads, state: AdamState, lr: float) -> np.ndarray:
    """One bias-corrected ADAM update, in place on ``params`` and ``state``."""
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError(
            f"length mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise NonFiniteGradientError(
            f"non-finite gradient at {bad.size} positions (first index {bad[0]}, value {grads[bad[0]]}) "
            f"before step {state.t + 1}"
        )
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    params -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params
