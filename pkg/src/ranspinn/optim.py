"""Adam with a step-decayed learning rate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kw)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """One bias-corrected Adam update; returns the new parameter vector.

    A non-finite gradient raises before ``state`` is touched, so a rejected
    step leaves the moments and the step counter as they were.
    """
    if params.shape != grad.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NonFiniteGradientError(f"non-finite gradient entry {bad}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m = b1 * state.m + (1.0 - b1) * grad
    state.v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1 ** state.step)
    v_hat = state.v / (1.0 - b2 ** state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class LrSchedule:
    lr0: float = 1e-3
    decay: float = 0.95
    interval: int = 1000

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must lie in (0, 1]")
        if self.interval < 1:
            raise ValueError("decay interval must be >= 1")

    def __call__(self, step: int) -> float:
        return lr_schedule(step, self.lr0, self.decay, self.interval)


def lr_schedule(step: int, lr0: float = 1e-3, decay: float = 0.95, interval: int = 1000) -> float:
    """``lr0 * decay ** floor(step / interval)``."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return lr0 * decay ** (step // interval)
