"""Adaptive-moment gradient descent with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class OptimizerState:
    """Per-parameter first/second moment accumulators plus the step count."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def init_state(params: list[Tensor], learning_rate: float, **kw) -> OptimizerState:
    state = OptimizerState(learning_rate=learning_rate, **kw)
    state.m = [np.zeros_like(p.data) for p in params]
    state.v = [np.zeros_like(p.data) for p in params]
    return state


def optimizer_step(
    params: list[Tensor], grads: list[np.ndarray], state: OptimizerState
) -> None:
    """Apply one bias-corrected adaptive-moment update in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state length mismatch")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def clip_global_norm(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


class Adam:
    """Convenience wrapper binding a parameter list to an OptimizerState."""

    def __init__(self, params: list[Tensor], learning_rate: float, **kw):
        self.params = params
        self.state = init_state(params, learning_rate, **kw)

    @property
    def learning_rate(self) -> float:
        return self.state.learning_rate

    @learning_rate.setter
    def learning_rate(self, lr: float) -> None:
        self.state.learning_rate = lr

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, clip_norm: float | None = None) -> None:
        grads = [
            p.grad if p.grad is not None else np.zeros_like(p.data)
            for p in self.params
        ]
        if clip_norm is not None:
            clip_global_norm(grads, clip_norm)
        optimizer_step(self.params, grads, self.state)
