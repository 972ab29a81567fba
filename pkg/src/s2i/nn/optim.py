"""Adam optimizer and learning-rate policies."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """Adam with bias correction; lr is supplied per step."""

    def __init__(self, params: list[Tensor], beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.value -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.value.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def triangular_lr(step: int, cycle_steps: int, lr_min: float, lr_max: float) -> float:
    """Cyclical rate: linear ramp lr_min -> lr_max -> lr_min over each cycle."""
    if cycle_steps < 2:
        return lr_max
    pos = step % cycle_steps
    half = cycle_steps / 2.0
    frac = pos / half if pos <= half else (cycle_steps - pos) / half
    return lr_min + (lr_max - lr_min) * frac


def constant_lr(step: int, lr: float) -> float:
    return lr


def global_norm(params: list[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return float(np.sqrt(total))


def clip_grads(params: list[Tensor], max_norm: float) -> float:
    """Scale all grads so the global norm is at most max_norm."""
    norm = global_norm(params)
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale
    return norm
