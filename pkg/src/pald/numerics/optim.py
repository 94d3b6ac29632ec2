"""AdamW with decoupled weight decay, plus the warmup-cosine LR schedule."""

from __future__ import annotations

import math

import numpy as np

from ..errors import NumericalError
from .tensor import Tensor


class AdamW:
    """Decoupled-weight-decay Adam.

    Decay is applied to the parameter directly (p *= 1 - lr*wd), never through
    the moment estimates, so weight_decay=0 reduces to plain Adam exactly.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = {k: p for k, p in params.items() if p.requires_grad}
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self, grads: dict[str, np.ndarray], lr: float | None = None) -> None:
        lr = self.lr if lr is None else float(lr)
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for k, p in self.params.items():
            g = grads[k]
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape mismatch for {k}: {g.shape} vs {p.data.shape}")
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for {k}")
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            if self.weight_decay != 0.0:
                p.data *= 1.0 - lr * self.weight_decay
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def warmup_cosine_lr(step: int, base_lr: float, total_steps: int, warmup_steps: int) -> float:
    """Linear warmup to base_lr, then cosine decay to 0 at total_steps."""
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * (step + 1) / warmup_steps
    span = max(total_steps - warmup_steps, 1)
    frac = min(max(step - warmup_steps, 0) / span, 1.0)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * frac))
