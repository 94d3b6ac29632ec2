"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, autodiff_gradient


def finite_difference_gradients(loss_fn, params: dict[str, Tensor], h: float = 1e-5):
    """Central differences of loss_fn() w.r.t. every parameter component.

    loss_fn must read the live parameter tensors (mutated in place here).
    """
    fd = {}
    for name, p in params.items():
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fplus = float(loss_fn().data)
            flat[i] = orig - h
            fminus = float(loss_fn().data)
            flat[i] = orig
            gflat[i] = (fplus - fminus) / (2.0 * h)
        fd[name] = g
    return fd


def max_relative_error(loss_fn, params: dict[str, Tensor], h: float = 1e-5,
                       floor: float = 1e-6) -> float:
    """Worst |autodiff - fd| / max(|fd|, floor) over all parameter components."""
    loss = loss_fn()
    auto = autodiff_gradient(loss, params)
    fd = finite_difference_gradients(loss_fn, params, h=h)
    worst = 0.0
    for name in params:
        denom = np.maximum(np.abs(fd[name]), floor)
        err = np.abs(auto[name] - fd[name]) / denom
        worst = max(worst, float(err.max()) if err.size else 0.0)
    return worst
