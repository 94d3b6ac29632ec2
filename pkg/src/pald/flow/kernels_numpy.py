"""Pure-numpy log-density kernel for the two-hidden-layer velocity net.

Vectorizes the RK4 transport + exact-divergence accumulation over a batch of
states that share one start time but carry per-row conditioning contexts.
This is the fallback twin of the numba kernel in `kernels_numba`; both
implement the identical stage math.
"""

from __future__ import annotations

import math

import numpy as np


def _stage(xs, temb, c, w0, b0, w1, b1, w2, b2, d):
    """Velocity and exact divergence at one RK4 stage point."""
    n = xs.shape[0]
    hdim = w1.shape[0]
    u = np.concatenate([xs, np.broadcast_to(temb, (n, temb.size)), c], axis=1)
    h0 = np.tanh(u @ w0 + b0)
    h1 = np.tanh(h0 @ w1 + b1)
    v = h1 @ w2 + b2
    d0 = 1.0 - h0 * h0
    d1 = 1.0 - h1 * h1
    w0x = w0[:d]  # input rows that see the state
    t1 = w0x[None, :, :] * d0[:, None, :]
    t2 = (t1.reshape(n * d, hdim) @ w1).reshape(n, d, hdim)
    t2 *= d1[:, None, :]
    div = t2.reshape(n, d * hdim) @ np.ascontiguousarray(w2.T).ravel()
    return v, div


def _time_feats(t: float, n_pairs: int) -> np.ndarray:
    freqs = np.pi * (2.0 ** np.arange(n_pairs))
    ang = t * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


def logp_batch(x0, c, t_from, steps, w0, b0, w1, b1, w2, b2, n_pairs, gamma):
    """log p_{t_from}(x0) per row: RK4 from t_from to 1, then the Gaussian base."""
    x = np.array(x0, dtype=np.float64)
    n, d = x.shape
    acc = np.zeros(n)
    h = (1.0 - t_from) / steps
    for i in range(steps):
        t0 = t_from + i * h
        tm0 = _time_feats(t0, n_pairs)
        tm_half = _time_feats(t0 + 0.5 * h, n_pairs)
        tm1 = _time_feats(t0 + h, n_pairs)
        k1, g1 = _stage(x, tm0, c, w0, b0, w1, b1, w2, b2, d)
        k2, g2 = _stage(x + 0.5 * h * k1, tm_half, c, w0, b0, w1, b1, w2, b2, d)
        k3, g3 = _stage(x + 0.5 * h * k2, tm_half, c, w0, b0, w1, b1, w2, b2, d)
        k4, g4 = _stage(x + h * k3, tm1, c, w0, b0, w1, b1, w2, b2, d)
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        acc += (h / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
    base = -0.5 * (d * math.log(2.0 * math.pi * gamma * gamma)
                   + np.sum(x * x, axis=1) / (gamma * gamma))
    return base + acc
