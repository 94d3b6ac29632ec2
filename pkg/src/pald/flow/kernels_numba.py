"""Numba twin of the log-density kernel: per-row loops under prange.

Rows are independent, so parallel execution cannot reorder any reduction and
results are run-to-run deterministic for a given build.  Stage math matches
`kernels_numpy` up to floating-point summation order.  Weights arrive both
row-major and transposed so every inner loop walks contiguous memory.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange


@njit(cache=True, fastmath=True, parallel=True)
def _logp_batch_core(x0, c, t_from, steps, w0, w0t, b0, w1t, b1, w2t, b2,
                     n_pairs, gamma):
    n, d = x0.shape
    hdim = b0.size
    in_dim = w0.shape[0]
    f2 = 2 * n_pairs
    out = np.empty(n)
    h = (1.0 - t_from) / steps
    log_base = d * math.log(2.0 * math.pi * gamma * gamma)
    for row in prange(n):
        x = x0[row].copy()
        u = np.empty(in_dim)
        h0 = np.empty(hdim)
        d0 = np.empty(hdim)
        h1 = np.empty(hdim)
        d1 = np.empty(hdim)
        t1 = np.empty((d, hdim))
        xs = np.empty(d)
        ks = np.empty((4, d))
        crow = c[row]
        for j in range(crow.size):
            u[d + f2 + j] = crow[j]
        acc = 0.0
        for i in range(steps):
            t0 = t_from + i * h
            gsum = 0.0
            for s in range(4):
                if s == 0:
                    ts = t0
                    for j in range(d):
                        xs[j] = x[j]
                elif s == 1:
                    ts = t0 + 0.5 * h
                    for j in range(d):
                        xs[j] = x[j] + 0.5 * h * ks[0, j]
                elif s == 2:
                    ts = t0 + 0.5 * h
                    for j in range(d):
                        xs[j] = x[j] + 0.5 * h * ks[1, j]
                else:
                    ts = t0 + h
                    for j in range(d):
                        xs[j] = x[j] + h * ks[2, j]
                for j in range(d):
                    u[j] = xs[j]
                for k in range(n_pairs):
                    ang = math.pi * (2.0 ** k) * ts
                    u[d + k] = math.sin(ang)
                    u[d + n_pairs + k] = math.cos(ang)
                for p in range(hdim):
                    acc0 = b0[p]
                    for j in range(in_dim):
                        acc0 += u[j] * w0t[p, j]
                    v = math.tanh(acc0)
                    h0[p] = v
                    d0[p] = 1.0 - v * v
                for q in range(hdim):
                    acc1 = b1[q]
                    for p in range(hdim):
                        acc1 += h0[p] * w1t[q, p]
                    v = math.tanh(acc1)
                    h1[q] = v
                    d1[q] = 1.0 - v * v
                for j in range(d):
                    acc2 = b2[j]
                    for q in range(hdim):
                        acc2 += h1[q] * w2t[j, q]
                    ks[s, j] = acc2
                # exact divergence: trace of the tanh-chain Jacobian
                for jj in range(d):
                    for p in range(hdim):
                        t1[jj, p] = w0[jj, p] * d0[p]
                g = 0.0
                for jj in range(d):
                    for q in range(hdim):
                        acc3 = 0.0
                        for p in range(hdim):
                            acc3 += t1[jj, p] * w1t[q, p]
                        g += acc3 * d1[q] * w2t[jj, q]
                gsum += g if (s == 0 or s == 3) else 2.0 * g
            for j in range(d):
                x[j] += (h / 6.0) * (ks[0, j] + 2.0 * ks[1, j] + 2.0 * ks[2, j] + ks[3, j])
            acc += (h / 6.0) * gsum
        norm = 0.0
        for j in range(d):
            norm += x[j] * x[j]
        out[row] = -0.5 * (log_base + norm / (gamma * gamma)) + acc
    return out


def logp_batch(x0, c, t_from, steps, w0, b0, w1, b1, w2, b2, n_pairs, gamma):
    w0 = np.ascontiguousarray(w0)
    return _logp_batch_core(np.ascontiguousarray(x0), np.ascontiguousarray(c),
                            float(t_from), int(steps),
                            w0, np.ascontiguousarray(w0.T),
                            np.ascontiguousarray(b0),
                            np.ascontiguousarray(w1.T),
                            np.ascontiguousarray(b1),
                            np.ascontiguousarray(w2.T),
                            np.ascontiguousarray(b2),
                            int(n_pairs), float(gamma))
