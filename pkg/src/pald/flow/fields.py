"""Velocity fields: the duck type used by the ODE/density machinery.

A field maps a batch of states and a scalar time to velocities:
``field(x [N, d], t) -> [N, d]``.  For divergence work it also exposes
``jacobian(x, t) -> [N, d, d]`` and ``jvp(x, t, v) -> [N, d]``.
"""

from __future__ import annotations

import numpy as np


class LinearField:
    """v(x, t) = coef(t) * x @ A^T; closed-form Jacobian coef(t) * A."""

    def __init__(self, a: np.ndarray, coef=None):
        self.a = np.asarray(a, dtype=np.float64)
        self.coef = coef if coef is not None else (lambda t: 1.0)

    def __call__(self, x, t):
        return self.coef(t) * (x @ self.a.T)

    def jacobian(self, x, t):
        n = np.atleast_2d(x).shape[0]
        return np.broadcast_to(self.coef(t) * self.a, (n, *self.a.shape))

    def jvp(self, x, t, v):
        return self.coef(t) * (v @ self.a.T)


class ConstantField:
    """v(x, t) = c; zero Jacobian."""

    def __init__(self, c: np.ndarray):
        self.c = np.asarray(c, dtype=np.float64)

    def __call__(self, x, t):
        return np.broadcast_to(self.c, np.atleast_2d(x).shape).copy()

    def jacobian(self, x, t):
        n, d = np.atleast_2d(x).shape
        return np.zeros((n, d, d))

    def jvp(self, x, t, v):
        return np.zeros_like(np.atleast_2d(v), dtype=np.float64)


class GaussianMarginalField(LinearField):
    """The straight-interpolation field between two independent unit Gaussians.

    Marginals stay N(0, s(t)^2 I) with s(t)^2 = (1-t)^2 + t^2, so the exact
    log density is available at every time: the master oracle for the
    change-of-variables integrator.
    """

    def __init__(self, dim: int):
        super().__init__(np.eye(dim), coef=self.rate)
        self.dim = dim

    @staticmethod
    def rate(t: float) -> float:
        return (2.0 * t - 1.0) / (2.0 * t * t - 2.0 * t + 1.0)

    @staticmethod
    def variance(t: float) -> float:
        return 2.0 * t * t - 2.0 * t + 1.0

    def exact_log_density(self, x: np.ndarray, t: float) -> np.ndarray:
        x = np.atleast_2d(x)
        s2 = self.variance(t)
        return -0.5 * (self.dim * np.log(2.0 * np.pi * s2)
                       + np.sum(x * x, axis=1) / s2)
