"""Latent noising process, its schedule sampler, and SNR algebra.

The process mixes a latent z toward scaled white noise:

    z' = (1 - t) * z + t * n,    n ~ gamma * N(0, I),   t in [0, 1]

with t drawn from a logit-normal: t = sigmoid(eps), eps ~ N(m, s^2).
For a unit-power latent the mixture's signal-to-noise ratio at time t is
SNR(t) = (1-t)^2 * E[z^2] / (t^2 * gamma^2), a strictly decreasing bijection
between t in (0, 1] and SNR in [0, inf), inverted by t_of_snr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .numerics.rng import spawn_seed

_T_EPS = 1e-15


@dataclass(frozen=True)
class NoiseSchedule:
    """Logit-normal location m, scale s (> 0) and noise std multiplier gamma (> 0)."""

    m: float = -1.0
    s: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("schedule scale s must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class NoisedLatent:
    """Noising result: deterministic function of (z, t, noise_seed)."""

    z_prime: np.ndarray
    t: float
    noise_seed: int


def sample_t(schedule: NoiseSchedule, rng: np.random.Generator, size=None):
    """Draw t = sigmoid(eps), eps ~ N(m, s^2); strictly inside (0, 1)."""
    eps = rng.normal(schedule.m, schedule.s, size=size)
    t = 1.0 / (1.0 + np.exp(-eps))
    t = np.clip(t, _T_EPS, 1.0 - 1e-16)
    return float(t) if size is None else t


def logit_normal_cdf(t, schedule: NoiseSchedule):
    """CDF of the sample_t distribution (normal CDF of the logit)."""
    t = np.asarray(t, dtype=np.float64)
    x = (np.log(t / (1.0 - t)) - schedule.m) / schedule.s
    return ndtr(x)


def draw_noise(shape, gamma: float, noise_seed: int) -> np.ndarray:
    """The n(gamma) draw backing a NoisedLatent; keyed only by noise_seed."""
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(noise_seed)))
    return gamma * gen.standard_normal(shape)


def noise_latents(z: np.ndarray, t: float, gamma: float,
                  rng: np.random.Generator) -> NoisedLatent:
    """Mix z toward fresh noise: z' = (1-t) z + t n, n ~ gamma N(0, I)."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    z = np.asarray(z, dtype=np.float64)
    noise_seed = spawn_seed(rng)
    n = draw_noise(z.shape, gamma, noise_seed)
    z_prime = (1.0 - t) * z + t * n
    return NoisedLatent(z_prime=z_prime, t=float(t), noise_seed=noise_seed)


def snr_of_t(t: float, z_power: float = 1.0, gamma: float = 1.0) -> float:
    """SNR of the time-t mixture; +inf at t=0, 0 at t=1."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    if z_power <= 0:
        raise ValueError("z_power must be positive")
    if t == 0.0:
        return math.inf
    return ((1.0 - t) ** 2) * z_power / (t * t * gamma * gamma)


def t_of_snr(snr: float, z_power: float = 1.0, gamma: float = 1.0) -> float:
    """Inverse of snr_of_t: t = sqrt(P) / (sqrt(P) + gamma*sqrt(snr))."""
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    if z_power <= 0:
        raise ValueError("z_power must be positive")
    if math.isinf(snr):
        return 0.0
    root = math.sqrt(z_power)
    return root / (root + gamma * math.sqrt(snr))


def spectral_snr_profile(signal_psd: np.ndarray, t: float, gamma: float = 1.0,
                         noise_psd_per_bin=1.0) -> np.ndarray:
    """Per-frequency SNR of the time-t mixture.

    SNR(f, t) = (1-t)^2 P(f) / (t^2 gamma^2 U(f)) with U the PSD of a
    unit-variance white noise in the same normalization as P.  The default
    U = 1 assumes the mean-over-bins convention (white noise is flat at its
    variance); pass noise_psd_per_bin = 1/n_bins when P comes from the
    sum-over-bins periodogram in `metrics.psd`.
    """
    p = np.asarray(signal_psd, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("psd values must be nonnegative")
    if not np.any(p > 0):
        raise ValueError("all-zero psd has no SNR profile")
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    u = np.asarray(noise_psd_per_bin, dtype=np.float64)
    return ((1.0 - t) ** 2) * p / (t * t * gamma * gamma * u)
