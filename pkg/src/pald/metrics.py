"""Reconstruction and spectral metrics: SI-SDR, grouped error, periodogram PSD."""

from __future__ import annotations

import numpy as np

SI_SDR_CAP_DB = 200.0


def si_sdr(reference: np.ndarray, estimate: np.ndarray) -> float:
    """Scale-invariant signal-to-distortion ratio in dB.

    alpha = <est, ref> / ||ref||^2; value = 10 log10(||alpha ref||^2 /
    ||alpha ref - est||^2), capped at +200 dB so perfect reconstructions
    stay representable in CSV reports.
    """
    s = np.asarray(reference, dtype=np.float64).ravel()
    e = np.asarray(estimate, dtype=np.float64).ravel()
    if s.shape != e.shape:
        raise ValueError("reference and estimate must have equal lengths")
    s_pow = float(s @ s)
    if s_pow == 0.0:
        raise ValueError("zero reference signal")
    if float(e @ e) == 0.0:
        raise ValueError("zero estimate signal")
    alpha = float(e @ s) / s_pow
    target = alpha * s
    err = target - e
    num = float(target @ target)
    den = float(err @ err)
    if den == 0.0 or num / den > 10.0 ** (SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    return 10.0 * np.log10(num / den)


def group_error(x: np.ndarray, x_hat: np.ndarray, feature_map) -> np.ndarray:
    """Squared reconstruction error per orthonormal feature group.

    e_k = ||proj_k(x - x_hat)||^2, averaged over batch rows when 2-d input
    is given; sums to the total projected error (Parseval).
    """
    d = np.atleast_2d(np.asarray(x, dtype=np.float64) - np.asarray(x_hat, dtype=np.float64))
    p = feature_map.project(d)  # [batch, K, group_dim]
    return np.mean(np.sum(p * p, axis=2), axis=0)


def psd(signal: np.ndarray, n_fft: int) -> np.ndarray:
    """One-sided periodogram averaged over non-overlapping frames.

    Normalized so that sum(power) equals the mean squared amplitude of the
    analyzed frames (Parseval).  No window, no detrending.
    """
    x = np.asarray(signal, dtype=np.float64).ravel()
    if n_fft > x.size:
        raise ValueError("n_fft exceeds signal length")
    n_frames = x.size // n_fft
    frames = x[: n_frames * n_fft].reshape(n_frames, n_fft)
    spec = np.fft.rfft(frames, axis=1)
    power = (spec.real ** 2 + spec.imag ** 2) / (n_fft * n_fft)
    # fold the redundant negative frequencies into the one-sided bins
    if n_fft % 2 == 0:
        power[:, 1:-1] *= 2.0
    else:
        power[:, 1:] *= 2.0
    return power.mean(axis=0)
