"""Synthetic generators with analytic ground truth.

Three families:
  - hierarchical signals: sums over orthonormal feature groups with known
    per-group power, the substrate for weighted-reconstruction experiments;
  - Markov "melody" latent sequences whose per-note information content is
    known exactly, in ALIGNED (pitch info in a high-power subspace) and
    UNALIGNED (pitch info spread uniformly by whitening + rotation)
    constructions carrying identical pitch information;
  - synthetic EEG: lag-filtered predictor responses plus 1/f noise, with a
    known subset of coupled channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics.rng import stream

ALIGNED = "aligned"
UNALIGNED = "unaligned"


# -- hierarchical perceptual signals ------------------------------------------


class FeatureMap:
    """Orthonormal basis split into K groups of group_dim columns."""

    def __init__(self, basis: np.ndarray, k_groups: int, group_dim: int):
        if basis.shape[1] != k_groups * group_dim:
            raise ValueError("basis columns must equal k_groups * group_dim")
        self.basis = basis
        self.k_groups = k_groups
        self.group_dim = group_dim

    def project(self, x: np.ndarray) -> np.ndarray:
        """Coordinates per group: [batch, K, group_dim]."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        p = x @ self.basis
        return p.reshape(x.shape[0], self.k_groups, self.group_dim)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Signals from group coordinates [batch, K, group_dim]."""
        flat = coeffs.reshape(coeffs.shape[0], -1)
        return flat @ self.basis.T


def make_feature_map(k_groups: int, group_dim: int, seed: int) -> FeatureMap:
    dim = k_groups * group_dim
    g = stream(seed, "feature-basis").standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    q *= np.sign(np.diag(r))  # fix the sign convention so the basis is seed-stable
    return FeatureMap(q, k_groups, group_dim)


@dataclass(frozen=True)
class HierarchicalSignalSpec:
    k_groups: int = 8
    group_dim: int = 8
    coeff_std: tuple = ()  # per-group coefficient std; empty = all ones
    seed: int = 0

    def stds(self) -> np.ndarray:
        if self.coeff_std:
            s = np.asarray(self.coeff_std, dtype=np.float64)
            if s.size != self.k_groups:
                raise ValueError("coeff_std must list one std per group")
        else:
            s = np.ones(self.k_groups)
        if np.any(s <= 0):
            raise ValueError("coefficient stds must be positive")
        return s

    @property
    def signal_dim(self) -> int:
        return self.k_groups * self.group_dim


def gen_hierarchical(spec: HierarchicalSignalSpec, n: int,
                     feature_map: FeatureMap | None = None):
    """Signals x = sum_k a_k Phi_k, a_k ~ N(0, std_k^2 I); returns (x, projections)."""
    fmap = feature_map if feature_map is not None else make_feature_map(
        spec.k_groups, spec.group_dim, spec.seed)
    rng = stream(spec.seed, "hier-coeffs")
    coeffs = rng.standard_normal((n, spec.k_groups, spec.group_dim))
    coeffs *= spec.stds()[None, :, None]
    x = fmap.synthesize(coeffs)
    return x, coeffs, fmap


# -- Markov melody latents -----------------------------------------------------


@dataclass(frozen=True)
class MarkovMelodySpec:
    n_pitches: int = 8
    transition: tuple = ()  # row-major flattened row-stochastic matrix
    seq_len: int = 32
    latent_dim: int = 8
    pitch_dim: int = 4
    construction: str = ALIGNED
    pitch_power: float = 1.0
    nuisance_power: float = 0.25
    rotation_seed: int = 777

    def matrix(self) -> np.ndarray:
        p = np.asarray(self.transition, dtype=np.float64).reshape(
            self.n_pitches, self.n_pitches)
        rows = p.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-12) or np.any(p < 0):
            raise ValueError("transition matrix must be row-stochastic")
        return p

    def __post_init__(self):
        if self.construction not in (ALIGNED, UNALIGNED):
            raise ValueError(f"unknown construction {self.construction!r}")
        if self.construction == ALIGNED and not (
                self.pitch_power > self.nuisance_power > 0):
            raise ValueError("ALIGNED needs pitch_power > nuisance_power > 0")
        if self.pitch_dim >= self.latent_dim:
            raise ValueError("pitch_dim must leave room for the nuisance subspace")


def make_transition_matrix(n_pitches: int, seed: int, concentration: float = 0.3) -> np.ndarray:
    """Row-stochastic matrix with Dirichlet rows; sparse rows give IC variance."""
    rng = stream(seed, "transition")
    p = rng.dirichlet(np.full(n_pitches, concentration), size=n_pitches)
    p = np.maximum(p, 1e-12)
    return p / p.sum(axis=1, keepdims=True)


def stationary_distribution(transition: np.ndarray) -> np.ndarray:
    n = transition.shape[0]
    a = np.vstack([transition.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def pitch_embedding(spec: MarkovMelodySpec) -> np.ndarray:
    """Unit-norm embedding of each pitch inside the pitch subspace [n_pitches, pitch_dim]."""
    rng = stream(spec.rotation_seed, "pitch-embed")
    e = rng.standard_normal((spec.n_pitches, spec.pitch_dim))
    return e / np.linalg.norm(e, axis=1, keepdims=True)


def _inv_sqrtm(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    if np.any(vals <= 1e-12):
        raise ValueError("second-moment matrix is singular; pitch embedding degenerate")
    return (vecs * (1.0 / np.sqrt(vals))) @ vecs.T


def unaligned_map(spec: MarkovMelodySpec) -> np.ndarray:
    """Column-vector map T with frames' second moment T M T^T = q I.

    Whitens the pitch block against the chain's stationary second moment,
    rescales the nuisance block to the same per-dimension power q (the
    aligned construction's average power, so total power is preserved), then
    applies a seeded rotation.  Invertible, so pitch information is intact.
    """
    p = spec.matrix()
    pi = stationary_distribution(p)
    e = pitch_embedding(spec)
    m_pitch = (e * pi[:, None]).T @ e  # sum_p pi_p e_p e_p^T
    d_p, d_n = spec.pitch_dim, spec.latent_dim - spec.pitch_dim
    total_power = spec.pitch_power ** 2 + d_n * spec.nuisance_power ** 2
    q = total_power / spec.latent_dim
    s = np.zeros((spec.latent_dim, spec.latent_dim))
    s[:d_p, :d_p] = np.sqrt(q) * _inv_sqrtm(spec.pitch_power ** 2 * m_pitch)
    s[d_p:, d_p:] = (np.sqrt(q) / spec.nuisance_power) * np.eye(d_n)
    g = stream(spec.rotation_seed, "rotation").standard_normal(
        (spec.latent_dim, spec.latent_dim))
    r, rr = np.linalg.qr(g)
    r *= np.sign(np.diag(rr))
    return r @ s


def average_frame_power(spec: MarkovMelodySpec) -> float:
    """Expected per-dimension second moment of generated frames."""
    d_n = spec.latent_dim - spec.pitch_dim
    return (spec.pitch_power ** 2 + d_n * spec.nuisance_power ** 2) / spec.latent_dim


def gen_melody_latents(spec: MarkovMelodySpec, n_seqs: int, rng: np.random.Generator):
    """Markov pitch paths rendered as latent frames; returns (frames, pitches).

    frames: [n_seqs, seq_len, latent_dim]; pitches: [n_seqs, seq_len] ints.
    The two constructions share the same pitch/nuisance draws for a given rng
    state, differing only in the linear placement of the information.
    """
    p = spec.matrix()
    pi = stationary_distribution(p)
    e = pitch_embedding(spec)
    d_n = spec.latent_dim - spec.pitch_dim
    cum_rows = np.cumsum(p, axis=1)
    cum_pi = np.cumsum(pi)

    pitches = np.empty((n_seqs, spec.seq_len), dtype=np.int64)
    u = rng.random((n_seqs, spec.seq_len))
    top = spec.n_pitches - 1
    for s_i in range(n_seqs):
        pitches[s_i, 0] = min(np.searchsorted(cum_pi, u[s_i, 0]), top)
        for j in range(1, spec.seq_len):
            row = cum_rows[pitches[s_i, j - 1]]
            pitches[s_i, j] = min(np.searchsorted(row, u[s_i, j]), top)

    eta = rng.standard_normal((n_seqs, spec.seq_len, d_n))
    frames = np.empty((n_seqs, spec.seq_len, spec.latent_dim))
    frames[:, :, : spec.pitch_dim] = spec.pitch_power * e[pitches]
    frames[:, :, spec.pitch_dim :] = spec.nuisance_power * eta
    if spec.construction == UNALIGNED:
        t_map = unaligned_map(spec)
        frames = frames @ t_map.T
    return frames, pitches


def oracle_ic(spec: MarkovMelodySpec, pitches: np.ndarray) -> np.ndarray:
    """Exact per-note information content in nats.

    First note scores against the stationary distribution, later notes
    against their transition row.
    """
    p = spec.matrix()
    pi = stationary_distribution(p)
    pitches = np.asarray(pitches, dtype=np.int64)
    if pitches.ndim == 1:
        pitches = pitches[None, :]
    probs = np.empty(pitches.shape, dtype=np.float64)
    probs[:, 0] = pi[pitches[:, 0]]
    probs[:, 1:] = p[pitches[:, :-1], pitches[:, 1:]]
    if np.any(probs <= 0.0):
        raise ValueError("observed a zero-probability transition")
    out = -np.log(probs)
    return out[0] if out.shape[0] == 1 else out


# -- synthetic EEG --------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticEEGSpec:
    n_channels: int = 8
    n_trials: int = 18
    n_participants: int = 20
    sample_rate: float = 64.0
    coupled_channels: tuple = (0, 1, 2, 3)
    noise_power: float = 1.0
    kernel_peak_s: float = 0.150
    kernel_support_s: float = 0.450

    def __post_init__(self):
        if any(c >= self.n_channels for c in self.coupled_channels):
            raise ValueError("coupled_channels out of range")


def biphasic_kernel(spec: SyntheticEEGSpec, peak_s: float | None = None,
                    gain: float = 1.0) -> np.ndarray:
    """Smooth biphasic lag filter on [0, kernel_support_s] at the EEG rate."""
    peak = spec.kernel_peak_s if peak_s is None else peak_s
    lags = np.arange(int(round(spec.kernel_support_s * spec.sample_rate))) / spec.sample_rate
    pos = np.exp(-0.5 * ((lags - peak) / 0.040) ** 2)
    neg = np.exp(-0.5 * ((lags - (peak + 0.130)) / 0.060) ** 2)
    k = pos - 0.6 * neg
    return gain * k / np.sqrt(np.sum(k * k))


def default_eeg_kernels(spec: SyntheticEEGSpec, ic_gain: float = 1.0,
                        env_gain: float = 1.0) -> np.ndarray:
    """Per-channel (IC, envelope) kernels [n_channels, 2, n_lags].

    The IC kernel is zero outside coupled channels; peak latency varies a
    little across channels so topographies are not all identical.
    """
    n_lags = int(round(spec.kernel_support_s * spec.sample_rate))
    kernels = np.zeros((spec.n_channels, 2, n_lags))
    for ch in range(spec.n_channels):
        jitter = 0.010 * (ch % 4)
        if ch in spec.coupled_channels:
            kernels[ch, 0] = biphasic_kernel(spec, peak_s=spec.kernel_peak_s + jitter,
                                             gain=ic_gain)
        kernels[ch, 1] = biphasic_kernel(spec, peak_s=spec.kernel_peak_s + 0.030 + jitter,
                                         gain=env_gain)
    return kernels


def lagged_response(predictor: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Causal lag filter: out[t] = sum_j kernel[j] * predictor[t - j]."""
    full = np.convolve(predictor, kernel)
    return full[: predictor.size]


def pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """1/f-power noise, unit variance."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.arange(spec.size, dtype=np.float64)
    f[0] = 1.0
    spec /= np.sqrt(f)
    x = np.fft.irfft(spec, n=n)
    sd = x.std()
    return x / sd if sd > 0 else x


def gen_synthetic_eeg(spec: SyntheticEEGSpec, predictors: dict, rng: np.random.Generator,
                      kernels: np.ndarray | None = None) -> np.ndarray:
    """Responses [n_participants, n_trials, T, n_channels].

    predictors: {"ic": [n_trials, T], "envelope": [n_trials, T]}.  Coupled
    channels respond to both predictors, the rest only to the envelope; every
    channel gets fresh 1/f noise scaled to noise_power.
    """
    ic = np.asarray(predictors["ic"], dtype=np.float64)
    env = np.asarray(predictors["envelope"], dtype=np.float64)
    if ic.shape != env.shape:
        raise ValueError("predictor arrays must share [n_trials, T] shape")
    n_trials, t_len = ic.shape
    if n_trials != spec.n_trials:
        raise ValueError("predictor trial count does not match the spec")
    if kernels is None:
        kernels = default_eeg_kernels(spec)
    clean = np.zeros((n_trials, t_len, spec.n_channels))
    for ch in range(spec.n_channels):
        for tr in range(n_trials):
            resp = lagged_response(env[tr], kernels[ch, 1])
            if ch in spec.coupled_channels:
                resp = resp + lagged_response(ic[tr], kernels[ch, 0])
            clean[tr, :, ch] = resp
    out = np.empty((spec.n_participants, n_trials, t_len, spec.n_channels))
    scale = np.sqrt(spec.noise_power)
    for p_i in range(spec.n_participants):
        for tr in range(n_trials):
            for ch in range(spec.n_channels):
                out[p_i, tr, :, ch] = clean[tr, :, ch] + scale * pink_noise(t_len, rng)
    return out


# -- melody-to-predictor rendering ----------------------------------------------


@dataclass(frozen=True)
class RenderSpec:
    """How a pitch sequence becomes stimulus predictors at the EEG rate."""

    sample_rate: float = 64.0
    note_duration_s: float = 0.375
    rest_prob: float = 0.15
    rest_duration_s: float = 0.1875
    base_freq_hz: float = 3.0
    freq_step_hz: float = 0.8


def render_melody(pitches: np.ndarray, note_values: np.ndarray, render: RenderSpec,
                  seed: int):
    """Step-function note series plus a synthetic waveform.

    Returns (value_series, waveform, voiced_mask).  value_series holds each
    note's value over its span and 0 in rests; rests (seeded, after a note
    with rest_prob) are marked unvoiced.  The waveform is a per-note sinusoid
    at a pitch-dependent frequency under a Hann amplitude bump.
    """
    pitches = np.asarray(pitches, dtype=np.int64)
    values = np.asarray(note_values, dtype=np.float64)
    if pitches.shape != values.shape:
        raise ValueError("one value per note required")
    rng = stream(seed, "rests")
    note_len = int(round(render.note_duration_s * render.sample_rate))
    rest_len = int(round(render.rest_duration_s * render.sample_rate))
    rests = rng.random(pitches.size) < render.rest_prob

    chunks_val, chunks_wave, chunks_voiced = [], [], []
    hann = np.sin(np.pi * (np.arange(note_len) + 0.5) / note_len) ** 2
    for i, (p, v) in enumerate(zip(pitches, values)):
        tau = np.arange(note_len) / render.sample_rate
        freq = render.base_freq_hz + render.freq_step_hz * p
        chunks_wave.append(np.sin(2.0 * np.pi * freq * tau) * hann)
        chunks_val.append(np.full(note_len, v))
        chunks_voiced.append(np.ones(note_len, dtype=bool))
        if rests[i]:
            chunks_wave.append(np.zeros(rest_len))
            chunks_val.append(np.zeros(rest_len))
            chunks_voiced.append(np.zeros(rest_len, dtype=bool))
    return (np.concatenate(chunks_val), np.concatenate(chunks_wave),
            np.concatenate(chunks_voiced))
