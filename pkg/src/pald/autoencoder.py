"""Encoder-decoder trained to reconstruct clean signals from noised latents.

Training modes:
  ED   - latents noised, gradients reach encoder and decoder;
  D    - latents noised, encoder frozen (typically one trained without noise);
  NONE - no noising (t forced to 0).

The bottleneck is either TanH (latents bounded to (-1, 1)) or LayerNorm
(per-example latent mean 0 / variance 1, pinning the latent power the SNR
algebra assumes).  Reconstruction quality is scored by a weighted squared
error over orthonormal feature groups, the stand-in for a perceptual loss:
group weights say how much each feature group matters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from . import noise as noise_mod
from .errors import NumericalError
from .numerics import AdamW, MLP, Tensor
from .numerics import tensor as T
from .numerics.rng import spawn_seed, stream

TANH = "tanh"
LAYERNORM = "layernorm"
NT_ED = "ED"
NT_D = "D"
NT_NONE = "NONE"


class PerceptualWeights:
    """Positive, non-increasing group weights normalized to sum to K."""

    def __init__(self, w):
        w = np.asarray(w, dtype=np.float64)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if np.any(np.diff(w) > 0):
            raise ValueError("weights must be non-increasing")
        self.w = w * (w.size / w.sum())

    @property
    def k(self) -> int:
        return self.w.size

    def per_column(self, group_dim: int) -> np.ndarray:
        return np.repeat(self.w, group_dim)


def power_law_weights(k: int, alpha: float = 1.0) -> PerceptualWeights:
    return PerceptualWeights(np.arange(1, k + 1, dtype=np.float64) ** (-alpha))


@dataclass(frozen=True)
class AutoencoderConfig:
    input_dim: int = 64
    hidden_dim: int = 64
    n_hidden: int = 2
    latent_dim: int = 8
    bottleneck: str = LAYERNORM
    nt_mode: str = NT_ED
    schedule: noise_mod.NoiseSchedule = noise_mod.NoiseSchedule(m=-1.0, s=1.0, gamma=1.0)

    def __post_init__(self):
        if self.bottleneck not in (TANH, LAYERNORM):
            raise ValueError(f"unknown bottleneck {self.bottleneck!r}")
        if self.nt_mode not in (NT_ED, NT_D, NT_NONE):
            raise ValueError(f"unknown nt_mode {self.nt_mode!r}")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")


class AutoencoderModel:
    """MLP encoder/decoder pair with a TanH or LayerNorm bottleneck."""

    def __init__(self, cfg: AutoencoderConfig, init_seed: int):
        self.cfg = cfg
        self.init_seed = init_seed
        enc_dims = [cfg.input_dim] + [cfg.hidden_dim] * cfg.n_hidden + [cfg.latent_dim]
        dec_dims = [cfg.latent_dim] + [cfg.hidden_dim] * cfg.n_hidden + [cfg.input_dim]
        self.encoder = MLP("enc", enc_dims, stream(init_seed, "ae-enc-init"))
        self.decoder = MLP("dec", dec_dims, stream(init_seed, "ae-dec-init"))
        if cfg.nt_mode == NT_D:
            self.freeze_encoder()

    @property
    def params(self) -> dict[str, Tensor]:
        return {**self.encoder.params, **self.decoder.params}

    def freeze_encoder(self) -> None:
        for p in self.encoder.params.values():
            p.requires_grad = False

    def with_mode(self, nt_mode: str) -> "AutoencoderModel":
        """Same weights under a different training mode (D freezes the encoder)."""
        clone = AutoencoderModel(replace(self.cfg, nt_mode=nt_mode), self.init_seed)
        for name, p in self.params.items():
            clone.params[name].data = p.data.copy()
        return clone

    def encode_t(self, x: Tensor) -> Tensor:
        z = self.encoder(x)
        if self.cfg.bottleneck == TANH:
            return T.tanh(z)
        return T.layer_norm(z)

    def encode(self, x: np.ndarray) -> np.ndarray:
        return self.encode_t(Tensor(np.atleast_2d(x))).data

    def decode_t(self, z: Tensor) -> Tensor:
        return self.decoder(z)

    def decode(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[1] != self.cfg.latent_dim:
            raise ValueError("latent dimension mismatch")
        return self.decoder.forward_np(z)


def perceptual_loss(x, x_hat, weights: PerceptualWeights, feature_map) -> float:
    """Weighted projected squared error, averaged over batch rows.

    L = mean_batch sum_k w_k ||proj_k(x) - proj_k(x_hat)||^2
    """
    if weights.k != feature_map.k_groups:
        raise ValueError("weights and feature map disagree on group count")
    e = metrics.group_error(x, x_hat, feature_map)
    return float(weights.w @ e)


def _loss_tape(x: Tensor, x_hat: Tensor, wcol: np.ndarray, basis: np.ndarray) -> Tensor:
    diff = x_hat - x
    proj = T.matmul(diff, Tensor(basis))
    weighted = T.mul(T.mul(proj, proj), Tensor(wcol))
    return T.scale(T.tsum(weighted), 1.0 / x.data.shape[0])


class AETrainer:
    """Owns the optimizer state and RNG streams for one training run."""

    def __init__(self, model: AutoencoderModel, weights: PerceptualWeights,
                 feature_map, lr: float = 1e-3, weight_decay: float = 0.0,
                 seed: int = 0):
        if weights.k != feature_map.k_groups:
            raise ValueError("weights and feature map disagree on group count")
        self.model = model
        self.weights = weights
        self.feature_map = feature_map
        self.opt = AdamW(model.params, lr=lr, weight_decay=weight_decay)
        self.noise_rng = stream(seed, "ae-noise")
        self.batch_rng = stream(seed, "ae-batch")
        self.wcol = weights.per_column(feature_map.group_dim)
        self.losses: list[float] = []

    def step(self, batch: np.ndarray, force_t: float | None = None) -> float:
        """One optimization step on a batch; returns the loss."""
        model = self.model
        x = Tensor(np.atleast_2d(batch))
        z = model.encode_t(x)
        if model.cfg.nt_mode == NT_NONE and force_t is None:
            z_prime = z
        else:
            sched = model.cfg.schedule
            t = noise_mod.sample_t(sched, self.noise_rng) if force_t is None else float(force_t)
            drawn = noise_mod.noise_latents(z.data, t, sched.gamma, self.noise_rng)
            z_prime = T.add(T.scale(z, 1.0 - t),
                            Tensor(t * noise_mod.draw_noise(z.data.shape, sched.gamma,
                                                            drawn.noise_seed)))
            assert np.array_equal(z_prime.data, drawn.z_prime)  # Eq-consistency with noise_latents
        x_hat = model.decode_t(z_prime)
        loss = _loss_tape(x, x_hat, self.wcol, self.feature_map.basis)
        if not np.isfinite(loss.data):
            raise NumericalError("non-finite autoencoder loss")
        grads = T.autodiff_gradient(loss, {k: p for k, p in model.params.items()
                                           if p.requires_grad})
        self.opt.step(grads)
        value = float(loss.data)
        self.losses.append(value)
        return value

    def next_batch(self, data: np.ndarray, batch_size: int) -> np.ndarray:
        idx = self.batch_rng.integers(0, data.shape[0], size=batch_size)
        return data[idx]


def train_autoencoder(model: AutoencoderModel, data: np.ndarray,
                      weights: PerceptualWeights, feature_map, steps: int,
                      batch_size: int = 64, lr: float = 1e-3,
                      weight_decay: float = 0.0, seed: int = 0,
                      probe_every: int = 0, probe_data: np.ndarray | None = None):
    """Full training loop; returns (trainer, probes) with probes = E[z^2] history."""
    trainer = AETrainer(model, weights, feature_map, lr=lr,
                        weight_decay=weight_decay, seed=seed)
    probes: list[float] = []
    for step in range(steps):
        if probe_every and step % probe_every == 0:
            probes.append(latent_variance_probe(
                model, probe_data if probe_data is not None else data))
        trainer.step(trainer.next_batch(data, batch_size))
    if probe_every:
        probes.append(latent_variance_probe(
            model, probe_data if probe_data is not None else data))
    return trainer, probes


def latent_variance_probe(model: AutoencoderModel, dataset: np.ndarray) -> float:
    """Mean squared latent value over the dataset (exactly 1 under LayerNorm)."""
    dataset = np.atleast_2d(dataset)
    if dataset.shape[0] == 0:
        raise ValueError("empty dataset")
    z = model.encode(dataset)
    return float(np.mean(z * z))


def reconstruction_sweep(model: AutoencoderModel, dataset: np.ndarray,
                         snr_levels, weights: PerceptualWeights, feature_map,
                         n_draws: int = 16, seed: int = 0) -> list[dict]:
    """Noise latents to each SNR level, decode, and score.

    Returns one row per level: per-group squared errors, their weighted sum,
    and SI-SDR, averaged over n_draws independent noise draws (one draw and
    no noise branch at SNR = inf).
    """
    dataset = np.atleast_2d(dataset)
    z = model.encode(dataset)
    z_power = 1.0 if model.cfg.bottleneck == LAYERNORM else float(np.mean(z * z))
    gamma = model.cfg.schedule.gamma
    rows = []
    for level_idx, snr in enumerate(snr_levels):
        t = noise_mod.t_of_snr(float(snr), z_power=z_power, gamma=gamma)
        if t == 0.0:
            draws = [model.decode(z)]
        else:
            rng = stream(seed, "sweep", level_idx)
            draws = [model.decode(noise_mod.noise_latents(z, t, gamma, rng).z_prime)
                     for _ in range(n_draws)]
        group_err = np.mean([metrics.group_error(dataset, xh, feature_map)
                             for xh in draws], axis=0)
        sdr = float(np.mean([
            np.mean([metrics.si_sdr(dataset[i], xh[i]) for i in range(dataset.shape[0])])
            for xh in draws]))
        rows.append({
            "snr": float(snr),
            "t": t,
            "group_error": group_err,
            "weighted_error": float(weights.w @ group_err),
            "si_sdr_db": sdr,
            "z_power": z_power,
        })
    return rows
