"""Reconstruction sweep: the three noise-training modes scored across SNR levels.

Training protocol per seed (identical data and initialization across modes):
  NONE - train from scratch without latent noising;
  ED   - train from the same initialization with noised latents;
  D    - start from the trained NONE model, freeze its encoder, and train
         the decoder under noised latents.
Every trained model is round-tripped through its checkpoint before scoring,
so cached and freshly trained runs emit identical CSVs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import autoencoder as ae_mod
from .. import noise as noise_mod
from .. import synthdata as sd
from . import checkpoint as ckpt
from .config import ExperimentConfig
from .runio import write_csv_atomic

RECON_CSV = "recon_sweep.csv"
RECON_COLUMNS = ["config_hash", "seed", "nt_mode", "bottleneck", "snr", "t",
                 "group", "group_weight", "group_sq_error", "weighted_error",
                 "si_sdr_db", "z_power"]


def _ae_config(cfg: ExperimentConfig, nt_mode: str) -> ae_mod.AutoencoderConfig:
    return ae_mod.AutoencoderConfig(
        input_dim=cfg["data.k_groups"] * cfg["data.group_dim"],
        hidden_dim=cfg["ae.hidden_dim"],
        n_hidden=cfg["ae.n_hidden"],
        latent_dim=cfg["ae.latent_dim"],
        bottleneck=cfg["ae.bottleneck"],
        nt_mode=nt_mode,
        schedule=noise_mod.NoiseSchedule(m=cfg["ae.m"], s=cfg["ae.s"],
                                         gamma=cfg["ae.gamma"]))


def _checkpoint_path(out_dir: Path, cfg: ExperimentConfig, nt_mode: str,
                     cell_seed: int) -> Path:
    return out_dir / f"ae_{nt_mode.lower()}_seed{cell_seed}_{cfg.hash}.pald"


def train_cell(cfg: ExperimentConfig, out_dir: Path, nt_mode: str, cell_seed: int,
               data: np.ndarray, weights, fmap,
               base_model=None) -> ae_mod.AutoencoderModel:
    """Train (or reload) one (mode, seed) cell; always returns the
    checkpoint-round-tripped model."""
    path = _checkpoint_path(out_dir, cfg, nt_mode, cell_seed)
    if path.exists():
        model, meta = ckpt.load_model(path)
        if meta.get("config.hash") == cfg.hash:
            return model
    if base_model is not None:
        model = base_model.with_mode(nt_mode)
    else:
        model = ae_mod.AutoencoderModel(_ae_config(cfg, nt_mode), init_seed=cell_seed)
    # one trainer seed per cell seed: every mode sees the identical batch stream
    ae_mod.train_autoencoder(model, data, weights, fmap, steps=cfg["ae.steps"],
                             batch_size=cfg["ae.batch"], lr=cfg["ae.lr"],
                             weight_decay=cfg["ae.weight_decay"],
                             seed=cfg.derived_seed("ae-train", cell_seed))
    ckpt.save_autoencoder(model, path, extra_meta={"config.hash": cfg.hash,
                                                   "cell.seed": cell_seed})
    model, _ = ckpt.load_model(path)
    return model


def run_recon_sweep(cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    """Train NT in {ED, D, NONE} per seed and emit the per-group error table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    k, gd = cfg["data.k_groups"], cfg["data.group_dim"]
    weights = ae_mod.power_law_weights(k, cfg["data.weight_alpha"])
    n_train, n_eval = cfg["data.n_train"], cfg["data.n_eval"]
    rows = []
    for i in range(cfg["sweep.n_seeds"]):
        cell_seed = cfg.derived_seed("cell", i)
        spec = sd.HierarchicalSignalSpec(k_groups=k, group_dim=gd, seed=cell_seed)
        x_all, _, fmap = sd.gen_hierarchical(spec, n_train + n_eval)
        x_train, x_eval = x_all[:n_train], x_all[n_train:]
        model_none = train_cell(cfg, out_dir, ae_mod.NT_NONE, cell_seed,
                                x_train, weights, fmap)
        model_ed = train_cell(cfg, out_dir, ae_mod.NT_ED, cell_seed,
                              x_train, weights, fmap)
        model_d = train_cell(cfg, out_dir, ae_mod.NT_D, cell_seed,
                             x_train, weights, fmap, base_model=model_none)
        for nt_mode, model in ((ae_mod.NT_ED, model_ed), (ae_mod.NT_D, model_d),
                               (ae_mod.NT_NONE, model_none)):
            sweep = ae_mod.reconstruction_sweep(
                model, x_eval, cfg["sweep.snr_levels"], weights, fmap,
                n_draws=cfg["sweep.n_draws"],
                seed=cfg.derived_seed("sweep", nt_mode, cell_seed))
            for row in sweep:
                for g in range(k):
                    rows.append([cfg.hash, cell_seed, nt_mode, cfg["ae.bottleneck"],
                                 row["snr"], row["t"], g, float(weights.w[g]),
                                 float(row["group_error"][g]), row["weighted_error"],
                                 row["si_sdr_db"], row["z_power"]])
    path = out_dir / RECON_CSV
    write_csv_atomic(path, RECON_COLUMNS, rows)
    return path
