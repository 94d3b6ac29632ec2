"""Surprisal experiment: rank correlation of flow IC against the exact
Markov oracle across the noise-level grid, for both latent constructions.

The two constructions share pitch paths and nuisance draws (the generator
stream does not depend on the construction), and frames are rescaled to unit
average per-dimension power before flow training so both models face the
same noise geometry.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import flow as flow_mod
from .. import noise as noise_mod
from .. import stats
from .. import synthdata as sd
from ..numerics.rng import stream
from . import checkpoint as ckpt
from .config import ExperimentConfig
from .runio import write_csv_atomic

SURPRISAL_CSV = "surprisal.csv"
SURPRISAL_COLUMNS = ["config_hash", "seed", "construction", "t", "n_notes",
                     "rho", "p_value", "significant"]
IC_SERIES_CSV = "ic_series.csv"

CONSTRUCTIONS = (sd.ALIGNED, sd.UNALIGNED)


def melody_spec(cfg: ExperimentConfig, construction: str) -> sd.MarkovMelodySpec:
    transition = sd.make_transition_matrix(cfg["melody.n_pitches"],
                                           cfg["melody.transition_seed"],
                                           cfg["melody.dirichlet"])
    return sd.MarkovMelodySpec(
        n_pitches=cfg["melody.n_pitches"],
        transition=tuple(transition.ravel()),
        seq_len=cfg["melody.seq_len"],
        latent_dim=cfg["melody.latent_dim"],
        pitch_dim=cfg["melody.pitch_dim"],
        construction=construction,
        pitch_power=cfg["melody.pitch_power"],
        nuisance_power=cfg["melody.nuisance_power"],
        rotation_seed=cfg["melody.rotation_seed"])


def melody_frames(cfg: ExperimentConfig, construction: str, split: str,
                  n_seqs: int):
    """Generated frames scaled to unit average per-dim power, plus pitches.

    The rng stream is keyed by the split only, not the construction, so both
    constructions realize identical pitch paths and nuisance draws.
    """
    spec = melody_spec(cfg, construction)
    rng = stream(cfg.derived_seed("melody", split), "gen")
    frames, pitches = sd.gen_melody_latents(spec, n_seqs, rng)
    frames = frames / np.sqrt(sd.average_frame_power(spec))
    return spec, frames, pitches


def flow_config(cfg: ExperimentConfig) -> flow_mod.FlowConfig:
    return flow_mod.FlowConfig(
        latent_dim=cfg["melody.latent_dim"],
        context_hidden=cfg["flow.context_hidden"],
        velocity_hidden=cfg["flow.velocity_hidden"],
        schedule=noise_mod.NoiseSchedule(m=cfg["flow.m"], s=cfg["flow.s"],
                                         gamma=cfg["flow.gamma"]))


def flow_checkpoint_path(out_dir: Path, cfg: ExperimentConfig, construction: str) -> Path:
    return out_dir / f"flow_{construction}_{cfg.hash}.pald"


def train_or_load_flow(cfg: ExperimentConfig, out_dir: Path,
                       construction: str) -> flow_mod.FlowModel:
    """Train the flow for one construction, checkpoint-round-tripped."""
    path = flow_checkpoint_path(out_dir, cfg, construction)
    if path.exists():
        model, meta = ckpt.load_model(path)
        if meta.get("config.hash") == cfg.hash:
            return model
    _, frames, _ = melody_frames(cfg, construction, "train", cfg["melody.n_train"])
    model = flow_mod.FlowModel(flow_config(cfg), init_seed=cfg.derived_seed("flow-init"))
    flow_mod.train_flow(model, frames, steps=cfg["flow.steps"],
                        batch_size=cfg["flow.batch"], lr=cfg["flow.lr"],
                        weight_decay=cfg["flow.weight_decay"],
                        warmup_steps=cfg["flow.warmup"],
                        seed=cfg.derived_seed("flow-train", construction))
    ckpt.save_flow(model, path, extra_meta={"config.hash": cfg.hash,
                                            "flow.construction": construction})
    model, _ = ckpt.load_model(path)
    return model


def eval_sequence_ic(cfg: ExperimentConfig, model: flow_mod.FlowModel,
                     frames: np.ndarray, construction: str, t_grid) -> dict:
    """Per-frame IC series for every (t, sequence) pair: {t: [n_seqs, L]}."""
    out = {}
    for t_idx, t_level in enumerate(t_grid):
        rngs = [stream(cfg.derived_seed("ic-noise", construction, t_idx, s_i), "ic")
                for s_i in range(frames.shape[0])]
        out[float(t_level)] = flow_mod.sequence_ic_batch(
            model, frames, float(t_level), cfg["ic.n_draws"], rngs,
            run_id=f"{cfg.hash}-s{cfg.seed}-{construction}",
            ode_steps=cfg["ic.ode_steps"])
    return out


def aggregate_notes(ic_frames: np.ndarray, frames_per_note: int = 1,
                    how: str = "mean") -> np.ndarray:
    """Frame ICs -> note ICs (frames_per_note = 1 keeps them 1:1)."""
    if frames_per_note == 1:
        return ic_frames
    usable = ic_frames.size - ic_frames.size % frames_per_note
    blocks = ic_frames[:usable].reshape(-1, frames_per_note)
    if how == "max":
        return blocks.max(axis=1)
    return blocks.mean(axis=1)


def run_surprisal(cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    """Correlation-vs-noise-level table plus the raw IC series CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_grid = cfg["ic.t_grid"]
    rows = []
    all_series = []
    for construction in CONSTRUCTIONS:
        model = train_or_load_flow(cfg, out_dir, construction)
        spec, frames, pitches = melody_frames(cfg, construction, "eval",
                                              cfg["melody.n_eval"])
        oracle = np.concatenate([sd.oracle_ic(spec, pitches[i])
                                 for i in range(pitches.shape[0])])
        per_t = eval_sequence_ic(cfg, model, frames, construction, t_grid)
        for t_level in (float(t) for t in t_grid):
            series = per_t[t_level]
            all_series.extend(series)
            model_ic = np.concatenate([
                aggregate_notes(s.ic_nats, how=cfg["ic.note_agg"]) for s in series])
            test = stats.spearman_test(model_ic, oracle)
            rows.append([cfg.hash, cfg.seed, construction, t_level, oracle.size,
                         test.statistic, test.p_value, test.significant])
    path = out_dir / SURPRISAL_CSV
    write_csv_atomic(path, SURPRISAL_COLUMNS, rows)
    flow_mod.write_surprisal_csv(out_dir / IC_SERIES_CSV, all_series)
    return path
