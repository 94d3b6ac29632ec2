"""Neural-encoding experiment: does flow IC predict synthetic EEG?

The EEG is generated once per run from the *oracle* IC (the ground-truth
surprisal drives the coupled channels) plus the acoustic envelope.  Model IC
series computed at each noise level then compete as predictors through the
full-vs-reduced TRF pipeline; constructions and noise levels share the same
responses, folds, and lambda grid.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import flow as flow_mod
from .. import synthdata as sd
from .. import trf
from ..errors import ConfigError
from ..numerics.rng import stream
from .config import ExperimentConfig
from .runio import write_csv_atomic
from .surprisal import melody_frames, train_or_load_flow

SUMMARY_CSV = "encoding_summary.csv"
SUMMARY_COLUMNS = ["config_hash", "seed", "construction", "t",
                   "mean_participant_delta_r", "se_participant_delta_r",
                   "n_significant", "n_sig_coupled", "n_sig_uncoupled"]


def _render_spec(cfg: ExperimentConfig) -> sd.RenderSpec:
    return sd.RenderSpec(sample_rate=cfg["eeg.sample_rate"],
                         note_duration_s=cfg["render.note_duration_s"],
                         rest_prob=cfg["render.rest_prob"],
                         rest_duration_s=cfg["render.rest_duration_s"])


def _eeg_spec(cfg: ExperimentConfig) -> sd.SyntheticEEGSpec:
    return sd.SyntheticEEGSpec(n_channels=cfg["eeg.n_channels"],
                               n_trials=cfg["eeg.n_trials"],
                               n_participants=cfg["eeg.n_participants"],
                               sample_rate=cfg["eeg.sample_rate"],
                               coupled_channels=tuple(range(cfg["eeg.n_coupled"])),
                               noise_power=cfg["eeg.noise_power"])


def _value_series(cfg: ExperimentConfig, pitches: np.ndarray, values_per_trial,
                  fill_label: str, length: int):
    """Render per-note values onto the sample grid, fill rests, truncate."""
    render = _render_spec(cfg)
    out = []
    for i in range(pitches.shape[0]):
        vals, _, voiced = sd.render_melody(pitches[i], values_per_trial[i], render,
                                           seed=cfg.derived_seed("render", i))
        filled = trf.interpolate_unvoiced(vals, voiced,
                                          stream(cfg.derived_seed(fill_label, i), "fill"))
        out.append(filled[:length])
    return np.stack(out)


def run_encoding(cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_trials = cfg["eeg.n_trials"]
    if cfg["melody.n_eval"] != n_trials:
        raise ConfigError("melody.n_eval must equal eeg.n_trials")
    render = _render_spec(cfg)
    rate = cfg["eeg.sample_rate"]

    # oracle-driven stimulus side, shared by every (construction, t) cell
    spec_aligned, _, pitches = melody_frames(cfg, sd.ALIGNED, "eval", n_trials)
    oracle_vals = [sd.oracle_ic(spec_aligned, pitches[i]) for i in range(n_trials)]
    envelopes, raw_lengths = [], []
    for i in range(n_trials):
        _, wave, _ = sd.render_melody(pitches[i], oracle_vals[i], render,
                                      seed=cfg.derived_seed("render", i))
        env = trf.hilbert_envelope(wave, rate)
        envelopes.append(env)
        raw_lengths.append(env.size)
    length = min(raw_lengths)
    env_pred = np.stack([e[:length] for e in envelopes])
    ic_oracle = _value_series(cfg, pitches, oracle_vals, "fill-oracle", length)

    eeg_spec = _eeg_spec(cfg)
    kernels = sd.default_eeg_kernels(eeg_spec, ic_gain=cfg["eeg.ic_gain"],
                                     env_gain=cfg["eeg.env_gain"])
    responses = sd.gen_synthetic_eeg(eeg_spec, {"ic": ic_oracle, "envelope": env_pred},
                                     stream(cfg.derived_seed("eeg"), "gen"), kernels)

    lag_window = (cfg["trf.lag_min_ms"], cfg["trf.lag_max_ms"])
    coupled = set(range(cfg["eeg.n_coupled"]))
    rows = []
    outputs = []
    for construction in (sd.ALIGNED, sd.UNALIGNED):
        model = train_or_load_flow(cfg, out_dir, construction)
        _, frames, _ = melody_frames(cfg, construction, "eval", n_trials)
        for t_idx, t_level in enumerate(cfg["encode.t_grid"]):
            rngs = [stream(cfg.derived_seed("ic-noise", construction, t_idx, s_i), "ic")
                    for s_i in range(n_trials)]
            series_list = flow_mod.sequence_ic_batch(model, frames, float(t_level),
                                                     cfg["ic.n_draws"], rngs,
                                                     ode_steps=cfg["ic.ode_steps"])
            model_vals = [s.ic_nats for s in series_list]
            ic_model = _value_series(cfg, pitches, model_vals,
                                     f"fill-{construction}-{t_idx}", length)
            result = trf.delta_r_pipeline(responses, rate, ic_model, env_pred,
                                          lag_window_ms=lag_window,
                                          margin_ms=cfg["trf.margin_ms"])
            tag = f"{construction}_t{t_idx}"
            trf.write_results_csv(out_dir / f"encoding_results_{tag}.csv", result)
            trf.write_topography_csv(out_dir / f"encoding_topography_{tag}.csv", result)
            outputs += [f"encoding_results_{tag}.csv", f"encoding_topography_{tag}.csv"]
            sig = result.significant
            n_part = result.participant_summary.size
            rows.append([cfg.hash, cfg.seed, construction, float(t_level),
                         float(result.participant_summary.mean()),
                         float(result.participant_summary.std(ddof=1) / np.sqrt(n_part)),
                         int(sig.sum()),
                         int(sum(sig[c] for c in range(len(sig)) if c in coupled)),
                         int(sum(sig[c] for c in range(len(sig)) if c not in coupled))])
    path = out_dir / SUMMARY_CSV
    write_csv_atomic(path, SUMMARY_COLUMNS, rows)
    return path
