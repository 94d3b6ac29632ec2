"""Experiment configuration: flat `section.key = value` text files.

Grammar: UTF-8 lines, `#` starts a comment, blank lines ignored, one
`section.key = value` binding per line.  Booleans are the literals
true/false; list values are comma-separated.  Every key has a default; a key
outside the experiment kind's default table is a ConfigError.  The config
hash (first 12 hex chars of the SHA-256 of the canonical key-sorted text) is
stamped on every output row, so equal hashes mean byte-identical reruns.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

from ..errors import ConfigError

RECON_SWEEP = "recon_sweep"
SURPRISAL = "surprisal"
ENCODING = "encoding"

_COMMON = {
    "experiment.seed": 0,
}

_AE = {
    "data.k_groups": 8,
    "data.group_dim": 2,
    "data.weight_alpha": 1.0,
    "data.n_train": 4096,
    "data.n_eval": 256,
    "ae.hidden_dim": 64,
    "ae.n_hidden": 2,
    "ae.latent_dim": 12,
    "ae.bottleneck": "layernorm",
    "ae.nt_mode": "ED",
    "ae.m": -1.0,
    "ae.s": 1.0,
    "ae.gamma": 1.0,
    "ae.steps": 5000,
    "ae.batch": 64,
    "ae.lr": 1e-3,
    "ae.weight_decay": 0.0,
}

_SWEEP = {
    "sweep.n_seeds": 5,
    "sweep.snr_levels": (math.inf, 4.0, 1.0, 0.25),
    "sweep.n_draws": 16,
}

_MELODY_FLOW = {
    "melody.n_pitches": 8,
    "melody.latent_dim": 8,
    "melody.pitch_dim": 4,
    "melody.pitch_power": 1.0,
    "melody.nuisance_power": 0.25,
    "melody.seq_len": 32,
    "melody.n_train": 96,
    "melody.n_eval": 12,
    "melody.dirichlet": 0.3,
    "melody.transition_seed": 42,
    "melody.rotation_seed": 777,
    "flow.context_hidden": 64,
    "flow.velocity_hidden": 64,
    "flow.m": 0.0,
    "flow.s": 1.0,
    "flow.gamma": 1.0,
    "flow.steps": 20000,
    "flow.warmup": 500,
    "flow.batch": 16,
    "flow.lr": 1e-4,
    "flow.weight_decay": 0.0,
    "ic.t_grid": (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
    "ic.n_draws": 8,
    "ic.ode_steps": 100,
    "ic.note_agg": "mean",
}

_ENCODING = {
    "render.note_duration_s": 0.375,
    "render.rest_prob": 0.15,
    "render.rest_duration_s": 0.1875,
    "eeg.n_channels": 8,
    "eeg.n_coupled": 4,
    "eeg.n_participants": 20,
    "eeg.n_trials": 18,
    "eeg.sample_rate": 64.0,
    "eeg.noise_power": 1.0,
    "eeg.ic_gain": 1.0,
    "eeg.env_gain": 1.0,
    "trf.lag_min_ms": -100.0,
    "trf.lag_max_ms": 700.0,
    "trf.margin_ms": 50.0,
    "encode.t_grid": (0.2, 0.4, 0.6, 0.8),
}

DEFAULTS: dict[str, dict] = {
    RECON_SWEEP: {**_COMMON, **_AE, **_SWEEP},
    SURPRISAL: {**_COMMON, **_MELODY_FLOW},
    ENCODING: {**_COMMON, **_MELODY_FLOW, **{"melody.n_eval": 18}, **_ENCODING},
}


def _render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    if isinstance(v, tuple):
        return ",".join(_render_value(x) for x in v)
    return str(v)


def _coerce(key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            if raw not in ("true", "false"):
                raise ValueError("booleans are the literals true/false")
            return raw == "true"
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(x.strip()) for x in raw.split(",") if x.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse value for {key}: {raw!r} ({exc})") from exc


def parse_config_text(text: str) -> dict[str, str]:
    """Raw key -> value strings; syntax errors become ConfigError."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, _, value = body.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or "." not in key:
            raise ConfigError(f"line {lineno}: keys are dotted 'section.key' names")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        out[key] = value
    return out


class ExperimentConfig:
    """Resolved configuration for one experiment kind."""

    def __init__(self, kind: str, values: dict):
        self.kind = kind
        self.values = values

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["experiment.seed"]

    def canonical_text(self) -> str:
        lines = [f"experiment.kind = {self.kind}"]
        lines += [f"{k} = {_render_value(self.values[k])}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:12]

    def derived_seed(self, *labels) -> int:
        """Stable per-purpose integer seeds keyed by the run seed."""
        tag = "\x1f".join(str(x) for x in labels)
        digest = hashlib.sha256(f"{self.seed}\x1f{tag}".encode()).digest()
        return int.from_bytes(digest[:8], "little") >> 1


def load_config(kind: str, path: str | Path | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Defaults for `kind`, overlaid with a config file and explicit overrides."""
    if kind not in DEFAULTS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    values = dict(DEFAULTS[kind])
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        raw.update(parse_config_text(p.read_text(encoding="utf-8")))
    if "experiment.kind" in raw:
        if raw.pop("experiment.kind") != kind:
            raise ConfigError(f"config file is for a different kind than {kind!r}")
    for key, rawval in raw.items():
        if key not in values:
            raise ConfigError(f"unknown key for {kind}: {key}")
        values[key] = _coerce(key, rawval, values[key])
    for key, val in (overrides or {}).items():
        if key not in values:
            raise ConfigError(f"unknown override key for {kind}: {key}")
        values[key] = val
    return ExperimentConfig(kind, values)
