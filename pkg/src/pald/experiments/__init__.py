"""Experiment orchestration: configs, checkpoints, runners, CLI."""

from .checkpoint import load_arrays, load_model, save_arrays, save_autoencoder, save_flow
from .config import DEFAULTS, ENCODING, RECON_SWEEP, SURPRISAL, ExperimentConfig, load_config
from .encoding import run_encoding
from .recon import run_recon_sweep
from .surprisal import run_surprisal

__all__ = [
    "load_arrays", "load_model", "save_arrays", "save_autoencoder", "save_flow",
    "DEFAULTS", "ENCODING", "RECON_SWEEP", "SURPRISAL", "ExperimentConfig",
    "load_config", "run_encoding", "run_recon_sweep", "run_surprisal",
]
