"""Command-line entry point.

Subcommands: gen-data, train-ae, sweep, train-flow, ic, encode, report.
Shared flags: --config <path>, --seed <u64>, --out <dir>, --threads <n>.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import autoencoder as ae_mod
from .. import synthdata as sd
from ..errors import CheckpointError, ConfigError, NumericalError
from ..flow.backend import active_backend
from . import checkpoint as ckpt
from . import config as cfg_mod
from . import encoding, recon, surprisal
from .runio import write_csv_atomic, write_manifest


def _peek_kind(path: str | None) -> str | None:
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    raw = cfg_mod.parse_config_text(p.read_text(encoding="utf-8"))
    return raw.get("experiment.kind")


def _load(kind: str, args) -> cfg_mod.ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["experiment.seed"] = args.seed
    return cfg_mod.load_config(kind, args.config, overrides)


def _set_threads(n: int | None) -> None:
    if not n:
        return
    try:
        import numba
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except ImportError:
        pass


def cmd_gen_data(args) -> list[str]:
    kind = _peek_kind(args.config) or cfg_mod.SURPRISAL
    cfg = _load(kind, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {}
    if kind == cfg_mod.RECON_SWEEP:
        cell_seed = cfg.derived_seed("cell", 0)
        spec = sd.HierarchicalSignalSpec(k_groups=cfg["data.k_groups"],
                                         group_dim=cfg["data.group_dim"],
                                         seed=cell_seed)
        x_all, _, fmap = sd.gen_hierarchical(spec, cfg["data.n_train"] + cfg["data.n_eval"])
        arrays["x_train"] = x_all[: cfg["data.n_train"]]
        arrays["x_eval"] = x_all[cfg["data.n_train"] :]
        arrays["basis"] = fmap.basis
    else:
        for construction in (sd.ALIGNED, sd.UNALIGNED):
            for split, n in (("train", cfg["melody.n_train"]),
                             ("eval", cfg["melody.n_eval"])):
                spec, frames, pitches = surprisal.melody_frames(
                    cfg, construction, split, n)
                arrays[f"{construction}.{split}.frames"] = frames
                arrays[f"{construction}.{split}.pitches"] = pitches.astype(np.float64)
        arrays["transition"] = spec.matrix()
    data_path = out_dir / f"data_{kind}.pald"
    ckpt.save_arrays(data_path, arrays, {"config.hash": cfg.hash, "kind": kind})
    rows = [[name, arrays[name].ndim, "x".join(str(s) for s in arrays[name].shape),
             arrays[name].size] for name in sorted(arrays)]
    write_csv_atomic(out_dir / "data_manifest.csv", ["name", "rank", "dims", "n_elems"],
                     rows)
    write_manifest(out_dir, f"gen-data:{kind}", cfg, active_backend(),
                   [data_path.name, "data_manifest.csv"])
    return [data_path.name, "data_manifest.csv"]


def cmd_train_ae(args) -> list[str]:
    cfg = _load(cfg_mod.RECON_SWEEP, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cell_seed = cfg.derived_seed("cell", 0)
    spec = sd.HierarchicalSignalSpec(k_groups=cfg["data.k_groups"],
                                     group_dim=cfg["data.group_dim"], seed=cell_seed)
    x_all, _, fmap = sd.gen_hierarchical(spec, cfg["data.n_train"] + cfg["data.n_eval"])
    x_train = x_all[: cfg["data.n_train"]]
    weights = ae_mod.power_law_weights(cfg["data.k_groups"], cfg["data.weight_alpha"])
    mode = cfg["ae.nt_mode"]
    outputs = []
    base = None
    if mode == ae_mod.NT_D:
        base = recon.train_cell(cfg, out_dir, ae_mod.NT_NONE, cell_seed, x_train,
                                weights, fmap)
        outputs.append(recon._checkpoint_path(out_dir, cfg, ae_mod.NT_NONE, cell_seed).name)
    recon.train_cell(cfg, out_dir, mode, cell_seed, x_train, weights, fmap,
                     base_model=base)
    outputs.append(recon._checkpoint_path(out_dir, cfg, mode, cell_seed).name)
    write_manifest(out_dir, "train-ae", cfg, active_backend(), outputs)
    return outputs


def cmd_sweep(args) -> list[str]:
    cfg = _load(cfg_mod.RECON_SWEEP, args)
    path = recon.run_recon_sweep(cfg, args.out)
    write_manifest(args.out, "sweep", cfg, active_backend(), [path.name])
    return [path.name]


def cmd_train_flow(args) -> list[str]:
    cfg = _load(cfg_mod.SURPRISAL, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for construction in surprisal.CONSTRUCTIONS:
        surprisal.train_or_load_flow(cfg, out_dir, construction)
        names.append(surprisal.flow_checkpoint_path(out_dir, cfg, construction).name)
    write_manifest(out_dir, "train-flow", cfg, active_backend(), names)
    return names


def cmd_ic(args) -> list[str]:
    cfg = _load(cfg_mod.SURPRISAL, args)
    path = surprisal.run_surprisal(cfg, args.out)
    write_manifest(args.out, "ic", cfg, active_backend(),
                   [path.name, surprisal.IC_SERIES_CSV])
    return [path.name]


def cmd_encode(args) -> list[str]:
    cfg = _load(cfg_mod.ENCODING, args)
    path = encoding.run_encoding(cfg, args.out)
    write_manifest(args.out, "encode", cfg, active_backend(), [path.name])
    return [path.name]


def cmd_report(args) -> list[str]:
    out_dir = Path(args.out)
    if not out_dir.exists():
        raise ConfigError(f"output directory not found: {out_dir}")
    from .report import build_report
    text = build_report(out_dir)
    from .runio import write_text_atomic
    write_text_atomic(out_dir / "report.txt", text)
    return ["report.txt"]


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-ae": cmd_train_ae,
    "sweep": cmd_sweep,
    "train-flow": cmd_train_flow,
    "ic": cmd_ic,
    "encode": cmd_encode,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pald",
                                     description="noised-latent lab experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="config file path")
        p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=None, help="numba thread cap")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _set_threads(args.threads)
    try:
        outputs = COMMANDS[args.command](args)
    except (ConfigError, CheckpointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for name in outputs:
        print(f"wrote {Path(args.out) / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
