"""Config grammar, checkpoint format, CLI surface, determinism."""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pald import autoencoder as ae_mod
from pald import flow as flow_mod
from pald.errors import CheckpointError, ConfigError
from pald.experiments import checkpoint as ckpt
from pald.experiments import config as cfg_mod
from pald.experiments.cli import main as cli_main
from pald.numerics.rng import stream

TINY_SURPRISAL = {
    "flow.steps": 40, "flow.warmup": 5, "flow.lr": 1e-3,
    "melody.n_train": 6, "melody.n_eval": 3, "melody.seq_len": 6,
    "ic.t_grid": (0.3, 0.7), "ic.n_draws": 2, "ic.ode_steps": 10,
}


class TestConfigGrammar:
    def test_defaults_complete(self):
        for kind in (cfg_mod.RECON_SWEEP, cfg_mod.SURPRISAL, cfg_mod.ENCODING):
            cfg = cfg_mod.load_config(kind)
            assert cfg["experiment.seed"] == 0

    def test_parse_file(self, tmp_path):
        text = """# a comment
experiment.kind = surprisal
experiment.seed = 7   # trailing comment
flow.steps = 12
ic.t_grid = 0.1,0.5
ic.note_agg = max
"""
        p = tmp_path / "c.cfg"
        p.write_text(text)
        cfg = cfg_mod.load_config(cfg_mod.SURPRISAL, p)
        assert cfg.seed == 7
        assert cfg["flow.steps"] == 12
        assert cfg["ic.t_grid"] == (0.1, 0.5)
        assert cfg["ic.note_agg"] == "max"

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("bogus.key = 1\n")
        with pytest.raises(ConfigError):
            cfg_mod.load_config(cfg_mod.SURPRISAL, p)

    def test_kind_mismatch_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("experiment.kind = recon_sweep\n")
        with pytest.raises(ConfigError):
            cfg_mod.load_config(cfg_mod.SURPRISAL, p)

    def test_bad_boolean_rejected(self, tmp_path):
        # no boolean defaults currently exist; exercise the int path instead
        p = tmp_path / "c.cfg"
        p.write_text("experiment.seed = yes\n")
        with pytest.raises(ConfigError):
            cfg_mod.load_config(cfg_mod.SURPRISAL, p)

    def test_duplicate_key_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("experiment.seed = 1\nexperiment.seed = 2\n")
        with pytest.raises(ConfigError):
            cfg_mod.load_config(cfg_mod.SURPRISAL, p)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            cfg_mod.load_config(cfg_mod.SURPRISAL, "/nonexistent/file.cfg")

    def test_inf_level_parses(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("sweep.snr_levels = inf,2.0\n")
        cfg = cfg_mod.load_config(cfg_mod.RECON_SWEEP, p)
        assert cfg["sweep.snr_levels"][0] == float("inf")

    def test_hash_sensitivity_and_stability(self):
        a = cfg_mod.load_config(cfg_mod.SURPRISAL)
        b = cfg_mod.load_config(cfg_mod.SURPRISAL)
        c = cfg_mod.load_config(cfg_mod.SURPRISAL, overrides={"experiment.seed": 1})
        assert a.hash == b.hash
        assert a.hash != c.hash

    def test_malformed_line_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("not a binding\n")
        with pytest.raises(ConfigError):
            cfg_mod.load_config(cfg_mod.SURPRISAL, p)


class TestCheckpointFormat:
    def test_roundtrip_f32(self, tmp_path):
        arrays = {"b": stream(0, "a").standard_normal((3, 4)),
                  "a.x": stream(1, "a").standard_normal(7)}
        path = tmp_path / "t.pald"
        ckpt.save_arrays(path, arrays, {"note": "hello"})
        loaded, meta = ckpt.load_arrays(path)
        assert meta["note"] == "hello"
        for k in arrays:
            assert np.array_equal(loaded[k], arrays[k].astype(np.float32).astype(np.float64))

    def test_magic_rejected(self, tmp_path):
        path = tmp_path / "t.pald"
        ckpt.save_arrays(path, {"a": np.ones(2)}, {})
        raw = bytearray(path.read_bytes())
        raw[0] = ord("X")
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="magic"):
            ckpt.load_arrays(path)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "t.pald"
        ckpt.save_arrays(path, {"a": np.ones(100)}, {})
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - 10])
        with pytest.raises(CheckpointError):
            ckpt.load_arrays(path)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "t.pald"
        ckpt.save_arrays(path, {"a": np.ones(2)}, {})
        raw = bytearray(path.read_bytes())
        raw[4] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="version"):
            ckpt.load_arrays(path)

    def test_content_hash_guards_payload(self, tmp_path):
        path = tmp_path / "t.pald"
        ckpt.save_arrays(path, {"a": np.ones(4)}, {})
        raw = bytearray(path.read_bytes())
        raw[-1] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="hash"):
            ckpt.load_arrays(path)

    def test_lexicographic_order_enforced(self, tmp_path):
        path = tmp_path / "t.pald"
        ckpt.save_arrays(path, {"z": np.ones(1), "a": np.ones(1)}, {})
        arrays, _ = ckpt.load_arrays(path)
        assert list(arrays) == ["a", "z"]

    def test_autoencoder_roundtrip(self, tmp_path):
        model = ae_mod.AutoencoderModel(ae_mod.AutoencoderConfig(
            input_dim=6, hidden_dim=8, n_hidden=1, latent_dim=4), init_seed=3)
        path = tmp_path / "ae.pald"
        ckpt.save_autoencoder(model, path)
        loaded, meta = ckpt.load_model(path)
        assert meta["model.kind"] == "autoencoder"
        x = stream(2, "x").standard_normal((5, 6))
        a = loaded.decode(loaded.encode(x))
        again, _ = ckpt.load_model(path)
        b = again.decode(again.encode(x))
        assert np.array_equal(a, b)

    def test_flow_roundtrip_preserves_ic(self, tmp_path):
        model = flow_mod.FlowModel(flow_mod.FlowConfig(latent_dim=3,
                                                       context_hidden=4,
                                                       velocity_hidden=6),
                                   init_seed=4)
        for k, p in model.params.items():
            p.data = p.data + 0.1 * stream(5, k).standard_normal(p.data.shape)
        path = tmp_path / "f.pald"
        ckpt.save_flow(model, path)
        m1, _ = ckpt.load_model(path)
        ckpt.save_flow(m1, path)
        m2, _ = ckpt.load_model(path)
        seq = stream(6, "s").standard_normal((5, 3))
        a = flow_mod.sequence_ic(m1, seq, 0.4, 3, stream(7, "r"), ode_steps=20)
        b = flow_mod.sequence_ic(m2, seq, 0.4, 3, stream(7, "r"), ode_steps=20)
        assert np.array_equal(a.ic_nats, b.ic_nats)  # f32 roundtrip is idempotent


def _run_cli(args):
    return cli_main(args)


class TestCli:
    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nope = 1\n")
        rc = _run_cli(["ic", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_missing_config_exit_code(self, tmp_path):
        rc = _run_cli(["ic", "--config", str(tmp_path / "nope.cfg"),
                       "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_gen_data_and_manifest(self, tmp_path):
        cfgp = tmp_path / "c.cfg"
        cfgp.write_text("experiment.kind = surprisal\nmelody.n_train = 4\n"
                        "melody.n_eval = 2\nmelody.seq_len = 5\n")
        out = tmp_path / "o"
        rc = _run_cli(["gen-data", "--config", str(cfgp), "--out", str(out)])
        assert rc == 0
        arrays, meta = ckpt.load_arrays(out / "data_surprisal.pald")
        assert "aligned.train.frames" in arrays
        assert arrays["aligned.train.frames"].shape == (4, 5, 8)
        assert (out / "data_manifest.csv").exists()
        assert (out / "run_manifest.txt").exists()

    def test_ic_subcommand_and_determinism(self, tmp_path):
        cfgp = tmp_path / "c.cfg"
        lines = ["experiment.kind = surprisal"]
        lines += [f"{k} = " + (",".join(str(x) for x in v) if isinstance(v, tuple)
                               else str(v)) for k, v in TINY_SURPRISAL.items()]
        cfgp.write_text("\n".join(lines) + "\n")
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert _run_cli(["ic", "--config", str(cfgp), "--out", str(out1)]) == 0
        assert _run_cli(["ic", "--config", str(cfgp), "--out", str(out2)]) == 0
        for name in ("surprisal.csv", "ic_series.csv", "run_manifest.txt"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_checkpoint_reuse_is_transparent(self, tmp_path):
        """train-flow then ic reuses the checkpoints: byte-identical CSVs."""
        cfgp = tmp_path / "c.cfg"
        lines = ["experiment.kind = surprisal"]
        lines += [f"{k} = " + (",".join(str(x) for x in v) if isinstance(v, tuple)
                               else str(v)) for k, v in TINY_SURPRISAL.items()]
        cfgp.write_text("\n".join(lines) + "\n")
        fresh, cached = tmp_path / "fresh", tmp_path / "cached"
        assert _run_cli(["ic", "--config", str(cfgp), "--out", str(fresh)]) == 0
        assert _run_cli(["train-flow", "--config", str(cfgp), "--out",
                         str(cached)]) == 0
        flow_files = sorted(Path(cached).glob("flow_*.pald"))
        assert len(flow_files) == 2
        stamps = [p.stat().st_mtime_ns for p in flow_files]
        assert _run_cli(["ic", "--config", str(cfgp), "--out", str(cached)]) == 0
        assert [p.stat().st_mtime_ns for p in flow_files] == stamps  # reused
        assert ((fresh / "surprisal.csv").read_bytes()
                == (cached / "surprisal.csv").read_bytes())

    def test_entrypoint_subprocess(self, tmp_path):
        """The installed console surface: bad flags exit 2 via argparse."""
        proc = subprocess.run([sys.executable, "-m", "pald.experiments.cli",
                               "frobnicate"], capture_output=True)
        assert proc.returncode == 2

    def test_report_without_outputs(self, tmp_path):
        out = tmp_path / "empty"
        out.mkdir()
        assert _run_cli(["report", "--out", str(out)]) == 0
        assert "no experiment CSVs" in (out / "report.txt").read_text()
