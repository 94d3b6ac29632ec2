"""PALD checkpoint container: named float32 arrays plus a metadata block.

Layout (little-endian):
    magic   4 bytes  b"PALD"
    version u32      (currently 1)
    metalen u64      UTF-8 metadata byte count
    meta    bytes    "key = value" lines; includes content.sha256
    count   u32      array count
    per array, lexicographic by name:
        namelen u16, name utf8, rank u8, dims u32 * rank, data f32 * prod(dims)

The content hash covers the serialized array section; loads verify it, the
magic, the version, and every size field before touching the payload.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .. import autoencoder as ae_mod
from .. import flow as flow_mod
from .. import noise as noise_mod
from ..errors import CheckpointError

MAGIC = b"PALD"
VERSION = 1
MAX_RANK = 8
MAX_DIM = 2 ** 31 - 1
MAX_ELEMS = 2 ** 33


def _arrays_blob(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name], dtype=np.float32)
        if arr.ndim > MAX_RANK:
            raise CheckpointError(f"array {name} rank {arr.ndim} exceeds {MAX_RANK}")
        if any(dim > MAX_DIM for dim in arr.shape):
            raise CheckpointError(f"array {name} dimension overflow")
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f4").tobytes(order="C"))
    return b"".join(parts)


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray],
                meta: dict[str, str]) -> None:
    """Write a checkpoint atomically (temp file + rename)."""
    blob = _arrays_blob(arrays)
    meta = dict(meta)
    meta["content.sha256"] = hashlib.sha256(blob).hexdigest()
    meta_text = "".join(f"{k} = {meta[k]}\n" for k in sorted(meta))
    meta_bytes = meta_text.encode("utf-8")
    payload = MAGIC + struct.pack("<I", VERSION)
    payload += struct.pack("<Q", len(meta_bytes)) + meta_bytes + blob
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(path)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint file")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    buf = Path(path).read_bytes()
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise CheckpointError("bad magic: not a PALD checkpoint")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = r.unpack("<Q")
    meta_text = r.take(meta_len).decode("utf-8")
    meta: dict[str, str] = {}
    for line in meta_text.splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            meta[key] = value
    blob = buf[r.pos :]
    stored = meta.get("content.sha256", "")
    if hashlib.sha256(blob).hexdigest() != stored:
        raise CheckpointError("content hash mismatch: corrupted checkpoint")
    (count,) = r.unpack("<I")
    arrays: dict[str, np.ndarray] = {}
    prev_name = ""
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        if name <= prev_name:
            raise CheckpointError("array names out of lexicographic order")
        prev_name = name
        (rank,) = r.unpack("<B")
        if rank > MAX_RANK:
            raise CheckpointError(f"array {name} rank {rank} exceeds {MAX_RANK}")
        dims = r.unpack(f"<{rank}I") if rank else ()
        n_elems = int(np.prod(dims)) if rank else 1
        if n_elems > MAX_ELEMS:
            raise CheckpointError(f"array {name} element count overflow")
        data = np.frombuffer(r.take(4 * n_elems), dtype="<f4").reshape(dims)
        arrays[name] = data.astype(np.float64)
    if r.pos != len(buf):
        raise CheckpointError("trailing bytes after the last array")
    return arrays, meta


# -- model persistence -----------------------------------------------------------


def save_autoencoder(model: ae_mod.AutoencoderModel, path: str | Path,
                     extra_meta: dict | None = None) -> None:
    cfg = model.cfg
    meta = {
        "model.kind": "autoencoder",
        "ae.input_dim": str(cfg.input_dim),
        "ae.hidden_dim": str(cfg.hidden_dim),
        "ae.n_hidden": str(cfg.n_hidden),
        "ae.latent_dim": str(cfg.latent_dim),
        "ae.bottleneck": cfg.bottleneck,
        "ae.nt_mode": cfg.nt_mode,
        "ae.m": repr(cfg.schedule.m),
        "ae.s": repr(cfg.schedule.s),
        "ae.gamma": repr(cfg.schedule.gamma),
    }
    meta.update({str(k): str(v) for k, v in (extra_meta or {}).items()})
    save_arrays(path, {k: p.data for k, p in model.params.items()}, meta)


def save_flow(model: flow_mod.FlowModel, path: str | Path,
              extra_meta: dict | None = None) -> None:
    cfg = model.cfg
    meta = {
        "model.kind": "flow",
        "flow.latent_dim": str(cfg.latent_dim),
        "flow.context_hidden": str(cfg.context_hidden),
        "flow.velocity_hidden": str(cfg.velocity_hidden),
        "flow.temb_pairs": str(cfg.temb_pairs),
        "flow.m": repr(cfg.schedule.m),
        "flow.s": repr(cfg.schedule.s),
        "flow.gamma": repr(cfg.schedule.gamma),
    }
    meta.update({str(k): str(v) for k, v in (extra_meta or {}).items()})
    save_arrays(path, {k: p.data for k, p in model.params.items()}, meta)


def load_model(path: str | Path):
    """Rebuild the saved model; parameters carry float32 precision."""
    arrays, meta = load_arrays(path)
    kind = meta.get("model.kind")
    if kind == "autoencoder":
        cfg = ae_mod.AutoencoderConfig(
            input_dim=int(meta["ae.input_dim"]),
            hidden_dim=int(meta["ae.hidden_dim"]),
            n_hidden=int(meta["ae.n_hidden"]),
            latent_dim=int(meta["ae.latent_dim"]),
            bottleneck=meta["ae.bottleneck"],
            nt_mode=meta["ae.nt_mode"],
            schedule=noise_mod.NoiseSchedule(m=float(meta["ae.m"]),
                                             s=float(meta["ae.s"]),
                                             gamma=float(meta["ae.gamma"])))
        model = ae_mod.AutoencoderModel(cfg, init_seed=0)
    elif kind == "flow":
        cfg = flow_mod.FlowConfig(
            latent_dim=int(meta["flow.latent_dim"]),
            context_hidden=int(meta["flow.context_hidden"]),
            velocity_hidden=int(meta["flow.velocity_hidden"]),
            temb_pairs=int(meta["flow.temb_pairs"]),
            schedule=noise_mod.NoiseSchedule(m=float(meta["flow.m"]),
                                             s=float(meta["flow.s"]),
                                             gamma=float(meta["flow.gamma"])))
        model = flow_mod.FlowModel(cfg, init_seed=0)
    else:
        raise CheckpointError(f"unknown model kind {kind!r}")
    params = model.params
    if set(params) != set(arrays):
        raise CheckpointError("checkpoint arrays do not match the model topology")
    for name, arr in arrays.items():
        if params[name].data.shape != arr.shape:
            raise CheckpointError(f"shape mismatch for {name}")
        params[name].data = np.ascontiguousarray(arr)
    return model, meta
