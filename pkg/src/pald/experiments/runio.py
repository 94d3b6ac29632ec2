"""Output plumbing shared by the experiment runners: atomic writes, CSV
emission with repr-rendered floats (deterministic, full precision), and the
plain-text run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from pathlib import Path


def render_cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_text_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def write_csv_atomic(path: str | Path, columns: list[str], rows: list) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([render_cell(v) for v in row])
    write_text_atomic(path, buf.getvalue())


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: str | Path, kind: str, config, backend: str,
                   outputs: list[str]) -> Path:
    """Run manifest: config echo plus output digests.  No timestamps, so a
    rerun with the same config hash reproduces the manifest byte for byte."""
    out_dir = Path(out_dir)
    lines = [f"kind: {kind}", f"config_hash: {config.hash}",
             f"seed: {config.seed}", f"backend: {backend}", "", "[config]"]
    lines += config.canonical_text().rstrip("\n").split("\n")
    lines += ["", "[outputs]"]
    for name in outputs:
        lines.append(f"{name} sha256={file_sha256(out_dir / name)}")
    path = out_dir / "run_manifest.txt"
    write_text_atomic(path, "\n".join(lines) + "\n")
    return path
