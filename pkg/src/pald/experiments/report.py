"""Plain-text summaries of whatever experiment CSVs an output directory holds."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from .. import stats


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _recon_section(rows: list[dict]) -> list[str]:
    lines = ["[reconstruction sweep]"]
    table = defaultdict(list)  # (mode, snr) -> weighted errors across seeds
    ordering = defaultdict(list)  # mode -> spearman(group rank, error) per (seed, snr<inf)
    by_cell = defaultdict(dict)
    for r in rows:
        key = (r["nt_mode"], r["snr"])
        by_cell[(r["nt_mode"], r["snr"], r["seed"])][int(r["group"])] = float(r["group_sq_error"])
        table[key].append(float(r["weighted_error"]))
    for (mode, snr, _seed), groups in by_cell.items():
        if snr != "inf":
            errs = [groups[g] for g in sorted(groups)]
            ordering[mode].append(stats.spearman(np.arange(len(errs)), errs))
    for (mode, snr) in sorted(table, key=lambda k: (k[0], k[1])):
        lines.append(f"  nt={mode:<4} snr={snr:>5}: weighted error mean over seeds = "
                     f"{np.mean(table[(mode, snr)]):.4f}")
    for mode in sorted(ordering):
        lines.append(f"  nt={mode:<4} mean spearman(group rank, error) at snr<inf = "
                     f"{np.mean(ordering[mode]):.3f}")
    return lines


def _surprisal_section(rows: list[dict]) -> list[str]:
    lines = ["[surprisal correlation vs noise level]"]
    by_con = defaultdict(list)
    for r in rows:
        by_con[r["construction"]].append((float(r["t"]), float(r["rho"]),
                                          r["significant"] == "1"))
    for con in sorted(by_con):
        pts = sorted(by_con[con])
        best_t, best_rho, _ = max(pts, key=lambda p: p[1])
        interior = pts[0][0] < best_t < pts[-1][0]
        curve = " ".join(f"{t:.1f}:{rho:+.3f}" for t, rho, _ in pts)
        lines.append(f"  {con}: peak rho={best_rho:.3f} at t={best_t:.1f} "
                     f"(interior={interior})")
        lines.append(f"    {curve}")
    return lines


def _encoding_section(rows: list[dict]) -> list[str]:
    lines = ["[neural encoding]"]
    for r in rows:
        lines.append(f"  {r['construction']:<9} t={float(r['t']):.1f}: "
                     f"mean delta r={float(r['mean_participant_delta_r']):+.4f} "
                     f"(se {float(r['se_participant_delta_r']):.4f}), "
                     f"significant channels={r['n_significant']} "
                     f"(coupled {r['n_sig_coupled']}, uncoupled {r['n_sig_uncoupled']})")
    return lines


def build_report(out_dir: Path) -> str:
    sections = []
    recon_path = out_dir / "recon_sweep.csv"
    if recon_path.exists():
        sections += _recon_section(_read_csv(recon_path)) + [""]
    surp_path = out_dir / "surprisal.csv"
    if surp_path.exists():
        sections += _surprisal_section(_read_csv(surp_path)) + [""]
    enc_path = out_dir / "encoding_summary.csv"
    if enc_path.exists():
        sections += _encoding_section(_read_csv(enc_path)) + [""]
    if not sections:
        sections = ["no experiment CSVs found", ""]
    return "\n".join(["pald run report", ""] + sections)
