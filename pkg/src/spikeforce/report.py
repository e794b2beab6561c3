"""Fixed-width summary tables rendered from a run directory."""
from __future__ import annotations

import csv
import math
from pathlib import Path

from .errors import ArtifactError

SUMMARY = "summary.csv"
ROBUSTNESS = "robustness_summary.csv"
FOOTPRINT = "footprint.csv"
DECODER_ORDER = ("baseline", "li", "lif", "encoded-li")
DECODER_LABEL = {"baseline": "Baseline", "li": "SNN (LI)", "lif": "SNN (LIF)", "encoded-li": "Encoding SNN (LI)"}
GAP = "--"


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _pm(mean, sd, digits=2) -> str:
    m, s = float(mean), float(sd)
    if math.isnan(m):
        return GAP
    return f"{m:.{digits}f} ± {s:.{digits}f}"


def _table(header, rows) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
    out = [line, "-" * len(line)]
    out += ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(out)


def decoder_table(rows: list[dict], decoders=None) -> str:
    """Subject x input x decoder rows with RMSE / MAE / R^2 (mean ± sd across seeds).

    Decoders listed in ``decoders`` but absent from ``rows`` appear as gap rows.
    """
    keyed = {(r["subject"], r["direction"], r["decoder"]): r for r in rows}
    subjects = sorted({r["subject"] for r in rows})
    directions = [d for d in ("flexion", "extension") if any(r["direction"] == d for r in rows)]
    wanted = [d for d in DECODER_ORDER if d in set(decoders or ()) | {r["decoder"] for r in rows}]
    body = []
    for subj in subjects:
        for d in directions:
            for dec in wanted:
                r = keyed.get((subj, d, dec))
                if r is None:
                    body.append((subj, d, DECODER_LABEL[dec], GAP, GAP, GAP, "missing"))
                    continue
                body.append((subj, d, DECODER_LABEL[dec], _pm(r["rmse"], r["rmse_sd"]),
                             _pm(r["mae"], r["mae_sd"]), _pm(r["r2"], r["r2_sd"]), r["n_seeds"]))
    return _table(("Subject", "Direction", "Decoder", "RMSE (%MVC)", "MAE (%MVC)", "R2", "Seeds"), body)


def robustness_table(rows: list[dict]) -> str:
    """One row per (model, omission level): RMSE mean ± sd and change from clean."""
    body = []
    for dec in DECODER_ORDER:
        for r in (r for r in rows if r["decoder"] == dec):
            body.append((DECODER_LABEL[dec], f"{float(r['omission_pct']):g}",
                         _pm(r["rmse_mean"], r["rmse_sd"]), f"{float(r['delta_vs_clean']):+.2f}"))
    return _table(("Model", "Omission Level (%)", "RMSE (%MVC)", "Δ vs clean"), body)


def footprint_table(rows: list[dict]) -> str:
    body = [(DECODER_LABEL.get(r["decoder"], r["decoder"]), r["direction"], r["total_params"],
             r["trainable_params"], r["parameter_memory"], r["decomposition_memory"],
             f"{float(r['latency_ms']):g}", r.get("trained_nonzero") or GAP) for r in rows]
    return _table(("Decoder", "Direction", "Total", "Trainable", "Param memory (B)",
                   "Decomposition memory (B)", "Latency (ms)", "Trained nonzero"), body)


def report_tables(run_dir) -> str:
    """Render every table whose source CSV is present; flag the missing ones."""
    run_dir = Path(run_dir)
    files = {name: run_dir / name for name in (SUMMARY, ROBUSTNESS, FOOTPRINT)}
    missing = [n for n, p in files.items() if not p.exists()]
    if len(missing) == len(files):
        raise ArtifactError(f"{run_dir}: no run artifacts; missing {', '.join(missing)}")
    parts = []
    if files[SUMMARY].exists():
        parts.append("Decoder performance\n" + decoder_table(_read(files[SUMMARY])))
    if files[ROBUSTNESS].exists():
        parts.append("Robustness to spike omission\n" + robustness_table(_read(files[ROBUSTNESS])))
    if files[FOOTPRINT].exists():
        parts.append("Footprint\n" + footprint_table(_read(files[FOOTPRINT])))
    if missing:
        parts.append("missing artifacts (tables omitted): " + ", ".join(missing))
    return "\n\n".join(parts) + "\n"
