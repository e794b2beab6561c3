"""One reproducible experiment: data, cross-validation, robustness, footprint.

Everything is written inside the output directory.  Files contain no
timestamps or timings, floats are written with ``repr`` and jobs are merged
in a fixed order, so an identical config and seed reproduce every file byte
for byte.  ``manifest.json`` lists each artifact with its SHA-256.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .config import ExperimentConfig, config_hash, dump_config
from .datasets import load_dataset_dir
from .decoders import DecoderConfig
from .encoding import EncoderConfig, calibrate_thresholds
from .evaluation import (RunSpec, cross_validate, degradation_curve, footprint, mann_whitney_u,
                         robustness_sweep)
from .modelio import dumps_model
from .signals import N_CHANNELS
from .synthgen import SynthConfig, build_dataset, get_preset
from .training import TrainConfig

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RUN_FORMAT = "spikeforce-run 1"

METRIC_COLUMNS = ("decoder", "direction", "finger", "repetition", "seed", "rmse", "mae", "r2")
SUMMARY_COLUMNS = ("subject", "input", "decoder", "direction", "rmse", "rmse_sd", "mae", "mae_sd",
                   "r2", "r2_sd", "n_seeds")
LOSS_COLUMNS = ("decoder", "direction", "test_repetition", "seed", "epoch", "mean_loss")
ROBUST_COLUMNS = ("decoder", "rate", "direction", "finger", "repetition", "seed", "rmse", "mae", "r2")
ROBUST_SUMMARY_COLUMNS = ("decoder", "omission_pct", "rmse_mean", "rmse_sd", "delta_vs_clean")
FOOTPRINT_COLUMNS = ("decoder", "direction", "n_inputs", "total_params", "trainable_params",
                     "nonzero_params", "parameter_memory", "decomposition_memory", "latency_ms",
                     "total_params_full", "trained_nonzero")
STATS_COLUMNS = ("decoder_a", "decoder_b", "n_a", "n_b", "u", "p", "method")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


@dataclass
class RunResult:
    out_dir: Path
    artifacts: dict[str, str] = field(default_factory=dict)  # relative path -> sha256
    summary: list[dict] = field(default_factory=list)
    dry_run: bool = False


class _Writer:
    def __init__(self, root: Path):
        self.root = root
        self.hashes: dict[str, str] = {}

    def write(self, rel: str, data) -> Path:
        data = data.encode("utf-8") if isinstance(data, str) else data
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.hashes[rel] = hashlib.sha256(data).hexdigest()
        return path


def versions() -> dict[str, str]:
    return {"spikeforce": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pyyaml": yaml.__version__, "python": platform.python_version()}


def load_data(cfg: ExperimentConfig):
    ds_cfg = cfg.dataset
    if ds_cfg.path:
        data = load_dataset_dir(ds_cfg.path)
        wanted = set(ds_cfg.directions)
        data.trials = [t for t in data.trials if t.direction in wanted and t.finger in ds_cfg.fingers]
        return data
    synth = SynthConfig(preset=ds_cfg.preset, directions=ds_cfg.directions, fingers=ds_cfg.fingers,
                        isi_cov=ds_cfg.isi_cov, common_drive_sd=ds_cfg.common_drive_sd,
                        gain_jitter=ds_cfg.gain_jitter, emg="encoded-li" in cfg.decoders,
                        emg_noise_sd=ds_cfg.emg_noise_sd)
    return build_dataset(synth, seed=cfg.seed)


def encoder_config(cfg: ExperimentConfig, data) -> EncoderConfig:
    enc = cfg.encoder
    if enc.calibrate_hz is not None:
        blocks = [t.emg for t in data.trials if t.emg is not None]
        result = calibrate_thresholds(blocks, enc.calibrate_hz, enc.calibrate_tolerance,
                                      EncoderConfig(tau_m_enc=enc.tau_m_enc))
        log.info("calibrated encoder thresholds %s (rates %s Hz)", result.thresholds, result.rates)
        return EncoderConfig(enc.tau_m_enc, result.thresholds)
    thresholds = enc.thresholds or get_preset(data.subject).encoder_thresholds
    return EncoderConfig(enc.tau_m_enc, tuple(thresholds))


def run_spec(cfg: ExperimentConfig, decoder: str, encoder: EncoderConfig) -> RunSpec:
    t, d = cfg.train, cfg.decoder
    train_cfg = TrainConfig(epochs=t.epochs, batch_size=t.batch_size, lr=t.lr, window_s=t.window_s,
                            window_overlap=t.window_overlap, surrogate_slope=t.surrogate_slope,
                            detach_reset=t.detach_reset)
    dec_cfg = DecoderConfig(li_tau_m=d.li_tau_m, lif_tau_m_mean=d.lif_tau_m_mean, lif_tau_m_sd=d.lif_tau_m_sd,
                            threshold=d.threshold, output_tau=d.output_tau, reset_mode=d.reset_mode,
                            train_lif_tau_m=d.train_lif_tau_m)
    return RunSpec(decoder, train_cfg, dec_cfg, encoder)


def _manifest(cfg: ExperimentConfig, hashes: dict[str, str], dry_run: bool) -> str:
    doc = {
        "format": RUN_FORMAT,
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "seeds": list(cfg.seeds),
        "decoders": list(cfg.decoders),
        "dry_run": dry_run,
        "versions": versions(),
        "artifacts": dict(sorted(hashes.items())),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_experiment(cfg: ExperimentConfig, out_dir=None, dry_run: bool = False,
                   workers: int | None = None) -> RunResult:
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    w = _Writer(out)
    w.write("config.yaml", dump_config(cfg))
    if dry_run:
        (out / MANIFEST).write_text(_manifest(cfg, w.hashes, True))
        return RunResult(out, dict(w.hashes), dry_run=True)

    data = load_data(cfg)
    encoder = encoder_config(cfg, data) if "encoded-li" in cfg.decoders else EncoderConfig()
    counts = data.unit_counts()
    metric_rows, summary_rows, loss_rows, robust_rows, robust_summary, foot_rows = [], [], [], [], [], []
    per_task = {}
    for decoder in cfg.decoders:
        log.info("decoder %s", decoder)
        spec = run_spec(cfg, decoder, encoder)
        cv = cross_validate(data, spec, cfg.seeds, workers=workers, base_seed=cfg.seed)
        metric_rows += [(r.decoder, r.direction, r.finger, r.repetition, r.seed, r.rmse, r.mae, r.r2)
                        for r in cv.rows]
        per_task[decoder] = cv.per_task("rmse")
        for direction in data.directions:
            sub = type(cv)(decoder, [r for r in cv.rows if r.direction == direction])
            s = sub.summary()
            summary_rows.append((data.subject, "encoded iEMG" if decoder == "encoded-li" else "MU spikes",
                                 decoder, direction, s["rmse"], s["rmse_sd"], s["mae"], s["mae_sd"],
                                 s["r2"], s["r2_sd"], s["n_seeds"]))
            n_in = N_CHANNELS if decoder == "encoded-li" else counts[direction]
            model = cv.models.get((direction, 1, cv.seeds[0]))
            fp = footprint(decoder, n_in, model=model)
            foot_rows.append((decoder, direction, fp.n_inputs, fp.total_params, fp.trainable_params,
                              fp.nonzero_params, fp.parameter_memory, fp.decomposition_memory,
                              fp.latency_ms, fp.total_params_full,
                              "" if fp.trained_nonzero is None else fp.trained_nonzero))
        for (direction, test_rep, seed), losses in sorted(cv.losses.items()):
            loss_rows += [(decoder, direction, test_rep, seed, e + 1, v) for e, v in enumerate(losses)]
        if cfg.output.save_models:
            for (direction, test_rep, seed), model in sorted(cv.models.items()):
                w.write(f"models/{decoder}_{direction}_test{test_rep}_seed{seed}.sfm",
                        dumps_model(model, {"decoder": decoder, "direction": direction,
                                            "test_repetition": test_rep, "seed": seed}))
        if cfg.robustness.enabled:
            rows = robustness_sweep(cv, data, spec, cfg.robustness.rates, seed=cfg.seed)
            robust_rows += [(r.decoder, r.rate, r.direction, r.finger, r.repetition, r.seed,
                             r.rmse, r.mae, r.r2) for r in rows]
            curve = degradation_curve(rows)
            clean = curve[0][1] if curve and curve[0][0] == 0.0 else float("nan")
            robust_summary += [(decoder, round(100 * rate, 6), mean, sd, mean - clean)
                               for rate, mean, sd in curve]

    stats_rows = []
    names = list(per_task)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ra, rb = list(per_task[a].values()), list(per_task[b].values())
            res = mann_whitney_u(ra, rb)
            stats_rows.append((a, b, len(ra), len(rb), res.u, res.p, res.method))

    w.write("metrics.csv", csv_text(METRIC_COLUMNS, metric_rows))
    w.write("summary.csv", csv_text(SUMMARY_COLUMNS, summary_rows))
    w.write("footprint.csv", csv_text(FOOTPRINT_COLUMNS, foot_rows))
    w.write("stats.csv", csv_text(STATS_COLUMNS, stats_rows))
    if loss_rows:
        w.write("loss_curves.csv", csv_text(LOSS_COLUMNS, loss_rows))
    if cfg.robustness.enabled:
        w.write("robustness.csv", csv_text(ROBUST_COLUMNS, robust_rows))
        w.write("robustness_summary.csv", csv_text(ROBUST_SUMMARY_COLUMNS, robust_summary))
    (out / MANIFEST).write_text(_manifest(cfg, w.hashes, False))
    summary = [dict(zip(SUMMARY_COLUMNS, r)) for r in summary_rows]
    return RunResult(out, dict(w.hashes), summary)


def read_manifest(run_dir) -> dict:
    return json.loads((Path(run_dir) / MANIFEST).read_text())


def verify_artifacts(run_dir) -> list[str]:
    """Artifacts whose current checksum differs from the manifest (or that are missing)."""
    run_dir = Path(run_dir)
    bad = []
    for rel, digest in read_manifest(run_dir)["artifacts"].items():
        p = run_dir / rel
        if not p.exists() or hashlib.sha256(p.read_bytes()).hexdigest() != digest:
            bad.append(rel)
    return bad
