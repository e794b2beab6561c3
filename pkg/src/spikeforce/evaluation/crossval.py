"""Two-fold cross-validation over task repetitions.

Fold 1 trains on repetition 1 and tests on repetition 2; fold 2 swaps them.
Spiking decoders are trained once per (direction, fold, seed); the baseline
is deterministic and is fitted once per (direction, fold).  Every test trial
gives one row of metrics, so a full preset yields 5 fingers x 2 directions x
2 repetitions = 20 per-task values per seed.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..baseline import WindowSpec, fit_baseline, predict_baseline
from ..decoders import DecoderConfig, build_decoder
from ..encoding import EncoderConfig, encode
from ..errors import ConfigError, DatasetError
from ..rng import substream
from ..training import TrainConfig, infer, train
from .metrics import MetricReport, mean_report, metrics

DECODERS = ("baseline", "li", "lif", "encoded-li")
FOLDS = ((1, 2), (2, 1))  # (train repetition, test repetition)
WORKERS_ENV = "SPIKEFORCE_WORKERS"


@dataclass(frozen=True)
class RunSpec:
    decoder: str
    train: TrainConfig = TrainConfig()
    decoder_config: DecoderConfig = DecoderConfig()
    encoder: EncoderConfig = EncoderConfig()
    window: WindowSpec = WindowSpec()
    baseline_intercept: bool = False
    segment_s: float = 10.0

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ConfigError(f"unknown decoder {self.decoder!r}; expected one of {DECODERS}")


@dataclass(frozen=True)
class TaskRow:
    decoder: str
    direction: str
    finger: int
    repetition: int  # test repetition
    seed: int
    rmse: float
    mae: float
    r2: float


@dataclass
class CVResult:
    decoder: str
    rows: list[TaskRow]
    models: dict = field(default_factory=dict)  # (direction, test_rep, seed) -> model
    losses: dict = field(default_factory=dict)  # same keys -> per-epoch losses

    @property
    def seeds(self) -> list[int]:
        return sorted({r.seed for r in self.rows})

    def seed_means(self) -> dict[int, MetricReport]:
        """Mean over every test trial, for each seed."""
        out = {}
        for s in self.seeds:
            rows = [r for r in self.rows if r.seed == s]
            out[s] = mean_report(MetricReport(r.rmse, r.mae, r.r2) for r in rows)
        return out

    def summary(self) -> dict[str, float]:
        """Seed-averaged RMSE/MAE/R^2 and their sd across seeds."""
        per_seed = list(self.seed_means().values())
        out = {}
        for name in ("rmse", "mae", "r2"):
            v = np.array([getattr(r, name) for r in per_seed])
            out[name] = float(v.mean())
            out[f"{name}_sd"] = float(v.std())
        out["n_seeds"] = len(per_seed)
        return out

    def per_task(self, metric: str = "rmse") -> dict[tuple[str, int, int], float]:
        """One value per (direction, finger, repetition), averaged over seeds."""
        acc: dict = {}
        for r in self.rows:
            acc.setdefault((r.direction, r.finger, r.repetition), []).append(getattr(r, metric))
        return {k: float(np.mean(v)) for k, v in sorted(acc.items())}


def trial_inputs(trial, spec: RunSpec):
    """Input spike trains for a trial on the given path (encoded channels or motor units)."""
    if spec.decoder == "encoded-li":
        if trial.emg is None:
            raise DatasetError(f"trial {trial.key} has no EMG, needed by the encoding path")
        return encode(trial.emg, spec.encoder)
    return trial.spikes


def fit_model(spec: RunSpec, pairs, seed: int, tag=(), base_seed: int = 0):
    """Train one model on ``(spikes, force)`` pairs; returns ``(model, losses)``.

    Initialisation and batch order come from the ``init`` and ``training``
    sub-streams of ``base_seed``, keyed by ``tag`` and the replicate ``seed``.
    """
    if spec.decoder == "baseline":
        return fit_baseline(pairs, spec.window, spec.baseline_intercept), []
    kind = "lif" if spec.decoder == "lif" else "li"
    model = build_decoder(kind, pairs[0][0].n_units, spec.decoder_config,
                          substream(base_seed, "init", spec.decoder, *tag, seed))
    result = train(model, pairs, spec.train, substream(base_seed, "training", spec.decoder, *tag, seed))
    return result.model, result.losses


def predict_trial(model, spikes, spec: RunSpec):
    if spec.decoder == "baseline":
        return predict_baseline(model, spikes, spec.window)
    return infer(model, spikes, segment_s=spec.segment_s)


def split_folds(dataset, direction: str):
    trials = dataset.select(direction=direction)
    reps = {t.repetition for t in trials}
    if reps != {1, 2}:
        raise DatasetError(f"{direction}: 2-fold cross-validation needs repetitions 1 and 2, found {sorted(reps)}")
    for f in {t.finger for t in trials}:
        have = sorted(t.repetition for t in trials if t.finger == f)
        if have != [1, 2]:
            raise DatasetError(f"{direction} finger {f}: repetitions {have}, expected [1, 2]")
    return {rep: [t for t in trials if t.repetition == rep] for rep in (1, 2)}


def _job(args):
    spec, train_trials, test_trials, direction, test_rep, seed, base_seed = args
    pairs = [(trial_inputs(t, spec), t.force) for t in train_trials]
    model, losses = fit_model(spec, pairs, seed, (direction, test_rep), base_seed)
    rows = []
    for t in test_trials:
        pred = predict_trial(model, trial_inputs(t, spec), spec)
        m = metrics(pred, t.force)
        rows.append(TaskRow(spec.decoder, direction, t.finger, t.repetition, seed, m.rmse, m.mae, m.r2))
    return (direction, test_rep, seed), model, losses, rows


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def map_jobs(fn, jobs, workers: int | None = None):
    """Run jobs serially or on a process pool; results keep job order either way."""
    workers = worker_count(workers)
    if workers == 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def cross_validate(dataset, spec: RunSpec, seeds=(0,), directions=None,
                   workers: int | None = None, base_seed: int = 0) -> CVResult:
    """Train and test every (direction, fold, seed) combination.

    ``seeds`` are replicate ids; together with ``base_seed`` they select the
    random streams of each training run.
    """
    directions = list(directions or dataset.directions)
    seeds = [int(s) for s in seeds]
    if spec.decoder == "baseline":
        seeds = seeds[:1]
    jobs = []
    for d in directions:
        by_rep = split_folds(dataset, d)
        for train_rep, test_rep in FOLDS:
            for s in seeds:
                jobs.append((spec, by_rep[train_rep], by_rep[test_rep], d, test_rep, s, base_seed))
    result = CVResult(spec.decoder, [])
    for key, model, losses, rows in map_jobs(_job, jobs, workers):
        result.models[key] = model
        result.losses[key] = losses
        result.rows.extend(rows)
    return result
