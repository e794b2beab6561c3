"""Random spike omission at inference time.

Each spike gets one uniform draw and is deleted when the draw falls below
the omission rate.  Reusing the same stream for every rate makes the
perturbations nested: the spikes removed at 10% are also removed at 20%.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError
from ..rng import substream
from ..signals import SpikeTrainSet
from .crossval import CVResult, RunSpec, predict_trial, trial_inputs
from .metrics import metrics

DEFAULT_RATES = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


def omit_spikes(spikes: SpikeTrainSet, rate: float, rng: np.random.Generator) -> SpikeTrainSet:
    if not 0.0 <= rate <= 1.0:
        raise ParameterError(f"omission rate must be in [0, 1], got {rate}")
    steps, units = spikes.events()
    keep = rng.random(steps.size) >= rate
    raster = np.zeros_like(spikes.raster)
    raster[steps[keep], units[keep]] = True
    return SpikeTrainSet(raster, spikes.dt, spikes.unit_ids)


@dataclass(frozen=True)
class RobustnessRow:
    decoder: str
    rate: float
    direction: str
    finger: int
    repetition: int
    seed: int
    rmse: float
    mae: float
    r2: float


def robustness_sweep(cv: CVResult, dataset, spec: RunSpec, rates=DEFAULT_RATES,
                     seed: int = 0) -> list[RobustnessRow]:
    """Evaluate the clean-trained models of ``cv`` on spike-deleted test trials.

    The omission pattern depends only on ``seed`` and the trial, so every
    decoder sees the same deletions.
    """
    rows = []
    for (direction, test_rep, model_seed), model in sorted(cv.models.items()):
        for t in dataset.select(direction=direction, repetition=test_rep):
            clean = trial_inputs(t, spec)
            for rate in rates:
                rng = substream(seed, "omission", direction, t.finger, t.repetition)
                pred = predict_trial(model, omit_spikes(clean, rate, rng), spec)
                m = metrics(pred, t.force)
                rows.append(RobustnessRow(spec.decoder, float(rate), direction, t.finger,
                                          t.repetition, model_seed, m.rmse, m.mae, m.r2))
    return rows


def degradation_curve(rows: list[RobustnessRow], metric: str = "rmse") -> list[tuple[float, float, float]]:
    """(rate, mean, sd) per rate; seeds averaged first, sd across tasks and directions."""
    out = []
    for rate in sorted({r.rate for r in rows}):
        per_task: dict = {}
        for r in rows:
            if r.rate == rate:
                per_task.setdefault((r.direction, r.finger, r.repetition), []).append(getattr(r, metric))
        vals = np.array([np.mean(v) for _, v in sorted(per_task.items())])
        out.append((rate, float(vals.mean()), float(vals.std())))
    return out
