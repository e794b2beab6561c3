"""Windowed spike counts plus multi-output linear regression.

Counts are taken over 80 ms windows with 50% overlap (a 40 ms hop), min-max
normalised with statistics from the training data only, and mapped to the
five finger forces by least squares.  Each prediction is stamped at the last
step of its window and held until the next one arrives.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import DataError, EmptyFeatureError, ParameterError, ShapeError
from .signals import DEFAULT_DT_MS, ForceTrajectory, SpikeTrainSet, TimeGrid

RIDGE = 1e-8


@dataclass(frozen=True)
class WindowSpec:
    length_ms: float = 80.0
    overlap: float = 0.5

    def __post_init__(self):
        if not self.length_ms > 0:
            raise ParameterError("window length must be positive")
        if not 0 <= self.overlap < 1:
            raise ParameterError("overlap must be in [0, 1)")

    @property
    def hop_ms(self) -> float:
        return self.length_ms * (1.0 - self.overlap)

    def steps(self, dt: float = DEFAULT_DT_MS) -> tuple[int, int]:
        """(length, hop) in grid steps; both must be whole numbers of steps."""
        grid = TimeGrid(dt)
        return grid.steps_for(self.length_ms), grid.steps_for(self.hop_ms)


def n_windows(n_steps: int, length: int, hop: int) -> int:
    return 0 if n_steps < length else (n_steps - length) // hop + 1


def window_ends(n_steps: int, window: WindowSpec = WindowSpec(), dt: float = DEFAULT_DT_MS) -> np.ndarray:
    length, hop = window.steps(dt)
    return np.arange(n_windows(n_steps, length, hop)) * hop + length - 1


def bin_counts(spikes: SpikeTrainSet, window: WindowSpec = WindowSpec()) -> np.ndarray:
    """Spike counts per window, shape ``(n_windows, n_units)``.

    Window ``k`` covers steps ``[k*hop, k*hop + length)``.
    """
    length, hop = window.steps(spikes.dt)
    nw = n_windows(spikes.n_steps, length, hop)
    if nw == 0:
        raise EmptyFeatureError(f"{spikes.n_steps} steps is shorter than one {length}-step window")
    csum = np.zeros((spikes.n_steps + 1, spikes.n_units), dtype=np.int64)
    np.cumsum(spikes.raster, axis=0, out=csum[1:])
    starts = np.arange(nw) * hop
    return csum[starts + length] - csum[starts]


def minmax_fit(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    return features.min(axis=0), features.max(axis=0)


def minmax_apply(features: np.ndarray, lo: np.ndarray, hi: np.ndarray, clip: bool = True) -> np.ndarray:
    """Scale into [0, 1] with training min/max; constant features map to 0."""
    features = np.asarray(features, dtype=np.float64)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (features - lo) / safe, 0.0)
    return np.clip(out, 0.0, 1.0) if clip else out


@dataclass
class LinearModel:
    coefficients: np.ndarray  # (n_out, n_features)
    intercept: np.ndarray  # (n_out,)
    feature_min: np.ndarray | None = None
    feature_max: np.ndarray | None = None
    hop_ms: float = WindowSpec().hop_ms

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[1]

    @property
    def latency_ms(self) -> float:
        return self.hop_ms


def fit_linear(features: np.ndarray, targets: np.ndarray, intercept: bool = False,
               ridge: float = RIDGE) -> LinearModel:
    """Least squares via damped normal equations ``(X'X + ridge*I) B = X'Y``."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeError(f"features {x.shape} and targets {y.shape} do not align")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("features and targets must be finite")
    if intercept:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    gram = x.T @ x
    gram[np.diag_indices_from(gram)] += ridge
    beta = linalg.solve(gram, x.T @ y, assume_a="pos")
    if intercept:
        return LinearModel(beta[:-1].T.copy(), beta[-1].copy())
    return LinearModel(beta.T.copy(), np.zeros(y.shape[1]))


@dataclass
class WindowPrediction:
    values: np.ndarray  # (n_windows, n_out)
    end_steps: np.ndarray
    latency_ms: float
    dt: float = DEFAULT_DT_MS

    def to_grid(self, n_steps: int) -> ForceTrajectory:
        """Zero-order hold onto the simulation grid; zero before the first window completes."""
        out = np.zeros((n_steps, self.values.shape[1]))
        idx = np.searchsorted(self.end_steps, np.arange(n_steps), side="right") - 1
        have = idx >= 0
        out[have] = self.values[idx[have]]
        return ForceTrajectory(out, self.dt)


def predict_linear(model: LinearModel, features: np.ndarray, end_steps: np.ndarray | None = None,
                   dt: float = DEFAULT_DT_MS) -> WindowPrediction:
    """One prediction per feature row; normalises first if the model carries min/max."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got shape {x.shape}")
    if model.feature_min is not None:
        x = minmax_apply(x, model.feature_min, model.feature_max)
    values = x @ model.coefficients.T + model.intercept
    if end_steps is None:
        end_steps = np.arange(x.shape[0])
    return WindowPrediction(values, np.asarray(end_steps), model.latency_ms, dt)


def fit_baseline(trials, window: WindowSpec = WindowSpec(), intercept: bool = False) -> LinearModel:
    """Fit the count-regression baseline on ``(spikes, force)`` training trials."""
    feats, targets = [], []
    for spikes, force in trials:
        feats.append(bin_counts(spikes, window))
        targets.append(force.values[window_ends(spikes.n_steps, window, spikes.dt)])
    x = np.concatenate(feats).astype(np.float64)
    lo, hi = minmax_fit(x)
    model = fit_linear(minmax_apply(x, lo, hi), np.concatenate(targets), intercept)
    model.feature_min, model.feature_max, model.hop_ms = lo, hi, window.hop_ms
    return model


def predict_baseline(model: LinearModel, spikes: SpikeTrainSet,
                     window: WindowSpec = WindowSpec()) -> ForceTrajectory:
    """Grid-rate prediction for one trial (window outputs held between updates)."""
    pred = predict_linear(model, bin_counts(spikes, window),
                          window_ends(spikes.n_steps, window, spikes.dt), spikes.dt)
    return pred.to_grid(spikes.n_steps)


def write_features_csv(path, features: np.ndarray, unit_ids=None) -> None:
    """Feature matrix as CSV: header ``window,<unit ids...>``, one row per window."""
    features = np.asarray(features)
    if unit_ids is None:
        unit_ids = range(features.shape[1])
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", *[f"unit_{u}" for u in unit_ids]])
        for k, row in enumerate(features):
            w.writerow([k, *(repr(v.item()) for v in row)])
