"""Containers for the signals that flow between modules.

All signals live on a shared discrete grid (``dt`` in milliseconds, 10 ms by
default).  Spike trains are stored as dense boolean rasters of shape
``(n_steps, n_units)``; at desk scale (a few thousand steps, a few hundred
units) this is both the simplest and the fastest representation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError, SequencingError, ShapeError

DEFAULT_DT_MS = 10.0
N_FINGERS = 5
N_CHANNELS = 120
CHANNELS_PER_ELECTRODE = 40
FINGER_NAMES = ("thumb", "index", "middle", "ring", "little")


@dataclass(frozen=True)
class TimeGrid:
    dt: float = DEFAULT_DT_MS
    n_steps: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ParameterError(f"n_steps must be >= 0, got {self.n_steps}")

    @property
    def duration_s(self) -> float:
        return self.n_steps * self.dt / 1000.0

    def steps_for(self, ms: float) -> int:
        """Number of grid steps covering ``ms`` milliseconds; must divide exactly."""
        n = ms / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ParameterError(f"{ms} ms is not a multiple of dt={self.dt} ms")
        return int(round(n))


def check_same_grid(a: float, b: float) -> None:
    if a != b:
        raise SequencingError(f"time grid mismatch: dt={a} ms vs dt={b} ms")


@dataclass
class SpikeTrainSet:
    """Binary spike raster ``(n_steps, n_units)`` on a ``dt``-millisecond grid."""

    raster: np.ndarray
    dt: float = DEFAULT_DT_MS
    unit_ids: np.ndarray | None = None

    def __post_init__(self):
        raster = np.asarray(self.raster)
        if raster.ndim != 2:
            raise ShapeError(f"raster must be 2-D (steps, units), got shape {raster.shape}")
        self.raster = raster.astype(bool, copy=False)
        if self.unit_ids is None:
            self.unit_ids = np.arange(raster.shape[1])
        else:
            self.unit_ids = np.asarray(self.unit_ids)
            if self.unit_ids.shape != (raster.shape[1],):
                raise ShapeError("unit_ids length does not match raster width")
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")

    @property
    def n_steps(self) -> int:
        return self.raster.shape[0]

    @property
    def n_units(self) -> int:
        return self.raster.shape[1]

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.dt, self.n_steps)

    @property
    def duration_s(self) -> float:
        return self.n_steps * self.dt / 1000.0

    def count(self) -> int:
        return int(self.raster.sum())

    def segment(self, start: int, stop: int) -> "SpikeTrainSet":
        return SpikeTrainSet(self.raster[start:stop], self.dt, self.unit_ids)

    def events(self) -> tuple[np.ndarray, np.ndarray]:
        """(step_index, unit_index) pairs sorted by step, then unit."""
        steps, units = np.nonzero(self.raster)
        return steps, units

    @classmethod
    def from_events(cls, steps, units, n_steps: int, n_units: int, dt: float = DEFAULT_DT_MS):
        raster = np.zeros((n_steps, n_units), dtype=bool)
        raster[np.asarray(steps, dtype=int), np.asarray(units, dtype=int)] = True
        return cls(raster, dt)

    @classmethod
    def empty(cls, n_steps: int, n_units: int, dt: float = DEFAULT_DT_MS):
        return cls(np.zeros((n_steps, n_units), dtype=bool), dt)

    @classmethod
    def concatenate(cls, parts: list["SpikeTrainSet"]) -> "SpikeTrainSet":
        if not parts:
            raise ShapeError("nothing to concatenate")
        for p in parts[1:]:
            check_same_grid(parts[0].dt, p.dt)
            if p.n_units != parts[0].n_units:
                raise ShapeError("unit counts differ between parts")
        return cls(np.concatenate([p.raster for p in parts]), parts[0].dt, parts[0].unit_ids)


@dataclass
class ForceTrajectory:
    """Five-finger force, %MVC, one row per grid step."""

    values: np.ndarray
    dt: float = DEFAULT_DT_MS

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"force must be 2-D (steps, fingers), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("force trajectory contains non-finite values")
        self.values = values

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.dt, self.n_steps)

    def segment(self, start: int, stop: int) -> "ForceTrajectory":
        return ForceTrajectory(self.values[start:stop], self.dt)

    @classmethod
    def concatenate(cls, parts: list["ForceTrajectory"]) -> "ForceTrajectory":
        for p in parts[1:]:
            check_same_grid(parts[0].dt, p.dt)
        return cls(np.concatenate([p.values for p in parts]), parts[0].dt)


def electrode_of_channel(n_channels: int = N_CHANNELS) -> np.ndarray:
    """Electrode number (1, 2, 3) of each channel; 40 consecutive channels per array."""
    return np.arange(n_channels) // CHANNELS_PER_ELECTRODE + 1


@dataclass
class EmgBlock:
    """Filtered iEMG samples ``(n_steps, 120)`` on the decoder grid."""

    samples: np.ndarray
    dt: float = DEFAULT_DT_MS
    electrode: np.ndarray = field(default=None)

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise ShapeError(f"EMG must be 2-D (steps, channels), got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise DataError("EMG block contains non-finite values")
        self.samples = samples
        if self.electrode is None:
            self.electrode = electrode_of_channel(samples.shape[1])

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]
