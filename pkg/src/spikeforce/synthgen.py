"""Synthetic stand-ins for the recorded data.

Trials follow the trapezoidal protocol (3 s ramp up, 20 s hold, 3 s ramp
down at 15 %MVC, padded with rest).  Motor-unit pools are drawn per movement
direction and shared by both repetitions of every task.  Each unit belongs to
one finger task, is recruited once that finger's force passes its threshold,
and fires as a Gamma renewal process whose rate grows linearly with force.
Surrogate iEMG is a sum of per-unit discharge envelopes projected onto one
electrode array each, plus Gaussian noise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, ParameterError
from .rng import substream
from .signals import (CHANNELS_PER_ELECTRODE, DEFAULT_DT_MS, N_CHANNELS, N_FINGERS, EmgBlock,
                      ForceTrajectory, SpikeTrainSet)

DIRECTIONS = ("flexion", "extension")
RATE_MIN, RATE_MAX = 4.0, 50.0


@dataclass(frozen=True)
class ForceProfileSpec:
    ramp_up_s: float = 3.0
    hold_s: float = 20.0
    ramp_down_s: float = 3.0
    level: float = 15.0
    rest_before_s: float = 2.0
    rest_after_s: float = 2.0
    noise_floor: float = 0.0

    @property
    def duration_s(self) -> float:
        return self.rest_before_s + self.ramp_up_s + self.hold_s + self.ramp_down_s + self.rest_after_s

    @property
    def hold_window_s(self) -> tuple[float, float]:
        start = self.rest_before_s + self.ramp_up_s
        return start, start + self.hold_s


def profile_value(t_s, spec: ForceProfileSpec = ForceProfileSpec()):
    """Target force (%MVC) of the active finger at time ``t_s`` seconds."""
    t = np.asarray(t_s, dtype=np.float64) - spec.rest_before_s
    up, hold, down = spec.ramp_up_s, spec.hold_s, spec.ramp_down_s
    knots_t = [0.0, up, up + hold, up + hold + down]
    knots_f = [0.0, spec.level, spec.level, 0.0]
    return np.interp(t, knots_t, knots_f, left=0.0, right=0.0)


def trapezoid(spec: ForceProfileSpec, finger: int, dt: float = DEFAULT_DT_MS,
              rng: np.random.Generator | None = None) -> ForceTrajectory:
    """Five-finger targets with a trapezoid on ``finger`` and rest elsewhere."""
    n_steps = int(round(spec.duration_s * 1000.0 / dt))
    values = np.zeros((n_steps, N_FINGERS))
    values[:, finger] = profile_value(np.arange(n_steps) * dt / 1000.0, spec)
    if spec.noise_floor > 0:
        rng = rng if rng is not None else np.random.default_rng()
        others = [f for f in range(N_FINGERS) if f != finger]
        values[:, others] = np.abs(rng.normal(0.0, spec.noise_floor, size=(n_steps, len(others))))
    return ForceTrajectory(values, dt)


@dataclass
class MotorUnitPool:
    """Per-unit recruitment and rate-coding parameters for one direction."""

    finger: np.ndarray
    recruitment_threshold: np.ndarray
    min_rate: np.ndarray
    rate_gain: np.ndarray
    max_rate: np.ndarray
    isi_cov: float = 0.2
    electrode: np.ndarray | None = None
    projection: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_units(self) -> int:
        return self.finger.shape[0]

    def rates(self, force: np.ndarray) -> np.ndarray:
        """Instantaneous rate (pps) per step and unit; zero while not recruited."""
        drive = force[:, self.finger]
        excess = drive - self.recruitment_threshold
        rate = np.clip(self.min_rate + self.rate_gain * excess, RATE_MIN, self.max_rate)
        return np.where(excess >= 0, rate, 0.0)


def make_pool(n_units: int, mean_rate: float, sd_rate: float, rng: np.random.Generator,
              level: float = 15.0, isi_cov: float = 0.2,
              electrode_probs=(1 / 3, 1 / 3, 1 / 3), electrode_gain=(1.0, 1.0, 1.0),
              amplitude: float = 1.0) -> MotorUnitPool:
    """Draw a pool whose hold-phase rates have roughly ``mean_rate`` +- ``sd_rate``.

    Units are split evenly across the five finger tasks.  Each unit's rate at
    ``level`` is drawn from a normal distribution and reached linearly from a
    recruitment rate of at most 6 pps.
    """
    if n_units < 1:
        raise ParameterError("a pool needs at least one unit")
    finger = np.concatenate([np.full(len(c), f) for f, c in
                             enumerate(np.array_split(np.arange(n_units), N_FINGERS))])
    thr = rng.uniform(0.5, 0.75 * level, size=n_units)
    hold_rate = np.clip(rng.normal(mean_rate, sd_rate, size=n_units), 5.0, 40.0)
    min_rate = np.minimum(hold_rate, 6.0)
    gain = (hold_rate - min_rate) / (level - thr)
    electrode = _balanced_labels(n_units, electrode_probs, rng) + 1
    projection = _projection(electrode, rng, np.asarray(electrode_gain, dtype=float) * amplitude)
    return MotorUnitPool(finger, thr, min_rate, gain, np.full(n_units, RATE_MAX), isi_cov,
                         electrode, projection)


def _balanced_labels(n: int, probs, rng: np.random.Generator) -> np.ndarray:
    """Labels 0..k-1 in proportions as close to ``probs`` as integers allow, shuffled."""
    probs = np.asarray(probs, dtype=np.float64) / np.sum(probs)
    counts = np.floor(probs * n).astype(int)
    counts[np.argsort(-(probs * n - counts))[:n - counts.sum()]] += 1
    return rng.permutation(np.repeat(np.arange(len(probs)), counts))


def _projection(electrode: np.ndarray, rng: np.random.Generator, gain: np.ndarray) -> np.ndarray:
    n = electrode.shape[0]
    proj = np.zeros((n, N_CHANNELS))
    local = np.arange(CHANNELS_PER_ELECTRODE)
    centre = rng.uniform(0, CHANNELS_PER_ELECTRODE, size=n)
    width = rng.uniform(2.0, 6.0, size=n)
    amp = rng.lognormal(0.0, 0.3, size=n)
    for u in range(n):
        g = electrode[u] - 1
        profile = np.exp(-0.5 * ((local - centre[u]) / width[u]) ** 2)
        start = g * CHANNELS_PER_ELECTRODE
        proj[u, start:start + CHANNELS_PER_ELECTRODE] = amp[u] * gain[g] * profile
    return proj


def common_drive(n_steps: int, dt_ms: float, sd: float, tau_s: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck trace with standard deviation ``sd``."""
    if sd <= 0 or n_steps == 0:
        return np.zeros(n_steps)
    a = np.exp(-dt_ms / 1000.0 / tau_s)
    innov = rng.normal(0.0, sd * np.sqrt(1.0 - a * a), size=n_steps)
    innov[0] = rng.normal(0.0, sd)
    return lfilter([1.0], [1.0, -a], innov)


def sample_mu_spikes(pool: MotorUnitPool, force: ForceTrajectory,
                     rng: np.random.Generator, common_drive_sd: float = 0.0,
                     common_drive_tau_s: float = 1.0, gain_jitter: float = 0.0) -> SpikeTrainSet:
    """Renewal-process spike trains driven by ``force``.

    Each unit accumulates phase ``sum(rate * dt)``; it fires whenever the phase
    passes the next of a sequence of Gamma(1/cov^2, cov^2) intervals (mean 1),
    so the discharge rate tracks the force-dependent rate with ISI CoV
    ``isi_cov``.  Events are placed on the grid step where the crossing
    happens; coincident events within one step collapse into one spike.

    ``common_drive_sd`` modulates all rates by a shared slow fluctuation that
    is absent from the force target, and ``gain_jitter`` scales each unit's
    rate by a per-call factor (repetition-to-repetition variability).  Rates
    stay within [4, max_rate] while a unit is recruited.
    """
    dt_s = force.dt / 1000.0
    rates = pool.rates(force.values)
    if gain_jitter > 0 or common_drive_sd > 0:
        gain = 1.0 + gain_jitter * rng.standard_normal(pool.n_units)
        drive = 1.0 + common_drive(force.n_steps, force.dt, common_drive_sd, common_drive_tau_s, rng)
        active = rates > 0
        rates = np.where(active, np.clip(rates * gain * drive[:, None], RATE_MIN, pool.max_rate), 0.0)
    phase = np.cumsum(rates * dt_s, axis=0)
    n_steps, n_units = rates.shape
    raster = np.zeros((n_steps, n_units), dtype=bool)
    cov = pool.isi_cov
    for u in range(n_units):
        total = phase[-1, u] if n_steps else 0.0
        if total <= 0:
            continue
        n_draw = int(total * 1.5) + 10
        if cov > 0:
            shape = 1.0 / cov ** 2
            isi = rng.gamma(shape, 1.0 / shape, size=n_draw)
            while isi.sum() < total + 1.0:
                isi = np.concatenate([isi, rng.gamma(shape, 1.0 / shape, size=n_draw)])
        else:
            isi = np.ones(n_draw)
        # random phase for the first event avoids synchrony at recruitment
        isi[0] *= rng.uniform()
        marks = np.cumsum(isi)
        marks = marks[marks <= total]
        raster[np.searchsorted(phase[:, u], marks, side="left"), u] = True
    return SpikeTrainSet(raster, force.dt)


def synth_iemg(spikes: SpikeTrainSet, pool: MotorUnitPool, rng: np.random.Generator,
               noise_sd: float = 0.02, envelope_tau_ms: float = 20.0) -> EmgBlock:
    """Envelope-level surrogate iEMG ``(n_steps, 120)`` on the spike grid.

    Every discharge adds an exponentially decaying envelope (``envelope_tau_ms``)
    that is projected through the pool's unit-to-channel matrix.  Noise is
    Gaussian with per-electrode standard deviation ``noise_sd`` times the mean
    projection gain of that electrode.
    """
    if pool.projection is None:
        raise ConfigError("pool has no channel projection")
    a = np.exp(-spikes.dt / envelope_tau_ms)
    env = lfilter([1.0], [1.0, -a], spikes.raster.astype(np.float64), axis=0)
    emg = env @ pool.projection
    if noise_sd > 0:
        group_gain = np.array([
            pool.projection[:, g * CHANNELS_PER_ELECTRODE:(g + 1) * CHANNELS_PER_ELECTRODE].max(initial=0.0)
            for g in range(3)])
        group_gain[group_gain == 0] = 1.0
        sd = np.repeat(group_gain, CHANNELS_PER_ELECTRODE) * noise_sd
        emg = emg + rng.normal(0.0, 1.0, size=emg.shape) * sd
    return EmgBlock(emg, spikes.dt)


# --------------------------------------------------------------------------
# presets and datasets

@dataclass(frozen=True)
class DirectionPreset:
    n_units: int
    mean_rate: float
    sd_rate: float
    electrode_probs: tuple[float, float, float]
    encoded_rate_hz: float


@dataclass(frozen=True)
class SubjectPreset:
    name: str
    directions: dict
    encoder_thresholds: tuple[float, float, float]
    electrode_gain: tuple[float, float, float]
    # channel-projection scale putting the preset's encoder thresholds in its rate regime
    emg_amplitude: float


PRESETS = {
    "S1": SubjectPreset(
        "S1",
        {"flexion": DirectionPreset(121, 11.90, 3.70, (0.40, 0.20, 0.40), 4.62),
         "extension": DirectionPreset(196, 13.00, 4.72, (0.30, 0.40, 0.30), 6.62)},
        encoder_thresholds=(0.1, 0.4, 0.2),
        electrode_gain=(1.0, 4.0, 2.0),
        emg_amplitude=0.042,
    ),
    "S2": SubjectPreset(
        "S2",
        {"flexion": DirectionPreset(51, 10.78, 3.05, (0.40, 0.20, 0.40), 11.57),
         "extension": DirectionPreset(93, 12.66, 4.38, (0.30, 0.40, 0.30), 14.69)},
        encoder_thresholds=(0.06, 0.06, 0.06),
        electrode_gain=(1.0, 1.0, 1.0),
        emg_amplitude=0.09,
    ),
}


def get_preset(name: str) -> SubjectPreset:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown subject preset {name!r}; expected one of {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class SynthConfig:
    preset: str = "S1"
    directions: tuple[str, ...] = DIRECTIONS
    fingers: tuple[int, ...] = tuple(range(N_FINGERS))
    repetitions: tuple[int, ...] = (1, 2)
    profile: ForceProfileSpec = ForceProfileSpec()
    isi_cov: float = 0.2
    common_drive_sd: float = 0.15
    common_drive_tau_s: float = 1.0
    gain_jitter: float = 0.1
    emg: bool = True
    emg_noise_sd: float = 0.02
    dt: float = DEFAULT_DT_MS

    def __post_init__(self):
        get_preset(self.preset)
        for d in self.directions:
            if d not in DIRECTIONS:
                raise ConfigError(f"unknown direction {d!r}")
        if any(not 0 <= f < N_FINGERS for f in self.fingers):
            raise ConfigError("finger indices must be in 0..4")


@dataclass
class Trial:
    subject: str
    direction: str
    finger: int
    repetition: int
    spikes: SpikeTrainSet
    force: ForceTrajectory
    emg: EmgBlock | None = None

    @property
    def key(self) -> tuple[str, int, int]:
        return self.direction, self.finger, self.repetition


@dataclass
class SyntheticDataset:
    trials: list[Trial]
    pools: dict[str, MotorUnitPool]
    seed: int
    subject: str

    def select(self, direction: str | None = None, repetition: int | None = None,
               finger: int | None = None) -> list[Trial]:
        return [t for t in self.trials
                if (direction is None or t.direction == direction)
                and (repetition is None or t.repetition == repetition)
                and (finger is None or t.finger == finger)]

    def unit_counts(self) -> dict[str, int]:
        return {d: self.select(direction=d)[0].spikes.n_units for d in self.directions}

    @property
    def directions(self) -> list[str]:
        present = {t.direction for t in self.trials}
        return [d for d in DIRECTIONS if d in present]


def build_dataset(config: SynthConfig = SynthConfig(), seed: int = 0,
                  out_dir: str | Path | None = None, write_emg: bool = False) -> SyntheticDataset:
    """Generate every (direction, finger, repetition) trial of a preset.

    All randomness comes from named sub-streams of ``seed``.  With ``out_dir``
    each trial is also written as one dataset file (see :mod:`spikeforce.datasets`).
    """
    preset = get_preset(config.preset)
    pools, trials = {}, []
    for direction in config.directions:
        dp = preset.directions[direction]
        pools[direction] = make_pool(
            dp.n_units, dp.mean_rate, dp.sd_rate, substream(seed, "datagen", "pool", direction),
            level=config.profile.level, isi_cov=config.isi_cov, electrode_probs=dp.electrode_probs,
            electrode_gain=preset.electrode_gain, amplitude=preset.emg_amplitude)
        for finger in config.fingers:
            for rep in config.repetitions:
                key = ("datagen", direction, finger, rep)
                force = trapezoid(config.profile, finger, config.dt, substream(seed, *key, "force"))
                spikes = sample_mu_spikes(pools[direction], force, substream(seed, *key, "spikes"),
                                          config.common_drive_sd, config.common_drive_tau_s,
                                          config.gain_jitter)
                emg = None
                if config.emg:
                    emg = synth_iemg(spikes, pools[direction], substream(seed, *key, "emg"),
                                     config.emg_noise_sd)
                trials.append(Trial(preset.name, direction, finger, rep, spikes, force, emg))
    dataset = SyntheticDataset(trials, pools, seed, preset.name)
    if out_dir is not None:
        from .datasets import write_dataset_dir
        write_dataset_dir(dataset, out_dir, include_emg=write_emg)
    return dataset
