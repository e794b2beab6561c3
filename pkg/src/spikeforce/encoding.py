"""EMG-to-spike conversion with one LIF neuron per channel.

Each channel's rectified signal is injected as a current into its own
neuron (``u[t+1] = beta * u[t] + |s[t+1]|``); the neuron spikes and resets to
zero when ``u`` reaches the threshold of its electrode array.  There is no
cross-channel coupling.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .dynamics import decay_factor
from .errors import CalibrationError, ParameterError, ShapeError
from .signals import (CHANNELS_PER_ELECTRODE, DEFAULT_DT_MS, N_CHANNELS, EmgBlock, SpikeTrainSet,
                      check_same_grid)

N_ELECTRODES = 3


@dataclass(frozen=True)
class EncoderConfig:
    tau_m_enc: float = 20.0
    thresholds: tuple[float, float, float] = (0.1, 0.4, 0.2)
    dt: float = DEFAULT_DT_MS
    rectify: bool = True

    def __post_init__(self):
        if len(self.thresholds) != N_ELECTRODES:
            raise ParameterError(f"need exactly {N_ELECTRODES} thresholds, one per electrode")
        if any(not t > 0 for t in self.thresholds):
            raise ParameterError("thresholds must be positive")
        if not self.tau_m_enc > 0:
            raise ParameterError("tau_m_enc must be positive")

    def channel_thresholds(self, n_channels: int = N_CHANNELS) -> np.ndarray:
        return np.repeat(np.asarray(self.thresholds, dtype=np.float64), CHANNELS_PER_ELECTRODE)[:n_channels]


def _current(samples: np.ndarray, rectify: bool) -> np.ndarray:
    return np.abs(samples) if rectify else samples


def _lif_raster(current: np.ndarray, beta: float, thresholds: np.ndarray) -> np.ndarray:
    n_steps, n = current.shape
    out = np.zeros((n_steps, n), dtype=bool)
    u = np.zeros(n)
    for t in range(n_steps):
        u = beta * u + current[t]
        fired = u >= thresholds
        out[t] = fired
        u[fired] = 0.0
    return out


def encode(emg: EmgBlock, cfg: EncoderConfig = EncoderConfig()) -> SpikeTrainSet:
    """Encode a 120-channel block into 120 spike trains (one per channel)."""
    if emg.n_channels != N_CHANNELS:
        raise ShapeError(f"encoder expects {N_CHANNELS} channels, got {emg.n_channels}")
    check_same_grid(cfg.dt, emg.dt)
    beta = decay_factor(cfg.tau_m_enc, cfg.dt)
    raster = _lif_raster(_current(emg.samples, cfg.rectify), beta, cfg.channel_thresholds())
    return SpikeTrainSet(raster, emg.dt)


class RateSummary(NamedTuple):
    per_unit: np.ndarray
    mean: float
    sd: float


def event_rate(spikes: SpikeTrainSet, duration_s: float | None = None) -> RateSummary:
    """Per-unit event rate (Hz) = spike count / duration, with mean and sd across units."""
    duration = spikes.duration_s if duration_s is None else duration_s
    if not duration > 0:
        raise ParameterError("duration must be positive")
    per_unit = spikes.raster.sum(axis=0) / duration
    if per_unit.size == 0:
        return RateSummary(per_unit, 0.0, 0.0)
    return RateSummary(per_unit, float(per_unit.mean()), float(per_unit.std()))


@dataclass
class CalibrationResult:
    thresholds: tuple[float, float, float]
    rates: tuple[float, float, float]
    trace: dict[int, list[tuple[float, float]]] = field(default_factory=dict)

    def config(self, base: EncoderConfig = EncoderConfig()) -> EncoderConfig:
        return EncoderConfig(base.tau_m_enc, self.thresholds, base.dt, base.rectify)


def group_rate(blocks: Sequence[EmgBlock], electrode: int, threshold: float,
               cfg: EncoderConfig = EncoderConfig()) -> float:
    """Mean event rate (Hz) over the 40 channels of ``electrode`` (1-based) at ``threshold``."""
    beta = decay_factor(cfg.tau_m_enc, cfg.dt)
    cols = slice((electrode - 1) * CHANNELS_PER_ELECTRODE, electrode * CHANNELS_PER_ELECTRODE)
    count, duration = 0, 0.0
    for block in blocks:
        current = _current(block.samples[:, cols], cfg.rectify)
        count += int(_lif_raster(current, beta, np.full(current.shape[1], threshold)).sum())
        duration += block.n_steps * block.dt / 1000.0
    return count / (CHANNELS_PER_ELECTRODE * duration)


def calibrate_thresholds(emg, target_rate_hz: float, tolerance: float = 0.5,
                         cfg: EncoderConfig = EncoderConfig(), max_iter: int = 60) -> CalibrationResult:
    """Bisect each electrode's threshold until its mean rate is within ``tolerance`` of target.

    ``emg`` is one :class:`EmgBlock` or a list of them (rates pooled over all).
    Bisection runs on log-threshold.  The (threshold, rate) pairs visited are
    kept in ``trace``; if they ever show a rate increasing with threshold the
    monotonicity assumption is broken and :class:`CalibrationError` is raised.
    """
    if not target_rate_hz > 0:
        raise ParameterError("target rate must be positive")
    blocks = [emg] if isinstance(emg, EmgBlock) else list(emg)
    beta = decay_factor(cfg.tau_m_enc, cfg.dt)
    thresholds, rates, trace = [], [], {}
    for g in range(1, N_ELECTRODES + 1):
        cols = slice((g - 1) * CHANNELS_PER_ELECTRODE, g * CHANNELS_PER_ELECTRODE)
        peak = max((float(_current(b.samples[:, cols], cfg.rectify).max(initial=0.0)) for b in blocks),
                   default=0.0)
        if peak <= 0:
            raise CalibrationError(f"electrode {g}: signal is identically zero")
        # above hi the membrane can never reach threshold
        hi = peak / (1.0 - beta) * 1.01
        lo = peak * 1e-6
        steps = []

        def rate_at(thr):
            r = group_rate(blocks, g, thr, cfg)
            steps.append((thr, r))
            return r

        if rate_at(lo) < target_rate_hz - tolerance:
            raise CalibrationError(f"electrode {g}: target {target_rate_hz} Hz unreachable "
                                   f"(max rate {steps[-1][1]:.3g} Hz)")
        best = None
        for _ in range(max_iter):
            mid = float(np.sqrt(lo * hi))
            r = rate_at(mid)
            if abs(r - target_rate_hz) <= tolerance:
                best = (mid, r)
                break
            if r > target_rate_hz:
                lo = mid
            else:
                hi = mid
        _check_monotone(g, steps)
        trace[g] = steps
        if best is None:
            raise CalibrationError(f"electrode {g}: no threshold within {tolerance} Hz of "
                                   f"{target_rate_hz} Hz after {max_iter} bisection steps")
        thresholds.append(best[0])
        rates.append(best[1])
    return CalibrationResult(tuple(thresholds), tuple(rates), trace)


def _check_monotone(electrode: int, steps: list[tuple[float, float]]) -> None:
    ordered = sorted(steps)
    for (t0, r0), (t1, r1) in zip(ordered, ordered[1:]):
        if r1 > r0:
            raise CalibrationError(f"electrode {electrode}: rate rose from {r0:.4g} to {r1:.4g} Hz "
                                   f"when threshold increased from {t0:.4g} to {t1:.4g}")
