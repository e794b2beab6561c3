"""Discrete-time leaky integrator (LI) and leaky integrate-and-fire (LIF) layers.

Each layer has an exponential-kernel synapse feeding a leaky membrane::

    i_syn[t+1] = alpha * i_syn[t] + W @ x[t+1] + bias
    u[t+1]     = beta  * u[t]     + i_syn[t+1]

with ``alpha = exp(-dt / tau_syn)`` and ``beta = exp(-dt / tau_m)``.  An LIF
layer then thresholds the freshly integrated membrane and resets the neurons
that fired.  Integration happens before thresholding, so a spike emitted at
step ``t+1`` already reflects the input arriving at ``t+1``.

State is an explicit value (:class:`LayerState`) so a stream can be cut into
segments and resumed without any change in the output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ParameterError, SequencingError, ShapeError
from .signals import DEFAULT_DT_MS

RESET_MODES = ("zero", "subtract")


def decay_factor(tau, dt=DEFAULT_DT_MS):
    """Return ``exp(-dt / tau)``; works elementwise on arrays of time constants."""
    tau_arr = np.asarray(tau, dtype=np.float64)
    if not np.all(tau_arr > 0) or not np.all(np.isfinite(tau_arr)):
        raise ParameterError(f"time constant must be positive and finite, got {tau}")
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    out = np.exp(-dt / tau_arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SynapseParams:
    """Exponential synapse plus the projection feeding it.

    ``weight`` is either a dense ``(n_out, n_in)`` matrix or a 1-D vector, in
    which case the projection is one-to-one (elementwise).  An instantaneous
    synapse skips the exponential kernel and injects ``W @ x + bias`` directly.
    """

    weight: np.ndarray
    bias: np.ndarray | None = None
    tau_syn: float = 10.0
    instantaneous: bool = False

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        if w.ndim not in (1, 2):
            raise ShapeError(f"weight must be 1-D or 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ParameterError("weight matrix must be finite")
        object.__setattr__(self, "weight", w)
        n_out = w.shape[0]
        b = np.zeros(n_out) if self.bias is None else np.asarray(self.bias, dtype=np.float64)
        if b.shape != (n_out,):
            raise ShapeError(f"bias must have shape ({n_out},), got {b.shape}")
        object.__setattr__(self, "bias", b)
        if not self.instantaneous and not self.tau_syn > 0:
            raise ParameterError(f"tau_syn must be positive, got {self.tau_syn}")

    def alpha(self, dt: float) -> float:
        cache = self.__dict__.setdefault("_alpha", {})
        if dt not in cache:
            cache[dt] = decay_factor(self.tau_syn, dt)
        return cache[dt]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]

    @property
    def n_in(self) -> int:
        return self.weight.shape[-1] if self.weight.ndim == 2 else self.weight.shape[0]

    @property
    def one_to_one(self) -> bool:
        return self.weight.ndim == 1

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.one_to_one:
            return self.weight * x + self.bias
        return self.weight @ x + self.bias


@dataclass(frozen=True)
class NeuronParams:
    """Per-neuron membrane time constants, optional threshold, reset rule."""

    tau_m: np.ndarray
    threshold: np.ndarray | None = None
    reset_mode: str = "zero"

    def __post_init__(self):
        tau = np.atleast_1d(np.asarray(self.tau_m, dtype=np.float64))
        if not np.all(tau > 0) or not np.all(np.isfinite(tau)):
            raise ParameterError("tau_m must be positive and finite")
        object.__setattr__(self, "tau_m", tau)
        if self.threshold is not None:
            thr = np.broadcast_to(np.asarray(self.threshold, dtype=np.float64), tau.shape).copy()
            if not np.all(thr > 0):
                raise ParameterError("threshold must be positive")
            object.__setattr__(self, "threshold", thr)
        if self.reset_mode not in RESET_MODES:
            raise ParameterError(f"reset_mode must be one of {RESET_MODES}, got {self.reset_mode!r}")

    def beta(self, dt: float) -> np.ndarray:
        cache = self.__dict__.setdefault("_beta", {})
        if dt not in cache:
            cache[dt] = decay_factor(self.tau_m, dt)
        return cache[dt]

    @property
    def n(self) -> int:
        return self.tau_m.shape[0]


@dataclass(frozen=True)
class LayerState:
    """Synaptic currents and membrane potentials, plus the last processed step."""

    i_syn: np.ndarray
    u_mem: np.ndarray
    t_last: int = -1

    @classmethod
    def zeros(cls, n: int) -> "LayerState":
        return cls(np.zeros(n), np.zeros(n), -1)


@dataclass(frozen=True)
class SpikeFrame:
    t_index: int
    fired: np.ndarray = field(repr=False)


def _input_vector(x) -> tuple[np.ndarray, int | None]:
    if isinstance(x, SpikeFrame):
        return np.asarray(x.fired, dtype=np.float64), x.t_index
    return np.asarray(x, dtype=np.float64), None


def _integrate(state: LayerState, x: np.ndarray, syn: SynapseParams, neu: NeuronParams, dt: float):
    if x.shape != (syn.n_in,):
        raise ShapeError(f"input has shape {x.shape}, synapse expects ({syn.n_in},)")
    if state.i_syn.shape != (syn.n_out,) or state.u_mem.shape != (syn.n_out,):
        raise ShapeError("layer state does not match synapse output size")
    if neu.n != syn.n_out:
        raise ShapeError(f"{neu.n} neurons but synapse drives {syn.n_out}")
    drive = syn.project(x)
    if syn.instantaneous:
        i_new = drive
    else:
        i_new = syn.alpha(dt) * state.i_syn + drive
    u_new = neu.beta(dt) * state.u_mem + i_new
    return i_new, u_new


def li_step(state: LayerState, input_spikes, syn: SynapseParams, neu: NeuronParams,
            dt: float = DEFAULT_DT_MS):
    """Advance a leaky-integrator layer by one step.

    ``input_spikes`` may be a :class:`SpikeFrame` or any real vector (the
    smoothing stages feed continuous membrane values).  Returns the new state
    and the membrane potential, which is the layer's continuous output.
    """
    x, t = _input_vector(input_spikes)
    i_new, u_new = _integrate(state, x, syn, neu, dt)
    t_new = state.t_last + 1 if t is None else t
    return LayerState(i_new, u_new, t_new), u_new


def lif_step(state: LayerState, input_spikes, syn: SynapseParams, neu: NeuronParams,
             dt: float = DEFAULT_DT_MS):
    """Advance a leaky integrate-and-fire layer by one step.

    Neurons whose integrated membrane reaches the threshold emit a spike and
    are reset (to zero, or by subtracting the threshold).
    """
    if neu.threshold is None:
        raise ParameterError("lif_step requires a firing threshold")
    x, t = _input_vector(input_spikes)
    i_new, u_new = _integrate(state, x, syn, neu, dt)
    fired = u_new >= neu.threshold
    if neu.reset_mode == "zero":
        u_new = np.where(fired, 0.0, u_new)
    else:
        u_new = u_new - fired * neu.threshold
    t_new = state.t_last + 1 if t is None else t
    return LayerState(i_new, u_new, t_new), SpikeFrame(t_new, fired)


def stream_layer(frames: Iterable, syn: SynapseParams, neu: NeuronParams,
                 initial_state: LayerState | None = None, dt: float = DEFAULT_DT_MS,
                 spiking: bool | None = None):
    """Fold ``li_step`` or ``lif_step`` over a sequence of frames.

    ``spiking`` defaults to whether ``neu`` has a threshold.  Frames must carry
    strictly increasing step indices that continue after ``initial_state``;
    plain vectors are numbered implicitly.  Returns ``(outputs, final_state)``
    where outputs is a list of membrane vectors (LI) or :class:`SpikeFrame`
    objects (LIF).
    """
    if spiking is None:
        spiking = neu.threshold is not None
    step = lif_step if spiking else li_step
    state = initial_state if initial_state is not None else LayerState.zeros(syn.n_out)
    outputs = []
    for frame in frames:
        if isinstance(frame, SpikeFrame) and frame.t_index <= state.t_last:
            raise SequencingError(
                f"frame index {frame.t_index} does not follow step {state.t_last}")
        state, out = step(state, frame, syn, neu, dt)
        outputs.append(out)
    return outputs, state


def frames_from_raster(raster: np.ndarray, start: int = 0) -> list[SpikeFrame]:
    """Wrap the rows of a ``(n_steps, n)`` raster as consecutive frames."""
    return [SpikeFrame(start + k, row) for k, row in enumerate(np.asarray(raster))]


def run_layer(inputs: np.ndarray, syn: SynapseParams, neu: NeuronParams,
              state: LayerState | None = None, dt: float = DEFAULT_DT_MS,
              spiking: bool | None = None) -> tuple[np.ndarray, LayerState]:
    """Array-in/array-out equivalent of :func:`stream_layer`.

    ``inputs`` is ``(n_steps, n_in)``; returns the stacked outputs
    ``(n_steps, n_out)`` (membrane values, or 0/1 spikes for LIF layers).
    Shapes are checked once and the loop performs exactly the arithmetic of
    :func:`li_step` / :func:`lif_step`, so results are bitwise identical.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if spiking is None:
        spiking = neu.threshold is not None
    if spiking and neu.threshold is None:
        raise ParameterError("a spiking layer requires a firing threshold")
    state = state if state is not None else LayerState.zeros(syn.n_out)
    if inputs.ndim != 2 or inputs.shape[1] != syn.n_in:
        raise ShapeError(f"inputs have shape {inputs.shape}, synapse expects (n_steps, {syn.n_in})")
    if state.i_syn.shape != (syn.n_out,) or state.u_mem.shape != (syn.n_out,):
        raise ShapeError("layer state does not match synapse output size")
    if neu.n != syn.n_out:
        raise ShapeError(f"{neu.n} neurons but synapse drives {syn.n_out}")
    alpha = None if syn.instantaneous else syn.alpha(dt)
    beta, thr = neu.beta(dt), neu.threshold
    zero_reset = neu.reset_mode == "zero"
    i, u = state.i_syn, state.u_mem
    out = np.empty((inputs.shape[0], syn.n_out))
    for t, x in enumerate(inputs):
        drive = syn.project(x)
        i = drive if alpha is None else alpha * i + drive
        u = beta * u + i
        if spiking:
            fired = u >= thr
            out[t] = fired
            u = np.where(fired, 0.0, u) if zero_reset else u - fired * thr
        else:
            out[t] = u
    return out, LayerState(i, u, state.t_last + inputs.shape[0])
