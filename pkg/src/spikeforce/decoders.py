"""The two spiking decoder topologies and streamed force prediction.

``li``
    Motor units -> dense exponential synapses -> five leaky integrators.  The
    readout membranes are the force estimate (after output smoothing).

``lif``
    Motor units -> dense exponential synapses -> five LIF neurons -> one-to-one
    instantaneous synapses -> LI conversion layer (50 ms) -> one-to-one
    exponential synapses -> LI smoothing layer (80 ms).

Both kinds finish with a first-order exponential smoother (unit DC gain,
80 ms) applied to the last membrane trace, emitted every grid step.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .baseline import LinearModel
from .dynamics import LayerState, NeuronParams, SynapseParams, decay_factor, run_layer
from .errors import ConfigError, ParameterError, ShapeError
from .signals import DEFAULT_DT_MS, N_FINGERS, ForceTrajectory, SpikeTrainSet, check_same_grid

KINDS = ("li", "lif")


@dataclass(frozen=True)
class DecoderConfig:
    tau_syn: float = 10.0
    li_tau_m: float = 80.0
    lif_tau_m_mean: float = 30.0
    lif_tau_m_sd: float = 1.5
    conv_tau_m: float = 50.0
    smooth_tau_m: float = 80.0
    threshold: float = 0.045
    output_tau: float = 80.0
    li_weight_range: float = 0.1
    lif_weight_range: float = 0.01
    conv_weight: float = 1.0
    smooth_weight: float = 1.0
    reset_mode: str = "zero"
    train_lif_tau_m: bool = True
    dt: float = DEFAULT_DT_MS


@dataclass
class DecoderModel:
    """Architecture tag plus every parameter array and its trainability flag.

    Parameter names: ``weight`` (5 x m), ``bias`` (5), ``tau_m`` (5, readout
    membrane time constants in ms); LIF models add ``threshold``,
    ``conv_weight``, ``conv_tau_m``, ``smooth_weight``, ``smooth_tau_m`` (all
    length 5).  Scalar hyper-parameters (synaptic and smoothing time constants)
    live in ``config``.
    """

    kind: str
    input_dim: int
    params: dict[str, np.ndarray]
    trainable: dict[str, bool]
    config: DecoderConfig = field(default_factory=DecoderConfig)
    output_dim: int = N_FINGERS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown decoder kind {self.kind!r}; expected one of {KINDS}")
        has_cascade = "conv_tau_m" in self.params and "smooth_tau_m" in self.params
        if (self.kind == "lif") != has_cascade:
            raise ConfigError("LIF decoders need conv and smoothing layers; LI decoders must not have them")
        if self.params["weight"].shape != (self.output_dim, self.input_dim):
            raise ShapeError(f"weight shape {self.params['weight'].shape} does not match "
                             f"({self.output_dim}, {self.input_dim})")

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def dense(self) -> SynapseParams:
        return SynapseParams(self.params["weight"], self.params["bias"], self.config.tau_syn)

    @property
    def readout_neurons(self) -> NeuronParams:
        thr = self.params.get("threshold") if self.kind == "lif" else None
        return NeuronParams(self.params["tau_m"], thr, self.config.reset_mode)

    @property
    def conv_layer(self) -> tuple[SynapseParams, NeuronParams] | None:
        if self.kind != "lif":
            return None
        syn = SynapseParams(self.params["conv_weight"], None, instantaneous=True)
        return syn, NeuronParams(self.params["conv_tau_m"])

    @property
    def smooth_layer(self) -> tuple[SynapseParams, NeuronParams] | None:
        if self.kind != "lif":
            return None
        syn = SynapseParams(self.params["smooth_weight"], None, self.config.tau_syn)
        return syn, NeuronParams(self.params["smooth_tau_m"])

    @property
    def output_filter(self) -> tuple[SynapseParams, NeuronParams]:
        # y[t] = g*y[t-1] + (1-g)*u[t]: an LI stage with an instantaneous synapse of gain 1-g
        g = decay_factor(self.config.output_tau, self.dt)
        syn = SynapseParams(np.full(self.output_dim, 1.0 - g), None, instantaneous=True)
        return syn, NeuronParams(np.full(self.output_dim, self.config.output_tau))

    def copy(self) -> "DecoderModel":
        return replace(self, params={k: v.copy() for k, v in self.params.items()},
                       trainable=dict(self.trainable))


def build_decoder(kind: str, input_dim: int, config: DecoderConfig | None = None,
                  rng: np.random.Generator | None = None) -> DecoderModel:
    """Create a freshly initialised decoder.

    Weights are uniform in ``(-r, r)`` with ``r = 0.1`` (LI) or ``0.01`` (LIF);
    biases start at zero.  LIF readout time constants are drawn from
    ``N(30, 1.5)`` ms and are trainable; every other time constant is fixed.
    """
    cfg = config or DecoderConfig()
    if kind not in KINDS:
        raise ConfigError(f"unknown decoder kind {kind!r}; expected one of {KINDS}")
    if input_dim < 1:
        raise ParameterError(f"input_dim must be >= 1, got {input_dim}")
    rng = rng if rng is not None else np.random.default_rng()
    n = N_FINGERS
    if kind == "li":
        r = cfg.li_weight_range
        params = {
            "weight": rng.uniform(-r, r, size=(n, input_dim)),
            "bias": np.zeros(n),
            "tau_m": np.full(n, cfg.li_tau_m),
        }
        trainable = {"weight": True, "bias": True, "tau_m": False}
    else:
        r = cfg.lif_weight_range
        weight = rng.uniform(-r, r, size=(n, input_dim))
        tau = rng.normal(cfg.lif_tau_m_mean, cfg.lif_tau_m_sd, size=n)
        params = {
            "weight": weight,
            "bias": np.zeros(n),
            "tau_m": np.clip(tau, 1.0, None),
            "threshold": np.full(n, cfg.threshold),
            "conv_weight": np.full(n, cfg.conv_weight),
            "conv_tau_m": np.full(n, cfg.conv_tau_m),
            "smooth_weight": np.full(n, cfg.smooth_weight),
            "smooth_tau_m": np.full(n, cfg.smooth_tau_m),
        }
        trainable = {k: False for k in params}
        trainable.update(weight=True, bias=True, tau_m=cfg.train_lif_tau_m)
    return DecoderModel(kind, input_dim, params, trainable, cfg)


class DecoderState(NamedTuple):
    """Everything a decoder carries between streamed segments."""

    layers: tuple[LayerState, ...]
    t_last: int

    @classmethod
    def zeros(cls, model: DecoderModel) -> "DecoderState":
        n_layers = 2 if model.kind == "li" else 4
        return cls(tuple(LayerState.zeros(model.output_dim) for _ in range(n_layers)), -1)


def _stages(model: DecoderModel):
    """(synapse, neuron, spiking) for each stage, in order."""
    stages = [(model.dense, model.readout_neurons, model.kind == "lif")]
    if model.kind == "lif":
        stages.append((*model.conv_layer, False))
        stages.append((*model.smooth_layer, False))
    stages.append((*model.output_filter, False))
    return stages


def predict_stream(model: DecoderModel, spikes: SpikeTrainSet,
                   carry: DecoderState | None = None) -> tuple[ForceTrajectory, DecoderState]:
    """Run the decoder over one segment, returning forces and the state to resume from.

    Emits exactly one five-finger estimate per grid step.  Passing the
    returned state as ``carry`` for the next segment gives the same output as
    one unsegmented pass.
    """
    check_same_grid(model.dt, spikes.dt)
    if spikes.n_units != model.input_dim:
        raise ShapeError(f"decoder expects {model.input_dim} inputs, got {spikes.n_units}")
    state = carry if carry is not None else DecoderState.zeros(model)
    signal = spikes.raster.astype(np.float64)
    new_layers = []
    for (syn, neu, spiking), layer_state in zip(_stages(model), state.layers):
        signal, layer_state = run_layer(signal, syn, neu, layer_state, model.dt, spiking)
        new_layers.append(layer_state)
    return ForceTrajectory(signal, model.dt), DecoderState(tuple(new_layers), state.t_last + spikes.n_steps)


def predict(model: DecoderModel, spikes: SpikeTrainSet) -> ForceTrajectory:
    return predict_stream(model, spikes)[0]


class ParamEntry(NamedTuple):
    name: str
    stored: int
    nonzero: int
    trainable: bool


def parameter_inventory(model: DecoderModel) -> list[ParamEntry]:
    """Stored parameters of a decoder, one entry per tensor.

    The LIF cascade's one-to-one conversion projection is stored the way a
    framework ``Linear(5, 5)`` layer would hold it (full 5x5 matrix plus bias),
    of which only the diagonal is nonzero; the firing threshold and the
    smoothing-stage synaptic time constant are stored as shared scalars.
    """
    p, t = model.params, model.trainable
    n = model.output_dim
    entries = [
        ParamEntry("weight", p["weight"].size, int(np.count_nonzero(p["weight"])), t["weight"]),
        ParamEntry("bias", n, int(np.count_nonzero(p["bias"])), t["bias"]),
        ParamEntry("tau_m", n, n, t["tau_m"]),
    ]
    if model.kind == "lif":
        entries += [
            ParamEntry("threshold", 1, 1, t["threshold"]),
            ParamEntry("conv_weight", n * n, int(np.count_nonzero(p["conv_weight"])), t["conv_weight"]),
            ParamEntry("conv_bias", n, 0, False),
            ParamEntry("conv_tau_m", n, n, t["conv_tau_m"]),
            ParamEntry("smooth_tau_m", n, n, t["smooth_tau_m"]),
            ParamEntry("smooth_tau_syn", 1, 1, False),
        ]
    return entries


def parameter_counts(kind: str, input_dim: int, n_out: int = N_FINGERS,
                     train_lif_tau_m: bool = True) -> tuple[int, int]:
    """Closed-form (total, trainable) counts for a decoder with ``input_dim`` inputs."""
    if kind not in KINDS:
        raise ConfigError(f"unknown decoder kind {kind!r}")
    trainable = n_out * input_dim + n_out
    fixed = n_out  # readout tau_m
    if kind == "lif":
        if train_lif_tau_m:
            trainable, fixed = trainable + n_out, 0
        fixed += 1 + n_out * n_out + n_out + n_out + n_out + 1
    return trainable + fixed, trainable


def count_parameters(model) -> tuple[int, int]:
    """(total, trainable) stored parameters of ``model``.

    Also accepts a baseline :class:`~spikeforce.baseline.LinearModel`, whose
    parameters are all trainable; an all-zero intercept counts as absent.
    """
    if isinstance(model, LinearModel):
        n = model.coefficients.size + (model.intercept.size if np.any(model.intercept) else 0)
        return n, n
    inv = parameter_inventory(model)
    return sum(e.stored for e in inv), sum(e.stored for e in inv if e.trainable)


def merge_directions(flexion: DecoderModel, extension: DecoderModel) -> DecoderModel:
    """Block-diagonal union of two LI decoders with disjoint inputs.

    The merged model reads ``[flexion inputs, extension inputs]`` and has ten
    outputs (five flexion, five extension); cross-direction weights are zero.
    """
    if flexion.kind != "li" or extension.kind != "li":
        raise ConfigError("direction merging is defined for LI decoders")
    n = flexion.output_dim
    w = np.zeros((2 * n, flexion.input_dim + extension.input_dim))
    w[:n, :flexion.input_dim] = flexion.params["weight"]
    w[n:, flexion.input_dim:] = extension.params["weight"]
    params = {
        "weight": w,
        "bias": np.concatenate([flexion.params["bias"], extension.params["bias"]]),
        "tau_m": np.concatenate([flexion.params["tau_m"], extension.params["tau_m"]]),
    }
    return DecoderModel("li", w.shape[1], params, dict(flexion.trainable), flexion.config,
                        output_dim=2 * n)
