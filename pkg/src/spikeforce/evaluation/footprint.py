"""Parameter counts, memory footprint and latency per decoder.

Memory assumes 4-byte (float32) storage of every parameter that is not
structurally zero: dense weights and biases always count, one-to-one
projections count only their diagonal.  Paths that start from decomposed
motor units also pay for the separation matrix, ``n_units x n_channels``
floats; the encoding path does not.  When a trained model is supplied, the
number of entries that are actually nonzero is reported alongside.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..baseline import LinearModel, WindowSpec
from ..decoders import DecoderModel, parameter_counts, parameter_inventory
from ..errors import ConfigError
from ..signals import DEFAULT_DT_MS, N_CHANNELS, N_FINGERS

BYTES_PER_PARAM = 4
PATHS = ("baseline", "li", "lif", "encoded-li")


@dataclass(frozen=True)
class FootprintReport:
    path: str
    n_inputs: int
    total_params: int
    trainable_params: int
    nonzero_params: int
    parameter_memory: int
    decomposition_memory: int
    latency_ms: float
    # totals if one-to-one projections are stored as full square matrices
    total_params_full: int
    # exact nonzero entries of a trained model (None without a model)
    trained_nonzero: int | None = None

    @property
    def memory_upper_bound(self) -> int:
        return BYTES_PER_PARAM * self.total_params_full


def decomposition_memory(n_units: int, n_channels: int = N_CHANNELS) -> int:
    return n_units * n_channels * BYTES_PER_PARAM


def _encoder_counts(n_channels: int) -> tuple[int, int, int]:
    """(diagonal-only stored, full-matrix stored, nonzero) for the channel encoder.

    One weight per channel (1.0, diagonal), one threshold per channel and a
    shared membrane time constant; a full ``Linear(c, c)`` layout adds the
    off-diagonal weights and a zero bias per channel.
    """
    diag = n_channels + n_channels + 1
    full = n_channels * n_channels + n_channels + n_channels + 1
    return diag, full, diag


def footprint(path: str, n_inputs: int, model=None, n_channels: int = N_CHANNELS,
              dt: float = DEFAULT_DT_MS, window: WindowSpec = WindowSpec()) -> FootprintReport:
    """Footprint of one decoding path.

    ``n_inputs`` is the number of motor units (or channels for
    ``encoded-li``).  Counts follow the architecture; ``model`` only adds the
    trained nonzero count (and the intercept, if the baseline has one).
    """
    if path not in PATHS:
        raise ConfigError(f"unknown decoding path {path!r}; expected one of {PATHS}")
    if path == "baseline":
        total = N_FINGERS * n_inputs
        trained = None
        if model is not None:
            intercept = bool(np.any(model.intercept))
            total += N_FINGERS if intercept else 0
            trained = int(np.count_nonzero(model.coefficients)) + (
                int(np.count_nonzero(model.intercept)) if intercept else 0)
        return FootprintReport(path, n_inputs, total, total, total, BYTES_PER_PARAM * total,
                               decomposition_memory(n_inputs, n_channels), window.hop_ms, total, trained)

    kind = "lif" if path == "lif" else "li"
    total, trainable = parameter_counts(kind, n_inputs)
    # conv projection: off-diagonal weights and bias are structurally zero
    nonzero = total - (N_FINGERS * N_FINGERS - N_FINGERS + N_FINGERS if kind == "lif" else 0)
    trained = None
    if model is not None:
        inv = parameter_inventory(model)
        total = sum(e.stored for e in inv)
        trainable = sum(e.stored for e in inv if e.trainable)
        trained = sum(e.nonzero for e in inv)
    full = total
    decomp = decomposition_memory(n_inputs, n_channels)
    if path == "encoded-li":
        diag, full_enc, nz = _encoder_counts(n_inputs)
        # per-neuron synaptic time constants of the readout, stored in the full layout
        full = total + full_enc + N_FINGERS
        total, nonzero, decomp = total + diag, nonzero + nz, 0
        trained = None if trained is None else trained + nz
    return FootprintReport(path, n_inputs, total, trainable, nonzero, BYTES_PER_PARAM * nonzero,
                           decomp, dt, full, trained)
