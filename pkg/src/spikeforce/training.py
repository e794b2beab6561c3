"""Surrogate-gradient BPTT with Adam for both decoder kinds.

The training forward pass runs a whole minibatch of windows at once
(``(batch, steps, ...)`` arrays, explicit loop over time) and keeps every
intermediate trace; the backward pass walks the same recursions in reverse.
Spikes use a hard threshold in the forward pass and the fast-sigmoid
derivative ``k / (1 + k|v|)**2`` in the backward pass.

Readout membrane time constants, when trainable, are optimised through
``rho`` with ``beta = sigmoid(rho)`` so that ``beta`` stays in (0, 1).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .decoders import DecoderModel, DecoderState, predict_stream
from .dynamics import decay_factor
from .errors import DivergenceError, ParameterError
from .signals import ForceTrajectory, SpikeTrainSet

log = logging.getLogger(__name__)

DEFAULT_LR = {"li": 0.01, "lif": 0.001}


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    lr: float | None = None
    window_s: float = 10.0
    window_overlap: float = 0.5
    surrogate_slope: float = 25.0
    shuffle_tasks: bool = True
    detach_reset: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.lr is not None and not self.lr > 0:
            raise ParameterError("lr must be positive")
        if not 0 <= self.window_overlap < 1:
            raise ParameterError("window_overlap must be in [0, 1)")

    def learning_rate(self, kind: str) -> float:
        return self.lr if self.lr is not None else DEFAULT_LR[kind]


# --------------------------------------------------------------------------
# windows

def window_starts(n_steps: int, length: int, hop: int) -> np.ndarray:
    if n_steps < length:
        return np.zeros(0, dtype=int)
    return np.arange((n_steps - length) // hop + 1) * hop


def segment_windows(trials, window_steps: int, overlap: float = 0.5,
                    rng: np.random.Generator | None = None, concatenate: bool = True):
    """Cut trials into overlapping training windows.

    ``trials`` is a list of ``(SpikeTrainSet, ForceTrajectory)`` pairs.  With
    ``rng`` the trial order is shuffled first.  By default the trials are
    concatenated into one continuous recording before cutting (a repetition
    is a sequence of finger tasks); with ``concatenate=False`` each trial is
    cut on its own and trials shorter than a window are skipped with a
    warning.  Returns a list of ``(spikes, force)`` window pairs.
    """
    hop = int(round(window_steps * (1.0 - overlap)))
    if window_steps < 1 or hop < 1:
        raise ParameterError("window and hop must span at least one step")
    trials = list(trials)
    if rng is not None:
        trials = [trials[i] for i in rng.permutation(len(trials))]
    if concatenate and trials:
        spikes = SpikeTrainSet.concatenate([s for s, _ in trials])
        force = ForceTrajectory.concatenate([f for _, f in trials])
        trials = [(spikes, force)]
    out = []
    for spikes, force in trials:
        if spikes.n_steps < window_steps:
            warnings.warn(f"sequence of {spikes.n_steps} steps is shorter than one "
                          f"{window_steps}-step window; skipped", stacklevel=2)
            continue
        for s in window_starts(spikes.n_steps, window_steps, hop):
            out.append((spikes.segment(s, s + window_steps), force.segment(s, s + window_steps)))
    return out


# --------------------------------------------------------------------------
# surrogate

def surrogate_spike_grad(v, slope: float = 25.0):
    """Fast-sigmoid surrogate derivative ``k / (1 + k|v|)^2``; peaks at ``k`` for v = 0."""
    return slope / (1.0 + slope * np.abs(v)) ** 2


def smooth_spike(v, slope: float = 25.0):
    """A differentiable spike function whose exact derivative is the surrogate."""
    return 0.5 + slope * v / (1.0 + slope * np.abs(v))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    return np.log(p) - np.log1p(-p)


# --------------------------------------------------------------------------
# trainable parameter vector <-> model

def trainable_arrays(model: DecoderModel) -> dict[str, np.ndarray]:
    """Optimiser-facing copies of the trainable parameters (``tau_m`` becomes ``rho``)."""
    out = {}
    for name, flag in model.trainable.items():
        if not flag:
            continue
        if name == "tau_m":
            out["rho"] = _logit(decay_factor(model.params["tau_m"], model.dt))
        else:
            out[name] = model.params[name].copy()
    return out


def apply_arrays(model: DecoderModel, arrays: dict[str, np.ndarray]) -> DecoderModel:
    new = model.copy()
    for name, value in arrays.items():
        if name == "rho":
            new.params["tau_m"] = -model.dt / np.log(_sigmoid(value))
        else:
            new.params[name] = value.copy()
    return new


# --------------------------------------------------------------------------
# batched forward / backward

@dataclass
class _Trace:
    x: np.ndarray
    beta: np.ndarray
    traces: dict = field(default_factory=dict)


def forward(model: DecoderModel, x: np.ndarray, rho: np.ndarray | None = None,
            spike_mode: str = "hard", slope: float = 25.0):
    """Batched forward pass; ``x`` is ``(batch, steps, inputs)``.

    Returns ``(y, trace)`` with ``y`` of shape ``(batch, steps, 5)``.
    ``spike_mode="smooth"`` replaces the hard threshold by
    :func:`smooth_spike` (used as a differentiable oracle in tests).
    """
    p, cfg, dt = model.params, model.config, model.dt
    beta = decay_factor(p["tau_m"], dt) if rho is None else _sigmoid(rho)
    alpha = decay_factor(cfg.tau_syn, dt)
    gamma = decay_factor(cfg.output_tau, dt)
    B, T, _ = x.shape
    n = model.output_dim
    z = x @ p["weight"].T + p["bias"]
    tr = _Trace(x, beta)
    u = np.zeros((B, T, n))
    i = np.zeros((B, n))
    m = np.zeros((B, n))
    if model.kind == "li":
        for t in range(T):
            i = alpha * i + z[:, t]
            m = beta * m + i
            u[:, t] = m
        tr.traces["u"] = u
        last = u
    else:
        thr = p["threshold"]
        b2 = decay_factor(p["conv_tau_m"], dt)
        b3 = decay_factor(p["smooth_tau_m"], dt)
        c, w3 = p["conv_weight"], p["smooth_weight"]
        v = np.zeros((B, T, n))
        s = np.zeros((B, T, n))
        u3 = np.zeros((B, T, n))
        u2 = np.zeros((B, n))
        i3 = np.zeros((B, n))
        m3 = np.zeros((B, n))
        for t in range(T):
            i = alpha * i + z[:, t]
            vt = beta * m + i
            if spike_mode == "hard":
                st = (vt >= thr).astype(np.float64)
            else:
                st = smooth_spike(vt - thr, slope)
            if cfg.reset_mode == "zero":
                m = vt * (1.0 - st)
            else:
                m = vt - thr * st
            u2 = b2 * u2 + c * st
            i3 = alpha * i3 + w3 * u2
            m3 = b3 * m3 + i3
            v[:, t], s[:, t], u[:, t], u3[:, t] = vt, st, m, m3
        tr.traces.update(v=v, s=s, u=u, b2=b2, b3=b3)
        last = u3
    y = np.empty_like(last)
    acc = np.zeros((B, n))
    for t in range(T):
        acc = gamma * acc + (1.0 - gamma) * last[:, t]
        y[:, t] = acc
    return y, tr


def backward(model: DecoderModel, tr: _Trace, dy: np.ndarray, slope: float = 25.0,
             detach_reset: bool = True) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. weight, bias and rho given ``dL/dy``."""
    p, cfg, dt = model.params, model.config, model.dt
    alpha = decay_factor(cfg.tau_syn, dt)
    gamma = decay_factor(cfg.output_tau, dt)
    beta = tr.beta
    B, T, n = dy.shape
    # reverse the output smoother: a_last[t] = dL/d(last[t])
    a_last = np.empty_like(dy)
    acc = np.zeros((B, n))
    for t in range(T - 1, -1, -1):
        acc = dy[:, t] + gamma * acc
        a_last[:, t] = (1.0 - gamma) * acc
    dz = np.empty_like(dy)
    u = tr.traces["u"]
    dbeta = np.zeros(n)
    if model.kind == "li":
        au = np.zeros((B, n))
        ai = np.zeros((B, n))
        for t in range(T - 1, -1, -1):
            au = a_last[:, t] + beta * au
            ai = au + alpha * ai
            dz[:, t] = ai
            if t > 0:
                dbeta += np.sum(au * u[:, t - 1], axis=0)
    else:
        v, s = tr.traces["v"], tr.traces["s"]
        b2, b3 = tr.traces["b2"], tr.traces["b3"]
        thr, c, w3 = p["threshold"], p["conv_weight"], p["smooth_weight"]
        au3 = np.zeros((B, n))
        ai3 = np.zeros((B, n))
        au2 = np.zeros((B, n))
        av_next = np.zeros((B, n))
        ai = np.zeros((B, n))
        for t in range(T - 1, -1, -1):
            au3 = a_last[:, t] + b3 * au3
            ai3 = au3 + alpha * ai3
            au2 = w3 * ai3 + b2 * au2
            au1 = beta * av_next  # grad w.r.t. post-reset membrane
            ds = c * au2
            st, vt = s[:, t], v[:, t]
            if cfg.reset_mode == "zero":
                dv = au1 * (1.0 - st)
                if not detach_reset:
                    ds = ds - au1 * vt
            else:
                dv = au1
                if not detach_reset:
                    ds = ds - au1 * thr
            dv = dv + ds * surrogate_spike_grad(vt - thr, slope)
            ai = dv + alpha * ai
            dz[:, t] = ai
            if t > 0:
                dbeta += np.sum(dv * u[:, t - 1], axis=0)
            av_next = dv
    grads = {
        "weight": np.einsum("btj,bti->ji", dz, tr.x, optimize=True),
        "bias": dz.sum(axis=(0, 1)),
        "rho": dbeta * beta * (1.0 - beta),
    }
    return grads


def loss_and_grad(model: DecoderModel, x: np.ndarray, target: np.ndarray,
                  rho: np.ndarray | None = None, spike_mode: str = "hard",
                  slope: float = 25.0, detach_reset: bool = True):
    """Mean-squared-error loss over (batch, steps, fingers) and its gradients."""
    y, tr = forward(model, x, rho, spike_mode, slope)
    err = y - target
    loss = float(np.mean(err * err))
    grads = backward(model, tr, 2.0 * err / err.size, slope, detach_reset)
    return loss, grads


# --------------------------------------------------------------------------
# optimiser

class Adam:
    """Adam with bias-corrected moments (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, value in params.items():
            g = grads[k]
            if k not in self.m:
                self.m[k] = np.zeros_like(value)
                self.v[k] = np.zeros_like(value)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# --------------------------------------------------------------------------
# training loop

@dataclass
class TrainResult:
    model: DecoderModel
    losses: list[float]


def stack_windows(windows) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([s.raster for s, _ in windows]).astype(np.float64)
    y = np.stack([f.values for _, f in windows])
    return x, y


def train(model: DecoderModel, trials, cfg: TrainConfig | None = None,
          rng: np.random.Generator | None = None) -> TrainResult:
    """Fit ``model`` on a list of ``(spikes, force)`` trials.

    Trials are shuffled (task order), concatenated and cut into overlapping
    windows; each window starts from zero state.  Only parameters flagged
    trainable are updated.  Deterministic for a given ``rng`` / ``cfg.seed``.
    """
    cfg = cfg or TrainConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    window_steps = int(round(cfg.window_s * 1000.0 / model.dt))
    order_rng = rng if cfg.shuffle_tasks else None
    windows = segment_windows(trials, window_steps, cfg.window_overlap, order_rng)
    if not windows:
        raise ParameterError("no training windows: trials shorter than one window")
    x_all, y_all = stack_windows(windows)
    arrays = trainable_arrays(model)
    opt = Adam(cfg.learning_rate(model.kind))
    losses = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(windows))
        total = 0.0
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            current = apply_arrays(model, {k: v for k, v in arrays.items() if k != "rho"})
            loss, grads = loss_and_grad(current, x_all[idx], y_all[idx], arrays.get("rho"),
                                        slope=cfg.surrogate_slope, detach_reset=cfg.detach_reset)
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became {loss} at epoch {epoch}, batch starting {start}")
            opt.step(arrays, {k: grads[k] for k in arrays})
            total += loss * len(idx)
        losses.append(total / len(perm))
        log.debug("epoch %d loss %.6g", epoch, losses[-1])
    return TrainResult(apply_arrays(model, arrays), losses)


# --------------------------------------------------------------------------
# inference

def infer_segments(model: DecoderModel, segments, carry: DecoderState | None = None):
    """Stream segments through ``model`` one at a time, yielding each prediction.

    State is carried across segments without resets, so memory use depends
    only on the segment size.
    """
    state = carry
    for seg in segments:
        pred, state = predict_stream(model, seg, state)
        yield pred


def infer(model: DecoderModel, spikes: SpikeTrainSet, carry: DecoderState | None = None,
          segment_s: float = 10.0) -> ForceTrajectory:
    """Batch-size-one inference over ``segment_s``-second segments with carried state."""
    seg = max(1, int(round(segment_s * 1000.0 / model.dt)))
    parts = (spikes.segment(s, s + seg) for s in range(0, spikes.n_steps, seg))
    preds = list(infer_segments(model, parts, carry))
    if not preds:
        return ForceTrajectory(np.zeros((0, model.output_dim)), model.dt)
    return ForceTrajectory.concatenate(preds)
