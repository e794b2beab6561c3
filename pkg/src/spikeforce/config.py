"""Experiment configuration: YAML in, validated frozen dataclasses out.

Unknown keys, wrong types and out-of-range values are rejected with the
line number of the offending node.  ``dump_config`` writes a YAML document
that parses back to an equal object.
"""
from __future__ import annotations

import dataclasses
import hashlib
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError
from .synthgen import DIRECTIONS, PRESETS

DECODERS = ("baseline", "li", "lif", "encoded-li")


def _meta(choices=None, minimum=None, exclusive=False, length=None):
    return {"choices": choices, "minimum": minimum, "exclusive": exclusive, "length": length}


@dataclass(frozen=True)
class DatasetSection:
    preset: str = field(default="S1", metadata=_meta(choices=tuple(PRESETS)))
    # directory of dataset files; when set, nothing is generated
    path: Optional[str] = None
    directions: tuple[str, ...] = field(default=DIRECTIONS, metadata=_meta(choices=DIRECTIONS))
    fingers: tuple[int, ...] = field(default=(0, 1, 2, 3, 4), metadata=_meta(choices=(0, 1, 2, 3, 4)))
    isi_cov: float = field(default=0.2, metadata=_meta(minimum=0.0))
    common_drive_sd: float = field(default=0.15, metadata=_meta(minimum=0.0))
    gain_jitter: float = field(default=0.1, metadata=_meta(minimum=0.0))
    emg_noise_sd: float = field(default=0.02, metadata=_meta(minimum=0.0))


@dataclass(frozen=True)
class TrainSection:
    epochs: int = field(default=100, metadata=_meta(minimum=1))
    batch_size: int = field(default=16, metadata=_meta(minimum=1))
    # None picks 0.01 for LI and 0.001 for LIF
    lr: Optional[float] = field(default=None, metadata=_meta(minimum=0.0, exclusive=True))
    window_s: float = field(default=10.0, metadata=_meta(minimum=0.0, exclusive=True))
    window_overlap: float = field(default=0.5, metadata=_meta(minimum=0.0))
    surrogate_slope: float = field(default=25.0, metadata=_meta(minimum=0.0, exclusive=True))
    detach_reset: bool = True


@dataclass(frozen=True)
class DecoderSection:
    li_tau_m: float = field(default=80.0, metadata=_meta(minimum=0.0, exclusive=True))
    lif_tau_m_mean: float = field(default=30.0, metadata=_meta(minimum=0.0, exclusive=True))
    lif_tau_m_sd: float = field(default=1.5, metadata=_meta(minimum=0.0))
    threshold: float = field(default=0.045, metadata=_meta(minimum=0.0, exclusive=True))
    output_tau: float = field(default=80.0, metadata=_meta(minimum=0.0, exclusive=True))
    reset_mode: str = field(default="zero", metadata=_meta(choices=("zero", "subtract")))
    train_lif_tau_m: bool = True


@dataclass(frozen=True)
class EncoderSection:
    tau_m_enc: float = field(default=20.0, metadata=_meta(minimum=0.0, exclusive=True))
    # None uses the subject preset's thresholds
    thresholds: Optional[tuple[float, ...]] = field(default=None, metadata=_meta(minimum=0.0, exclusive=True,
                                                                                   length=3))
    # when set, thresholds are calibrated on the training EMG to this rate
    calibrate_hz: Optional[float] = field(default=None, metadata=_meta(minimum=0.0, exclusive=True))
    calibrate_tolerance: float = field(default=0.5, metadata=_meta(minimum=0.0, exclusive=True))


@dataclass(frozen=True)
class RobustnessSection:
    enabled: bool = True
    rates: tuple[float, ...] = field(default=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5), metadata=_meta(minimum=0.0))


@dataclass(frozen=True)
class OutputSection:
    dir: str = "runs/default"
    save_models: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = field(default=0, metadata=_meta(minimum=0))
    # model replicates; each trains its own initialisation and batch order
    seeds: tuple[int, ...] = field(default=(0,), metadata=_meta(minimum=0))
    decoders: tuple[str, ...] = field(default=("baseline", "li", "lif"), metadata=_meta(choices=DECODERS))
    dataset: DatasetSection = DatasetSection()
    train: TrainSection = TrainSection()
    decoder: DecoderSection = DecoderSection()
    encoder: EncoderSection = EncoderSection()
    robustness: RobustnessSection = RobustnessSection()
    output: OutputSection = OutputSection()

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with changes; nested sections accept dicts of field overrides."""
        for k, v in list(changes.items()):
            if isinstance(v, dict):
                changes[k] = dataclasses.replace(getattr(self, k), **v)
        return dataclasses.replace(self, **changes)


# --------------------------------------------------------------------------
# parsing

def _line(node) -> int:
    return node.start_mark.line + 1


def _scalar(node, kind, name):
    if not isinstance(node, yaml.ScalarNode):
        raise ConfigError(f"{name}: expected {kind.__name__}", _line(node))
    value = yaml.safe_load(yaml.serialize(node))
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise ConfigError(f"{name}: expected {kind.__name__}, got {node.value!r}", _line(node))
    return value


def _check(value, meta, name, node):
    if meta.get("choices") is not None and value not in meta["choices"]:
        raise ConfigError(f"{name}: {value!r} is not one of {list(meta['choices'])}", _line(node))
    lo = meta.get("minimum")
    if lo is not None and isinstance(value, (int, float)):
        bad = value <= lo if meta.get("exclusive") else value < lo
        if bad:
            op = ">" if meta.get("exclusive") else ">="
            raise ConfigError(f"{name}: must be {op} {lo}, got {value}", _line(node))


def _convert(node, hint, meta, name):
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if isinstance(node, yaml.ScalarNode) and node.tag == "tag:yaml.org,2002:null":
            return None
        return _convert(node, args[0], meta, name)
    if dataclasses.is_dataclass(hint):
        return _build(hint, node, name)
    if origin is tuple:
        if not isinstance(node, yaml.SequenceNode):
            raise ConfigError(f"{name}: expected a list", _line(node))
        item = typing.get_args(hint)[0]
        values = tuple(_convert(n, item, meta, f"{name}[{i}]") for i, n in enumerate(node.value))
        if meta.get("length") is not None and len(values) != meta["length"]:
            raise ConfigError(f"{name}: expected {meta['length']} entries, got {len(values)}", _line(node))
        return values
    value = _scalar(node, hint, name)
    _check(value, meta, name, node)
    return value


def _build(cls, node, prefix: str = ""):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{prefix or 'config'}: expected a mapping", _line(node))
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key_node, value_node in node.value:
        key = key_node.value
        name = f"{prefix}.{key}" if prefix else key
        if key not in fields:
            raise ConfigError(f"unknown key {name!r}; allowed: {sorted(fields)}", _line(key_node))
        if key in kwargs:
            raise ConfigError(f"duplicate key {name!r}", _line(key_node))
        kwargs[key] = _convert(value_node, hints[key], dict(fields[key].metadata), name)
    return cls(**kwargs)


def parse_config(text: str) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML syntax error: {exc.problem}", mark.line + 1 if mark else None) from None
    if node is None:
        return ExperimentConfig()
    cfg = _build(ExperimentConfig, node)
    _cross_checks(cfg, node)
    return cfg


def _cross_checks(cfg: ExperimentConfig, root) -> None:
    if not 0 <= cfg.train.window_overlap < 1:
        raise ConfigError("train.window_overlap must be in [0, 1)", _find_line(root, "train", "window_overlap"))
    if any(r > 1 for r in cfg.robustness.rates):
        raise ConfigError("robustness.rates must lie in [0, 1]", _find_line(root, "robustness", "rates"))
    for key in ("seeds", "decoders"):
        values = getattr(cfg, key)
        if not values:
            raise ConfigError(f"{key} must not be empty", _find_line(root, key))
        if len(set(values)) != len(values):
            raise ConfigError(f"{key} contains duplicates", _find_line(root, key))


def _find_line(node, *path):
    line = _line(node)
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            break
        for k, v in node.value:
            if k.value == key:
                node, line = v, _line(k)
                break
        else:
            break
    return line


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    return obj


def config_dict(cfg: ExperimentConfig) -> dict:
    return _plain(cfg)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_dict(cfg), sort_keys=False, default_flow_style=False)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()
