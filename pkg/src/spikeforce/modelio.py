"""Versioned binary model files (layout documented in docs/formats.md).

::

    b"spikeforce-model 1\\n"
    uint32 little-endian: byte length H of the JSON header
    H bytes: UTF-8 JSON header, keys sorted
    parameter arrays, float64 little-endian, C order, in header order

The header holds ``kind``, ``input_dim``, ``output_dim``, ``config``, an
``arrays`` list of ``{name, shape, trainable}`` and a free-form ``meta``
mapping (decoding path, direction, seed).  Baseline linear models use kind
``"baseline"``.
"""
from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .baseline import LinearModel
from .decoders import DecoderConfig, DecoderModel
from .errors import DatasetError

MAGIC = b"spikeforce-model"
VERSION = 1
_LE_F64 = np.dtype("<f8")


def _entries(model):
    if isinstance(model, LinearModel):
        arrays = {"coefficients": model.coefficients, "intercept": model.intercept}
        if model.feature_min is not None:
            arrays.update(feature_min=model.feature_min, feature_max=model.feature_max)
        header = {"kind": "baseline", "input_dim": int(model.n_features),
                  "output_dim": int(model.coefficients.shape[0]),
                  "config": {"hop_ms": model.hop_ms}}
        return header, arrays, {k: k in ("coefficients", "intercept") for k in arrays}
    header = {"kind": model.kind, "input_dim": int(model.input_dim), "output_dim": int(model.output_dim),
              "config": dataclasses.asdict(model.config)}
    names = sorted(model.params)
    return header, {k: model.params[k] for k in names}, {k: bool(model.trainable[k]) for k in names}


def dumps_model(model, meta: dict | None = None) -> bytes:
    header, arrays, trainable = _entries(model)
    header["meta"] = dict(meta or {})
    header["arrays"] = [{"name": k, "shape": list(np.shape(v)), "trainable": trainable[k]}
                        for k, v in arrays.items()]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(v, dtype=_LE_F64).tobytes() for v in arrays.values())
    return MAGIC + f" {VERSION}\n".encode() + struct.pack("<I", len(blob)) + blob + body


def _split(data: bytes):
    first, sep, rest = data.partition(b"\n")
    parts = first.split(b" ")
    if not sep or len(parts) != 2 or parts[0] != MAGIC:
        raise DatasetError("not a spikeforce model file")
    if parts[1] != str(VERSION).encode():
        raise DatasetError(f"unsupported model file version {parts[1].decode(errors='replace')}")
    if len(rest) < 4:
        raise DatasetError("truncated model header")
    (h,) = struct.unpack("<I", rest[:4])
    header = json.loads(rest[4:4 + h].decode("utf-8"))
    return header, rest, 4 + h


def loads_model(data: bytes):
    header, rest, offset = _split(data)
    arrays, trainable = {}, {}
    for entry in header["arrays"]:
        n = int(np.prod(entry["shape"], dtype=np.int64))
        chunk = rest[offset:offset + 8 * n]
        if len(chunk) != 8 * n:
            raise DatasetError(f"truncated data for array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype=_LE_F64).astype(np.float64).reshape(entry["shape"])
        trainable[entry["name"]] = entry["trainable"]
        offset += 8 * n
    if offset != len(rest):
        raise DatasetError(f"{len(rest) - offset} trailing bytes after the last array")
    if header["kind"] == "baseline":
        return LinearModel(arrays["coefficients"], arrays["intercept"], arrays.get("feature_min"),
                           arrays.get("feature_max"), header["config"]["hop_ms"])
    return DecoderModel(header["kind"], header["input_dim"], arrays, trainable,
                        DecoderConfig(**header["config"]), header["output_dim"])


def save_model(model, path, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps_model(model, meta))


def load_model(path):
    return loads_model(Path(path).read_bytes())


def model_meta(path) -> dict:
    """The ``meta`` mapping stored with a model file."""
    return _split(Path(path).read_bytes())[0].get("meta", {})
