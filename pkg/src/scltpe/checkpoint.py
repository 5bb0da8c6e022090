"""Text checkpoints: layer shapes plus row-major values, stored as JSON.

Floats are written with ``repr`` semantics (the ``json`` default), so a
save/load cycle reproduces every weight bit for bit. Adam moments are not
stored; a loaded model is for inference only.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .classifier import ClassifierParams, ClassifierSpec
from .data import NormalizationStats
from .exceptions import ParseError
from .numcore import Dense, ParamTensor
from .pipeline import Model
from .scl import EncoderParams, EncoderSpec

FORMAT = "scltpe-checkpoint"
VERSION = 1


def _array_to_json(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "values": a.reshape(-1).tolist()}


def _array_from_json(d: dict) -> np.ndarray:
    shape = tuple(int(s) for s in d["shape"])
    values = np.asarray(d["values"], dtype=np.float64)
    if values.size != int(np.prod(shape)):
        raise ParseError(f"array of shape {shape} has {values.size} values")
    return values.reshape(shape)


def _layers_to_json(layers):
    return [{"W": _array_to_json(l.W.value), "b": _array_to_json(l.b.value)} for l in layers]


def _layers_from_json(items):
    return [Dense(ParamTensor(_array_from_json(it["W"])), ParamTensor(_array_from_json(it["b"])))
            for it in items]


def model_to_dict(model: Model, extra: dict | None = None) -> dict:
    enc, head = model.encoder, model.head
    return {
        "format": FORMAT,
        "version": VERSION,
        "tau": model.tau,
        "class_names": list(model.class_names),
        "positive_class": model.positive_class,
        "stats": {"mean": _array_to_json(model.stats.mean), "std": _array_to_json(model.stats.std)},
        "encoder": {
            "layer_widths": list(enc.spec.layer_widths),
            "tau": enc.spec.tau,
            "normalize_output": enc.spec.normalize_output,
            "layers": _layers_to_json(enc.layers),
        },
        "classifier": {
            **{k: v for k, v in asdict(head.spec).items() if k != "layer_widths"},
            "layer_widths": list(head.spec.layer_widths),
            "layers": _layers_to_json(head.layers),
        },
        "extra": extra or {},
    }


def model_from_dict(d: dict) -> Model:
    if d.get("format") != FORMAT:
        raise ParseError(f"not a checkpoint (format={d.get('format')!r})")
    if d.get("version") != VERSION:
        raise ParseError(f"unsupported checkpoint version {d.get('version')!r}")
    e = d["encoder"]
    enc_spec = EncoderSpec(tuple(e["layer_widths"]), e["tau"], e["normalize_output"])
    encoder = EncoderParams(enc_spec, _layers_from_json(e["layers"]))
    c = d["classifier"]
    head_spec = ClassifierSpec(tuple(c["layer_widths"]), c["epochs"], c["batch_size"], c["lr"], c["seed"])
    head = ClassifierParams(head_spec, _layers_from_json(c["layers"]))
    for spec_w, layers in ((enc_spec.layer_widths, encoder.layers), (head_spec.layer_widths, head.layers)):
        got = [layers[0].fan_in] + [l.fan_out for l in layers] if layers else [spec_w[0]]
        if tuple(got) != tuple(spec_w):
            raise ParseError(f"layer shapes {got} disagree with declared widths {list(spec_w)}")
    stats = NormalizationStats(_array_from_json(d["stats"]["mean"]), _array_from_json(d["stats"]["std"]))
    return Model(encoder, head, stats, tuple(d["class_names"]), int(d["positive_class"]), float(d["tau"]))


def save_model(model: Model, path, extra: dict | None = None):
    Path(path).write_text(json.dumps(model_to_dict(model, extra), indent=1) + "\n")


def load_model(path) -> Model:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid checkpoint JSON: {exc.msg}", path, exc.lineno) from exc
    try:
        return model_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed checkpoint: missing or bad field {exc}", path) from exc
