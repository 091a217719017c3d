"""Window encoders: the deterministic built-in pooling and weight-file networks.

The weight-file format is a JSON document with an ordered layer list; weights
use channels-last layout (conv kernels [kh][kw][in][out], dense [in][out],
flattened row-major) so exporters can dump tensors directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedEncoder
from .perception import LocalWindow

LATENT_DIM = 32

KIND_BUILTIN = "builtin_avgpool"
KIND_WEIGHT_FILE = "weight_file"


@dataclass(frozen=True)
class EncoderSpec:
    kind: str
    layers: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in (KIND_BUILTIN, KIND_WEIGHT_FILE):
            raise MalformedEncoder(f"unknown encoder kind {self.kind!r}")


def builtin_encoder() -> EncoderSpec:
    return EncoderSpec(kind=KIND_BUILTIN)


def load_encoder(path) -> EncoderSpec:
    with open(path) as f:
        doc = json.load(f)
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise MalformedEncoder("weight file carries no layers")
    spec = EncoderSpec(kind=KIND_WEIGHT_FILE, layers=tuple(_freeze(l) for l in layers))
    _validate_network(spec.layers)
    return spec


def _freeze(layer: dict) -> tuple:
    return tuple(sorted(layer.items(), key=lambda kv: kv[0]))


def _thaw(layer: tuple) -> dict:
    return dict(layer)


def _activation(name: str, x: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "identity":
        return x
    raise MalformedEncoder(f"unknown activation {name!r}")


def _conv2d(x: np.ndarray, layer: dict) -> np.ndarray:
    kh, kw = layer["kernel"]
    sh, sw = layer.get("stride", [1, 1])
    pt, pb, pl, pr = layer.get("padding", [0, 0, 0, 0])
    ci, co = layer["in_channels"], layer["out_channels"]
    w = np.asarray(layer["weights"], dtype=np.float32)
    b = np.asarray(layer.get("bias", np.zeros(co)), dtype=np.float32)
    if x.shape[2] != ci or w.size != kh * kw * ci * co or b.size != co:
        raise MalformedEncoder("conv2d weight/bias shapes do not match the layer")
    w = w.reshape(kh, kw, ci, co)
    x = np.pad(x, ((pt, pb), (pl, pr), (0, 0)))
    oh = (x.shape[0] - kh) // sh + 1
    ow = (x.shape[1] - kw) // sw + 1
    view = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(0, 1))
    view = view[::sh, ::sw]  # (oh, ow, ci, kh, kw)
    out = np.einsum("hwcij,ijco->hwo", view[:oh, :ow], w, dtype=np.float32)
    return _activation(layer.get("activation", "identity"), out + b)


def _pool2d(x: np.ndarray, layer: dict, reducer) -> np.ndarray:
    ph, pw = layer.get("size", [2, 2])
    sh, sw = layer.get("stride", [ph, pw])
    oh = (x.shape[0] - ph) // sh + 1
    ow = (x.shape[1] - pw) // sw + 1
    view = np.lib.stride_tricks.sliding_window_view(x, (ph, pw), axis=(0, 1))
    view = view[::sh, ::sw][:oh, :ow]
    return reducer(view, axis=(-2, -1))


def _batchnorm2d(x: np.ndarray, layer: dict) -> np.ndarray:
    scale = np.asarray(layer["scale"], dtype=np.float32)
    shift = np.asarray(layer["shift"], dtype=np.float32)
    if scale.size != x.shape[2] or shift.size != x.shape[2]:
        raise MalformedEncoder("batchnorm2d channel count mismatch")
    return x * scale + shift


def _dense(x: np.ndarray, layer: dict) -> np.ndarray:
    n_in, n_out = layer["in"], layer["out"]
    w = np.asarray(layer["weights"], dtype=np.float32)
    b = np.asarray(layer.get("bias", np.zeros(n_out)), dtype=np.float32)
    if x.size != n_in or w.size != n_in * n_out or b.size != n_out:
        raise MalformedEncoder("dense weight/bias shapes do not match the layer")
    out = x.reshape(-1) @ w.reshape(n_in, n_out) + b
    return _activation(layer.get("activation", "identity"), out)


def _validate_network(layers: tuple) -> None:
    for frozen in layers:
        layer = _thaw(frozen)
        if layer.get("type") not in ("conv2d", "maxpool2d", "avgpool2d",
                                     "batchnorm2d", "flatten", "dense"):
            raise MalformedEncoder(f"unknown layer type {layer.get('type')!r}")
    probe = np.zeros((64, 64, 1), dtype=np.float32)
    out = _run_network(probe, layers)
    if out.shape != (LATENT_DIM,):
        raise MalformedEncoder(f"network output dimension {out.shape} != ({LATENT_DIM},)")


def _run_network(x: np.ndarray, layers: tuple) -> np.ndarray:
    for frozen in layers:
        layer = _thaw(frozen)
        kind = layer["type"]
        if kind == "conv2d":
            x = _conv2d(x, layer)
        elif kind == "maxpool2d":
            x = _pool2d(x, layer, np.max)
        elif kind == "avgpool2d":
            x = _pool2d(x, layer, np.mean)
        elif kind == "batchnorm2d":
            x = _batchnorm2d(x, layer)
        elif kind == "flatten":
            x = x.reshape(-1)
        elif kind == "dense":
            x = _dense(x, layer)
    return np.asarray(x, dtype=np.float32).reshape(-1)


def encode_window(window: LocalWindow, encoder: EncoderSpec) -> np.ndarray:
    """Deterministic 32-vector for a local window."""
    if encoder.kind == KIND_BUILTIN:
        # 4x8 tile grid over the 64x64 window, per-tile mean occupancy
        v = window.values.reshape(4, 16, 8, 8)
        return v.mean(axis=(1, 3)).reshape(-1).astype(float)
    out = _run_network(window.values[:, :, None].astype(np.float32), encoder.layers)
    if out.shape != (LATENT_DIM,):
        raise MalformedEncoder(f"latent dimension {out.shape[0]} != {LATENT_DIM}")
    return out.astype(float)
