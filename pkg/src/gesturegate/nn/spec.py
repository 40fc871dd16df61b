"""Declarative model descriptions: layer kinds, shape chaining, parameter shapes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from gesturegate.errors import ModelError, ShapeError

KINDS = (
    "Conv1D",
    "BatchNorm",
    "ChannelNorm",
    "MaxPool1D",
    "Dropout",
    "Flatten",
    "Dense",
    "ReLU",
    "Softmax",
)

# trainable parameter names per kind, in serialization order
TRAINABLE = {
    "Conv1D": ("kernel", "bias"),
    "Dense": ("kernel", "bias"),
    "BatchNorm": ("gain", "shift"),
    "ChannelNorm": ("gain", "shift"),
}
STATE = {"BatchNorm": ("running_mean", "running_var")}

BN_MOMENTUM = 0.99
NORM_EPS = 1e-3


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown layer kind {self.kind!r}")
        p = self.params
        for key in ("filters", "kernel_size", "units", "pool_size", "stride"):
            if key in p and int(p[key]) < 1:
                raise ModelError(f"{self.kind}.{key} must be >= 1, got {p[key]}")
        if self.kind == "Dropout" and not 0 <= p.get("rate", 0) < 1:
            raise ModelError(f"dropout rate must be in [0, 1), got {p.get('rate')}")
        if p.get("padding", "same") not in ("same", "valid"):
            raise ModelError(f"padding must be 'same' or 'valid', got {p['padding']!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        d = dict(d)
        return cls(d.pop("kind"), d)


def conv1d(filters: int, kernel_size: int, padding: str = "same") -> LayerSpec:
    return LayerSpec("Conv1D", {"filters": filters, "kernel_size": kernel_size, "padding": padding})


def max_pool1d(pool_size: int, stride: int | None = None, padding: str = "valid") -> LayerSpec:
    return LayerSpec(
        "MaxPool1D", {"pool_size": pool_size, "stride": stride or pool_size, "padding": padding}
    )


def dense(units: int) -> LayerSpec:
    return LayerSpec("Dense", {"units": units})


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("Dropout", {"rate": rate})


def batch_norm() -> LayerSpec:
    return LayerSpec("BatchNorm")


def channel_norm() -> LayerSpec:
    return LayerSpec("ChannelNorm")


def relu() -> LayerSpec:
    return LayerSpec("ReLU")


def flatten() -> LayerSpec:
    return LayerSpec("Flatten")


def softmax() -> LayerSpec:
    return LayerSpec("Softmax")


def conv_out_len(length: int, kernel_size: int, padding: str) -> int:
    return length if padding == "same" else length - kernel_size + 1


def pool_out_len(length: int, pool_size: int, stride: int, padding: str) -> int:
    # 'valid' floors the trailing remainder; 'same' keeps a partial last window
    if padding == "same":
        return math.ceil(length / stride)
    return (length - pool_size) // stride + 1 if length >= pool_size else 0


@dataclass(frozen=True)
class ModelSpec:
    input_shape: tuple[int, int]  # (channels, length)
    layers: tuple[LayerSpec, ...]
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers or self.layers[-1].kind != "Softmax":
            raise ModelError(f"{self.name}: final layer must be Softmax")
        self.shapes()  # validates the chain

    def shapes(self) -> list[tuple[int, ...]]:
        """Per-sample output shape after every layer (index 0 is the input)."""
        shape: tuple[int, ...] = self.input_shape
        out = [shape]
        for i, layer in enumerate(self.layers):
            shape = _next_shape(layer, shape, f"{self.name}[{i}] {layer.kind}")
            out.append(shape)
        return out

    @property
    def n_classes(self) -> int:
        return self.shapes()[-1][0]

    def to_json(self) -> str:
        """Canonical text form (stable key order, no whitespace)."""
        doc = {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": [l.to_dict() for l in self.layers],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        doc = json.loads(text)
        return cls(
            tuple(doc["input_shape"]),
            tuple(LayerSpec.from_dict(d) for d in doc["layers"]),
            doc["name"],
        )


def _next_shape(layer: LayerSpec, shape: tuple[int, ...], where: str) -> tuple[int, ...]:
    p = layer.params
    kind = layer.kind
    if kind in ("Conv1D", "MaxPool1D", "ChannelNorm") and len(shape) != 2:
        raise ShapeError(f"{where}: needs a (channels, length) input, got {shape}")
    if kind in ("Dense", "Softmax") and len(shape) != 1:
        raise ShapeError(f"{where}: needs a flat input, got {shape}")
    if kind == "Conv1D":
        length = conv_out_len(shape[1], p["kernel_size"], p.get("padding", "same"))
        if length < 1:
            raise ShapeError(f"{where}: kernel {p['kernel_size']} longer than input {shape[1]}")
        return (p["filters"], length)
    if kind == "MaxPool1D":
        length = pool_out_len(shape[1], p["pool_size"], p.get("stride", p["pool_size"]), p.get("padding", "valid"))
        if length < 1:
            raise ShapeError(f"{where}: pooling {shape} leaves an empty feature map")
        return (shape[0], length)
    if kind == "Flatten":
        return (math.prod(shape),)
    if kind == "Dense":
        return (p["units"],)
    return shape


def param_shapes(spec: ModelSpec) -> list[dict[str, tuple[int, ...]]]:
    """Shapes of every parameter block (trainable and state), per layer."""
    shapes = spec.shapes()
    blocks = []
    for layer, in_shape in zip(spec.layers, shapes[:-1]):
        p = layer.params
        if layer.kind == "Conv1D":
            blocks.append({"kernel": (p["filters"], in_shape[0], p["kernel_size"]), "bias": (p["filters"],)})
        elif layer.kind == "Dense":
            blocks.append({"kernel": (in_shape[0], p["units"]), "bias": (p["units"],)})
        elif layer.kind == "BatchNorm":
            c = (in_shape[0],)
            blocks.append({"gain": c, "shift": c, "running_mean": c, "running_var": c})
        elif layer.kind == "ChannelNorm":
            c = (in_shape[0],)
            blocks.append({"gain": c, "shift": c})
        else:
            blocks.append({})
    return blocks


def count_parameters(spec: ModelSpec, trainable_only: bool = True) -> int:
    total = 0
    for layer, block in zip(spec.layers, param_shapes(spec)):
        for name, shape in block.items():
            if trainable_only and name not in TRAINABLE.get(layer.kind, ()):
                continue
            total += math.prod(shape)
    return total
