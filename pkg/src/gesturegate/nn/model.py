"""Whole-model forward/backward over a :class:`ModelSpec` and its weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gesturegate.errors import ModelError, ShapeError
from gesturegate.nn.layers import INFER, TRAIN, layer_backward, layer_forward
from gesturegate.nn.spec import TRAINABLE, ModelSpec, param_shapes

WEIGHTS_VERSION = 1
DTYPE = np.float32
PROB_FLOOR = 1e-12


@dataclass
class ModelWeights:
    blocks: list[dict[str, np.ndarray]]
    version: int = WEIGHTS_VERSION

    @property
    def dtype(self):
        for block in self.blocks:
            for arr in block.values():
                return arr.dtype
        return np.dtype(DTYPE)

    def copy(self) -> "ModelWeights":
        return ModelWeights([{k: v.copy() for k, v in b.items()} for b in self.blocks], self.version)

    def trainable(self, spec: ModelSpec):
        """Yield ``(layer_index, name, array)`` for every trainable parameter."""
        for i, (layer, block) in enumerate(zip(spec.layers, self.blocks)):
            for name in TRAINABLE.get(layer.kind, ()):
                yield i, name, block[name]

    def check(self, spec: ModelSpec) -> None:
        expected = param_shapes(spec)
        if len(expected) != len(self.blocks):
            raise ModelError(f"weights have {len(self.blocks)} blocks, spec has {len(expected)} layers")
        for i, (want, got) in enumerate(zip(expected, self.blocks)):
            if set(want) != set(got):
                raise ModelError(f"layer {i}: parameter names {sorted(got)} != {sorted(want)}")
            for name, shape in want.items():
                if got[name].shape != shape:
                    raise ModelError(f"layer {i}.{name}: shape {got[name].shape} != {shape}")
            if "running_var" in got and not np.all(got["running_var"] > 0):
                raise ModelError(f"layer {i}: running variance must be positive")


def init_weights(spec: ModelSpec, seed: int = 0, dtype=DTYPE) -> ModelWeights:
    """Glorot-uniform kernels, zero biases, unit gain / zero shift for norm layers."""
    rng = np.random.default_rng(seed)
    blocks = []
    for layer, shapes in zip(spec.layers, param_shapes(spec)):
        block = {}
        for name, shape in shapes.items():
            if name == "kernel":
                if layer.kind == "Conv1D":
                    f, c, k = shape
                    fan_in, fan_out = c * k, f * k
                else:
                    fan_in, fan_out = shape
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                block[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
            elif name in ("gain", "running_var"):
                block[name] = np.ones(shape, dtype=dtype)
            else:
                block[name] = np.zeros(shape, dtype=dtype)
        blocks.append(block)
    return ModelWeights(blocks)


def _batched(spec: ModelSpec, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    single = x.ndim == len(spec.input_shape)
    if single:
        x = x[None]
    if x.shape[1:] != tuple(spec.input_shape):
        raise ShapeError(f"{spec.name}: input shape {x.shape[1:]} != {tuple(spec.input_shape)}")
    return x, single


def forward(spec: ModelSpec, w: ModelWeights, x: np.ndarray, mode: str = INFER, rng=None, keep_caches=False):
    """Batched forward pass. Returns ``(probs, caches)``; caches is None unless requested."""
    if mode == TRAIN and rng is None:
        rng = np.random.default_rng()
    h = x
    caches = [] if keep_caches else None
    for i, (layer, block) in enumerate(zip(spec.layers, w.blocks)):
        h, cache = layer_forward(layer, block, h, mode, rng)
        if not np.all(np.isfinite(h)):
            raise ModelError(f"{spec.name}: non-finite output at layer {i} ({layer.kind})")
        if keep_caches:
            caches.append(cache)
    return h, caches


def model_forward(spec: ModelSpec, w: ModelWeights, x: np.ndarray) -> np.ndarray:
    """Inference-mode class probabilities for one sample or a batch."""
    xb, single = _batched(spec, x)
    probs, _ = forward(spec, w, xb.astype(w.dtype, copy=False))
    return probs[0] if single else probs


def predict_proba(spec: ModelSpec, w: ModelWeights, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    xb, _ = _batched(spec, x)
    xb = xb.astype(w.dtype, copy=False)
    out = [forward(spec, w, xb[i : i + batch_size])[0] for i in range(0, len(xb), batch_size)]
    if not out:
        return np.empty((0, spec.n_classes), dtype=w.dtype)
    return np.concatenate(out)


def cross_entropy(probs: np.ndarray, target) -> float | np.ndarray:
    """-log p[target] with p floored at 1e-12. Accepts one distribution or a batch."""
    probs = np.asarray(probs)
    target = np.asarray(target)
    n_classes = probs.shape[-1]
    if np.any(target < 0) or np.any(target >= n_classes):
        raise ValueError(f"target index out of range for {n_classes} classes: {target}")
    if probs.ndim == 1:
        return float(-np.log(max(float(probs[int(target)]), PROB_FLOOR)))
    picked = probs[np.arange(len(probs)), target.astype(int)]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def loss_and_grads(spec: ModelSpec, w: ModelWeights, x: np.ndarray, targets: np.ndarray, rng=None, mode: str = TRAIN):
    """Mean cross-entropy over the batch and its gradients.

    Returns ``(loss, grads, probs, new_stats)``. ``grads`` mirrors the weight
    blocks (trainable entries only); ``new_stats`` maps layer index to the
    updated batch-norm running statistics, which the caller may apply.
    """
    xb, _ = _batched(spec, x)
    targets = np.asarray(targets, dtype=np.int64)
    if len(xb) == 0 or len(xb) != len(targets):
        raise ShapeError(f"batch of {len(xb)} inputs with {len(targets)} targets")
    if spec.layers[-1].kind != "Softmax":
        raise ModelError("loss_and_grads requires a final Softmax layer")
    probs, caches = forward(spec, w, xb, mode, rng, keep_caches=True)
    n = len(xb)
    loss = float(cross_entropy(probs, targets).mean())

    # softmax + cross-entropy: d loss / d logits = (p - onehot) / n
    dy = probs.copy()
    dy[np.arange(n), targets] -= 1
    dy /= n

    grads: list[dict[str, np.ndarray]] = [{} for _ in spec.layers]
    new_stats = {}
    for i in range(len(spec.layers) - 2, -1, -1):
        layer = spec.layers[i]
        dy, g = layer_backward(layer, w.blocks[i], caches[i], dy, need_input_grad=i > 0)
        grads[i] = g
        if layer.kind == "BatchNorm" and caches[i][2] is not None:
            new_stats[i] = caches[i][2]
    return loss, grads, probs, new_stats


def apply_stats(w: ModelWeights, new_stats: dict) -> None:
    for i, stats in new_stats.items():
        w.blocks[i].update(stats)
