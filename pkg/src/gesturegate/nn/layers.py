"""Batched forward and backward passes for each layer kind.

Feature maps are (batch, channels, length); flat activations are
(batch, features). Every forward returns ``(y, cache)``; every backward takes
that cache and returns ``(dx, grads)`` where ``grads`` holds the trainable
parameters of the layer only.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gesturegate.errors import ShapeError
from gesturegate.nn.spec import BN_MOMENTUM, NORM_EPS, LayerSpec

TRAIN = "train"
INFER = "infer"


def _same_pad(kernel_size: int) -> tuple[int, int]:
    left = (kernel_size - 1) // 2
    return left, kernel_size - 1 - left


def conv1d_forward(x, kernel, bias, padding="same"):
    n, c, length = x.shape
    f, kc, k = kernel.shape
    if kc != c:
        raise ShapeError(f"Conv1D expects {kc} input channels, got {c}")
    left = _same_pad(k)[0] if padding == "same" else 0
    if padding == "same":
        x = np.pad(x, ((0, 0), (0, 0), _same_pad(k)))
    # (n, c, out, k) -> (n, out, c, k)
    cols = sliding_window_view(x, k, axis=2).transpose(0, 2, 1, 3)
    out_len = cols.shape[1]
    cols = cols.reshape(n * out_len, c * k)
    y = cols @ kernel.reshape(f, c * k).T + bias
    y = y.reshape(n, out_len, f).transpose(0, 2, 1)
    return np.ascontiguousarray(y), (cols, length, left)


def conv1d_backward(dy, cache, kernel, need_input_grad=True):
    cols, length, left = cache
    f, c, k = kernel.shape
    n, _, out_len = dy.shape
    dy_t = dy.transpose(0, 2, 1)
    dy_flat = dy_t.reshape(n * out_len, f)
    grads = {"kernel": (dy_flat.T @ cols).reshape(f, c, k), "bias": dy_flat.sum(axis=0)}
    if not need_input_grad:
        return None, grads
    # input gradient: correlate the fully padded dy with the flipped kernel
    dy_full = np.pad(dy_t, ((0, 0), (k - 1, k - 1), (0, 0)))
    win = sliding_window_view(dy_full, k, axis=1)[:, left : left + length]  # (n, L, f, k)
    flipped = kernel[:, :, ::-1].transpose(0, 2, 1).reshape(f * k, c)
    dx = win.reshape(n * length, f * k) @ flipped
    return np.ascontiguousarray(dx.reshape(n, length, c).transpose(0, 2, 1)), grads


def maxpool1d_forward(x, pool_size, stride, padding="valid"):
    n, c, length = x.shape
    if padding == "same":
        out_len = -(-length // stride)
        need = (out_len - 1) * stride + pool_size
        if need > length:
            x = np.pad(x, ((0, 0), (0, 0), (0, need - length)), constant_values=-np.inf)
    if stride == pool_size:
        out_len = (x.shape[2] - pool_size) // stride + 1
        windows = x[:, :, : out_len * pool_size].reshape(n, c, out_len, pool_size)
    else:
        windows = sliding_window_view(x, pool_size, axis=2)[:, :, ::stride]
    idx = windows.argmax(axis=3)
    y = np.take_along_axis(windows, idx[..., None], axis=3)[..., 0]
    return y, (idx, length, stride, pool_size)


def maxpool1d_backward(dy, cache):
    idx, length, stride, pool_size = cache
    n, c, out_len = dy.shape
    if stride == pool_size:
        # non-overlapping: each input position feeds at most one output
        dwin = np.zeros((n, c, out_len, pool_size), dtype=dy.dtype)
        np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=3)
        dx = dwin.reshape(n, c, out_len * pool_size)
        if dx.shape[2] >= length:
            return dx[:, :, :length], {}
        return np.pad(dx, ((0, 0), (0, 0), (0, length - dx.shape[2]))), {}
    pos = idx + stride * np.arange(out_len)
    width = max(length, int(pos.max()) + 1) if pos.size else length
    dx = np.zeros((n * c, width), dtype=dy.dtype)
    rows = np.repeat(np.arange(n * c), out_len)
    np.add.at(dx, (rows, pos.reshape(-1)), dy.reshape(-1))
    return dx[:, :length].reshape(n, c, length), {}


def _channel_axes(x):
    return (0, 2) if x.ndim == 3 else (0,)


def _bcast(v, x):
    return v.reshape(1, -1, 1) if x.ndim == 3 else v.reshape(1, -1)


def batchnorm_forward(x, block, mode):
    axes = _channel_axes(x)
    if mode == TRAIN:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        new_stats = {
            "running_mean": (BN_MOMENTUM * block["running_mean"] + (1 - BN_MOMENTUM) * mean).astype(x.dtype),
            "running_var": (BN_MOMENTUM * block["running_var"] + (1 - BN_MOMENTUM) * var).astype(x.dtype),
        }
    else:
        mean, var = block["running_mean"], block["running_var"]
        new_stats = None
    inv_std = 1.0 / np.sqrt(var + NORM_EPS)
    xhat = (x - _bcast(mean, x)) * _bcast(inv_std, x)
    y = _bcast(block["gain"], x) * xhat + _bcast(block["shift"], x)
    return y.astype(x.dtype, copy=False), (xhat, inv_std, new_stats)


def batchnorm_backward(dy, cache, block):
    xhat, inv_std, _ = cache
    axes = _channel_axes(dy)
    m = dy.size // dy.shape[1]
    dgain = (dy * xhat).sum(axis=axes)
    dshift = dy.sum(axis=axes)
    dxhat = dy * _bcast(block["gain"], dy)
    dx = (
        _bcast(inv_std / m, dy)
        * (m * dxhat - _bcast(dxhat.sum(axis=axes), dy) - xhat * _bcast((dxhat * xhat).sum(axis=axes), dy))
    )
    return dx.astype(dy.dtype, copy=False), {"gain": dgain, "shift": dshift}


def channelnorm_forward(x, block):
    # per-sample, per-channel standardization over time, then learned affine
    mean = x.mean(axis=2, keepdims=True)
    var = x.var(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + NORM_EPS)
    xhat = (x - mean) * inv_std
    y = block["gain"].reshape(1, -1, 1) * xhat + block["shift"].reshape(1, -1, 1)
    return y.astype(x.dtype, copy=False), (xhat, inv_std)


def channelnorm_backward(dy, cache, block):
    xhat, inv_std = cache
    m = dy.shape[2]
    dgain = (dy * xhat).sum(axis=(0, 2))
    dshift = dy.sum(axis=(0, 2))
    dxhat = dy * block["gain"].reshape(1, -1, 1)
    dx = (inv_std / m) * (
        m * dxhat - dxhat.sum(axis=2, keepdims=True) - xhat * (dxhat * xhat).sum(axis=2, keepdims=True)
    )
    return dx.astype(dy.dtype, copy=False), {"gain": dgain, "shift": dshift}


def dropout_forward(x, rate, mode, rng):
    if mode != TRAIN or rate == 0:
        return x, None
    # float64 draws so the mask for a given generator state is dtype independent
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1 - rate)
    return x * mask, mask


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def layer_forward(spec: LayerSpec, block: dict, x: np.ndarray, mode: str = INFER, rng=None):
    """Run one layer on a batch. Returns ``(y, cache)``."""
    p = spec.params
    kind = spec.kind
    if kind == "Conv1D":
        return conv1d_forward(x, block["kernel"], block["bias"], p.get("padding", "same"))
    if kind == "MaxPool1D":
        return maxpool1d_forward(x, p["pool_size"], p.get("stride", p["pool_size"]), p.get("padding", "valid"))
    if kind == "BatchNorm":
        return batchnorm_forward(x, block, mode)
    if kind == "ChannelNorm":
        return channelnorm_forward(x, block)
    if kind == "Dropout":
        return dropout_forward(x, p["rate"], mode, rng)
    if kind == "Flatten":
        return x.reshape(x.shape[0], -1), x.shape
    if kind == "Dense":
        if x.shape[1] != block["kernel"].shape[0]:
            raise ShapeError(f"Dense expects {block['kernel'].shape[0]} inputs, got {x.shape[1]}")
        return x @ block["kernel"] + block["bias"], x
    if kind == "ReLU":
        return np.maximum(x, 0), x > 0
    if kind == "Softmax":
        y = softmax(x)
        return y, y
    raise ShapeError(f"unsupported layer kind {kind}")


def layer_backward(spec: LayerSpec, block: dict, cache, dy: np.ndarray, need_input_grad: bool = True):
    """Gradient of one layer. Softmax is handled jointly with the loss, not here."""
    kind = spec.kind
    if kind == "Conv1D":
        return conv1d_backward(dy, cache, block["kernel"], need_input_grad)
    if kind == "MaxPool1D":
        return maxpool1d_backward(dy, cache)
    if kind == "BatchNorm":
        return batchnorm_backward(dy, cache, block)
    if kind == "ChannelNorm":
        return channelnorm_backward(dy, cache, block)
    if kind == "Dropout":
        return (dy if cache is None else dy * cache), {}
    if kind == "Flatten":
        return dy.reshape(cache), {}
    if kind == "Dense":
        return dy @ block["kernel"].T, {"kernel": cache.T @ dy, "bias": dy.sum(axis=0)}
    if kind == "ReLU":
        return dy * cache, {}
    raise ShapeError(f"no standalone backward for {kind}")
